"""Per-class hidden Markov models with diagonal-Gaussian emissions.

One model is trained per glance class on that class's sample sequences
(Baum-Welch); an unlabeled sequence gets the label of the model with the
highest forward log-likelihood. All recursions run in log space with
log-sum-exp, batched over sequences. Sequences are grouped into length
buckets before padding so the time loop does not sweep padding for the
short ones.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingError
from ..seeds import substream

LOG_2PI = float(np.log(2.0 * np.pi))


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    """Minimal log-sum-exp; the time loops call this thousands of times."""
    m = a.max(axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.log(np.exp(a - m).sum(axis=axis)) + np.squeeze(m, axis=axis)


@dataclass(frozen=True)
class HmmParams:
    state_count: int = 3
    max_iter: int = 200
    tol: float = 1e-6  # stop when per-observation log-likelihood gain falls below
    var_floor: float = 1e-4
    starvation_threshold: float = 1e-8
    max_reinits: int = 3


@dataclass
class HmmModel:
    pi: np.ndarray  # (N,)
    trans: np.ndarray  # (N, N), rows sum to 1
    means: np.ndarray  # (N, D)
    variances: np.ndarray  # (N, D), >= var_floor
    params: HmmParams
    seed: int
    ll_trace: list[float] = field(default_factory=list)
    reinit_count: int = 0

    def as_dict(self) -> dict:
        return {
            "kind": "hmm",
            "version": 1,
            "seed": self.seed,
            "params": self.params.__dict__,
            "pi": self.pi.tolist(),
            "trans": self.trans.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "ll_trace": self.ll_trace,
            "reinit_count": self.reinit_count,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HmmModel":
        return cls(
            np.asarray(doc["pi"], dtype=float),
            np.asarray(doc["trans"], dtype=float),
            np.asarray(doc["means"], dtype=float),
            np.asarray(doc["variances"], dtype=float),
            HmmParams(**doc["params"]),
            int(doc["seed"]),
            list(doc.get("ll_trace", [])),
            int(doc.get("reinit_count", 0)),
        )


@dataclass
class _Bucket:
    indices: np.ndarray  # positions in the caller's sequence list
    obs: np.ndarray  # (S, Tmax, D), zero padded
    lengths: np.ndarray  # (S,)
    mask: np.ndarray  # (S, Tmax) validity


def _make_buckets(seqs: list[np.ndarray], n_buckets: int = 4) -> list[_Bucket]:
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    order = np.argsort(lengths, kind="stable")
    buckets = []
    for chunk in np.array_split(order, min(n_buckets, len(seqs))):
        if len(chunk) == 0:
            continue
        t_max = int(lengths[chunk].max())
        d = seqs[0].shape[1]
        obs = np.zeros((len(chunk), t_max, d))
        for row, i in enumerate(chunk):
            obs[row, : lengths[i]] = seqs[i]
        mask = np.arange(t_max)[None, :] < lengths[chunk][:, None]
        buckets.append(_Bucket(chunk, obs, lengths[chunk], mask))
    return buckets


def _log_emissions(obs: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """(S, T, N) log densities of diagonal Gaussians."""
    diff = obs[:, :, None, :] - means[None, None, :, :]
    quad = (diff**2 / variances[None, None, :, :]).sum(axis=-1)
    norm = (np.log(variances).sum(axis=-1) + variances.shape[-1] * LOG_2PI)[None, None, :]
    return -0.5 * (quad + norm)


def _log_forward(log_pi: np.ndarray, log_trans: np.ndarray, logb: np.ndarray, lengths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full forward pass; returns (alpha (S,T,N), per-sequence loglik)."""
    s, t_max, n = logb.shape
    alpha = np.empty((s, t_max, n))
    alpha[:, 0] = log_pi[None, :] + logb[:, 0]
    for t in range(1, t_max):
        step = _logsumexp(alpha[:, t - 1, :, None] + log_trans[None, :, :], axis=1) + logb[:, t]
        valid = (t < lengths)[:, None]
        alpha[:, t] = np.where(valid, step, alpha[:, t - 1])
    last = alpha[np.arange(s), lengths - 1]
    return alpha, _logsumexp(last, axis=1)


def _log_forward_ll(log_pi: np.ndarray, log_trans: np.ndarray, logb: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Forward log-likelihood only, with a running alpha (no T storage)."""
    s, t_max, n = logb.shape
    alpha = log_pi[None, :] + logb[:, 0]
    for t in range(1, t_max):
        step = _logsumexp(alpha[:, :, None] + log_trans[None, :, :], axis=1) + logb[:, t]
        alpha = np.where((t < lengths)[:, None], step, alpha)
    return _logsumexp(alpha, axis=1)


def _log_backward(log_trans: np.ndarray, logb: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    s, t_max, n = logb.shape
    beta = np.zeros((s, t_max, n))
    for t in range(t_max - 2, -1, -1):
        step = _logsumexp(log_trans[None, :, :] + (logb[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
        valid = (t + 1 < lengths)[:, None]
        beta[:, t] = np.where(valid, step, 0.0)
    return beta


def hmm_loglik_batch(model: HmmModel, sequences: list[np.ndarray]) -> np.ndarray:
    """Forward-algorithm log-likelihood of each sequence under the model."""
    seqs = [np.atleast_2d(np.asarray(s, dtype=float)) for s in sequences]
    out = np.empty(len(seqs))
    with np.errstate(divide="ignore"):
        log_pi, log_trans = np.log(model.pi), np.log(model.trans)
    for bucket in _make_buckets(seqs):
        logb = _log_emissions(bucket.obs, model.means, model.variances)
        out[bucket.indices] = _log_forward_ll(log_pi, log_trans, logb, bucket.lengths)
    return out


def hmm_train(
    sequences: list[np.ndarray],
    params: HmmParams = HmmParams(),
    seed: int = 0,
) -> HmmModel:
    """Baum-Welch over all sequences of one class.

    Stops when the per-observation log-likelihood improves by less than
    ``params.tol`` or after ``params.max_iter`` iterations. A state whose
    total occupancy collapses is re-seeded from a random observation, at
    most ``params.max_reinits`` times.
    """
    seqs = [np.atleast_2d(np.asarray(s, dtype=float)) for s in sequences]
    if not seqs:
        raise ValueError("hmm_train needs at least one sequence")
    total_frames = int(sum(len(s) for s in seqs))
    n = params.state_count
    d = seqs[0].shape[1]
    if total_frames < n:
        raise ValueError(f"total sequence length {total_frames} is below state count {n}")

    buckets = _make_buckets(seqs)
    obs_sq = [bucket.obs**2 for bucket in buckets]
    pooled = np.concatenate(seqs, axis=0)
    global_var = np.maximum(pooled.var(axis=0), params.var_floor)
    rng = substream(seed, "hmm-init")
    pick = rng.choice(total_frames, size=n, replace=False)
    means = pooled[pick].copy()
    variances = np.tile(global_var, (n, 1))
    pi = np.full(n, 1.0 / n)
    trans = np.full((n, n), 0.2 / max(n - 1, 1))
    np.fill_diagonal(trans, 0.8 if n > 1 else 1.0)

    trace: list[float] = []
    reinits = 0
    prev_per_obs = -np.inf
    for _ in range(params.max_iter):
        with np.errstate(divide="ignore"):
            log_pi, log_trans = np.log(pi), np.log(trans)

        total_ll = 0.0
        gamma0 = np.zeros(n)
        occupancy = np.zeros(n)
        s1 = np.zeros((n, d))
        s2 = np.zeros((n, d))
        xi_acc = np.zeros((n, n))
        for bucket, sq in zip(buckets, obs_sq):
            logb = _log_emissions(bucket.obs, means, variances)
            alpha, ll = _log_forward(log_pi, log_trans, logb, bucket.lengths)
            beta = _log_backward(log_trans, logb, bucket.lengths)
            gamma = np.where(bucket.mask[:, :, None], np.exp(alpha + beta - ll[:, None, None]), 0.0)
            total_ll += float(ll.sum())
            gamma0 += gamma[:, 0, :].sum(axis=0)
            occupancy += gamma.sum(axis=(0, 1))
            s1 += np.einsum("stn,std->nd", gamma, bucket.obs)
            s2 += np.einsum("stn,std->nd", gamma, sq)
            emit_beta = logb + beta
            for t in range(bucket.obs.shape[1] - 1):
                active = t + 1 < bucket.lengths
                if not active.any():
                    break
                xi_acc += np.exp(
                    alpha[active, t, :, None]
                    + log_trans[None, :, :]
                    + emit_beta[active, t + 1, None, :]
                    - ll[active, None, None]
                ).sum(axis=0)

        trace.append(total_ll)

        if np.any(occupancy < params.starvation_threshold):
            reinits += 1
            if reinits > params.max_reinits:
                raise TrainingError("HMM state starvation persisted after reinitialization")
            for state in np.flatnonzero(occupancy < params.starvation_threshold):
                means[state] = pooled[rng.integers(0, total_frames)]
                variances[state] = global_var
            pi = np.full(n, 1.0 / n)
            prev_per_obs = -np.inf
            continue

        pi = gamma0 / gamma0.sum()
        row_mass = xi_acc.sum(axis=1, keepdims=True)
        trans = np.where(row_mass > 0, xi_acc / np.maximum(row_mass, 1e-300), trans)
        means = s1 / occupancy[:, None]
        variances = np.maximum(s2 / occupancy[:, None] - means**2, params.var_floor)

        per_obs = total_ll / total_frames
        if per_obs - prev_per_obs < params.tol:
            break
        prev_per_obs = per_obs

    return HmmModel(pi, trans, means, variances, params, seed, trace, reinits)


def hmm_classify(models: dict[str, HmmModel], sequence: np.ndarray) -> str:
    """Label of the model maximizing the forward log-likelihood.

    Ties break toward the lexicographically smaller class label. A
    non-finite likelihood indicates a broken variance floor and raises.
    """
    return hmm_classify_sequences(models, [sequence])[0]


def hmm_classify_sequences(
    models: dict[str, HmmModel],
    sequences: list[np.ndarray],
    log_priors: dict[str, float] | None = None,
) -> list[str]:
    """Batch classification; optional per-class log priors are added."""
    labels = sorted(models)
    scores = np.empty((len(sequences), len(labels)))
    for j, label in enumerate(labels):
        scores[:, j] = hmm_loglik_batch(models[label], sequences)
        if log_priors is not None:
            scores[:, j] += log_priors[label]
    if not np.isfinite(scores).all():
        bad = int(np.flatnonzero(~np.isfinite(scores).all(axis=1))[0])
        raise ValueError(f"non-finite log-likelihood for sequence {bad}; check variance floor")
    # argmax keeps the first maximum, so ties go to the smaller sorted label
    best = np.argmax(scores, axis=1)
    return [labels[i] for i in best]
