"""Deterministic driver simulator.

Produces labeled head-rotation datasets with controllable in-cab region
geometry, glance dynamics, class skew, and per-driver head-movement gain.
A driver's glance target follows a Markov chain with geometric dwell
times; head rotation tracks the fixated region's eccentricity scaled by
the driver's gain, on top of a personal resting offset and first-order
smoothed Gaussian noise. High-gain drivers reorient with the head (owls);
low-gain drivers barely move it (lizards).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, GlanceRegion, TaskKind, region_code
from .seeds import substream

NOISE_SMOOTHING = 0.7  # AR(1) coefficient on the additive head noise
DEFAULT_FRAME_PERIOD_S = 1.0 / 15.0
DEFAULT_FORWARD_SHARE = 0.95
STATIONARY_TOLERANCE = 0.02


@dataclass(frozen=True)
class RegionLayout:
    """Nominal (yaw, pitch) eccentricity in degrees per glance region.

    These angles are scenario configuration (plausible in-cab geometry),
    not measured values; forward must sit at (0, 0).
    """

    eccentricities: dict[GlanceRegion, tuple[float, float]]

    def __post_init__(self):
        ecc = self.eccentricities
        if GlanceRegion.FORWARD not in ecc or ecc[GlanceRegion.FORWARD] != (0.0, 0.0):
            raise ValueError("layout must place forward at (0, 0)")
        for region, (yaw, pitch) in ecc.items():
            if not (np.isfinite(yaw) and np.isfinite(pitch)):
                raise ValueError(f"non-finite eccentricity for {region.value}")

    @property
    def regions(self) -> tuple[GlanceRegion, ...]:
        return tuple(self.eccentricities)

    def yaw_pitch(self, region: GlanceRegion) -> tuple[float, float]:
        return self.eccentricities[region]


DEFAULT_LAYOUT = RegionLayout(
    {
        GlanceRegion.FORWARD: (0.0, 0.0),
        GlanceRegion.INSTRUMENT_CLUSTER: (0.0, -15.0),
        GlanceRegion.LEFT_WINDOW_MIRROR: (-40.0, 0.0),
        GlanceRegion.CENTER_STACK: (30.0, -20.0),
        GlanceRegion.RIGHT_WINDOW_MIRROR: (55.0, 0.0),
    }
)

# dwell-time means (frames at 15 fps) and off-road visit weights used by
# the default scenario; forward dwell is derived from the skew target
DEFAULT_OFF_DWELL = {
    GlanceRegion.INSTRUMENT_CLUSTER: 8.0,
    GlanceRegion.LEFT_WINDOW_MIRROR: 7.0,
    GlanceRegion.CENTER_STACK: 8.0,
    GlanceRegion.RIGHT_WINDOW_MIRROR: 9.0,
}
DEFAULT_OFF_WEIGHTS = {
    GlanceRegion.INSTRUMENT_CLUSTER: 0.2,
    GlanceRegion.LEFT_WINDOW_MIRROR: 0.1,
    GlanceRegion.CENTER_STACK: 0.5,
    GlanceRegion.RIGHT_WINDOW_MIRROR: 0.2,
}

GAIN_RANGES = {
    "mixed": (0.05, 0.95),
    "all_owl": (0.7, 0.95),
    "all_lizard": (0.05, 0.3),
}


@dataclass(frozen=True)
class DriverSpec:
    """Per-driver behavioral parameters.

    head_gain is the fraction of gaze eccentricity expressed as head
    rotation: 0 is a pure lizard, 1 a pure owl. noise_sd is the per-axis
    (rot_x, rot_y, rot_z) standard deviation of the unsmoothed head
    noise, in degrees.
    """

    subject_id: str
    head_gain: float
    noise_sd: tuple[float, float, float]
    dwell_means: dict[GlanceRegion, float]
    resting_yaw: float = 0.0
    resting_pitch: float = 0.0
    resting_roll: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.head_gain <= 1.0):
            raise ValueError(f"head_gain must be in [0, 1], got {self.head_gain}")
        if min(self.noise_sd) <= 0:
            raise ValueError("noise_sd must be positive on every axis")
        if min(self.dwell_means.values()) < 1.0:
            raise ValueError("dwell-time means must be at least 1 frame")


def _stationary(transition: np.ndarray) -> np.ndarray:
    n = transition.shape[0]
    a = np.vstack([transition.T - np.eye(n), np.ones(n)])
    b = np.concatenate([np.zeros(n), [1.0]])
    pi, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to generate one synthetic dataset."""

    drivers: tuple[DriverSpec, ...]
    layout: RegionLayout
    transition_regions: tuple[GlanceRegion, ...]
    transition: np.ndarray  # row-stochastic, self-loops encode scenario dwell
    forward_share: float = DEFAULT_FORWARD_SHARE
    frames_per_task: int = 600
    frame_period_s: float = DEFAULT_FRAME_PERIOD_S
    master_seed: int = 0

    def __post_init__(self):
        t = np.asarray(self.transition, dtype=float)
        n = len(self.transition_regions)
        if t.shape != (n, n):
            raise ValueError("transition matrix shape does not match region list")
        if np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-9) or np.any(t < 0):
            raise ValueError("transition matrix rows must be non-negative and sum to 1")
        if not (0.0 < self.forward_share < 1.0):
            raise ValueError("forward_share must be in (0, 1)")
        for region in self.transition_regions:
            if region not in self.layout.eccentricities:
                raise ValueError(f"region {region.value} missing from layout")
        pi = _stationary(t)
        fwd = self.transition_regions.index(GlanceRegion.FORWARD)
        if abs(pi[fwd] - self.forward_share) > STATIONARY_TOLERANCE:
            raise ValueError(
                f"stationary forward probability {pi[fwd]:.4f} is more than "
                f"{STATIONARY_TOLERANCE} from the target {self.forward_share}"
            )

    def stationary_distribution(self) -> np.ndarray:
        return _stationary(np.asarray(self.transition, dtype=float))


def default_scenario(
    profile: str,
    n_subjects: int = 22,
    seed: int = 0,
    frames_per_task: int = 600,
    forward_share: float = DEFAULT_FORWARD_SHARE,
) -> ScenarioSpec:
    """Build the stock scenario for a driver-population profile.

    Gains are drawn uniformly from the profile's range; resting offsets
    and noise levels vary per driver, with noise increasing in gain so
    active head movers also show wider rotation distributions.
    """
    if profile not in GAIN_RANGES:
        raise ValueError(f"profile must be one of {sorted(GAIN_RANGES)}, got {profile!r}")
    if n_subjects < 2:
        raise ValueError("need at least 2 subjects")

    regions = (GlanceRegion.FORWARD,) + tuple(DEFAULT_OFF_DWELL)
    weighted_off_dwell = sum(DEFAULT_OFF_WEIGHTS[r] * DEFAULT_OFF_DWELL[r] for r in DEFAULT_OFF_DWELL)
    forward_dwell = forward_share / (1.0 - forward_share) * weighted_off_dwell
    dwells = {GlanceRegion.FORWARD: forward_dwell, **DEFAULT_OFF_DWELL}

    n = len(regions)
    transition = np.zeros((n, n))
    transition[0, 0] = 1.0 - 1.0 / forward_dwell
    for j, region in enumerate(regions[1:], start=1):
        transition[0, j] = DEFAULT_OFF_WEIGHTS[region] / forward_dwell
        transition[j, j] = 1.0 - 1.0 / DEFAULT_OFF_DWELL[region]
        transition[j, 0] = 1.0 / DEFAULT_OFF_DWELL[region]

    lo, hi = GAIN_RANGES[profile]
    gain_rng = substream(seed, "driver-gains")
    offset_rng = substream(seed, "driver-offsets")
    drivers = []
    for i in range(n_subjects):
        gain = float(gain_rng.uniform(lo, hi))
        noise_sd = (2.0 + 3.5 * gain, 2.5 + 5.0 * gain, 1.0 + gain)
        drivers.append(
            DriverSpec(
                subject_id=f"s{201 + i}",
                head_gain=gain,
                noise_sd=noise_sd,
                dwell_means=dwells,
                resting_yaw=float(offset_rng.normal(0.0, 6.0)),
                resting_pitch=float(offset_rng.normal(0.0, 5.0)),
                resting_roll=float(offset_rng.normal(0.0, 3.0)),
            )
        )
    return ScenarioSpec(
        drivers=tuple(drivers),
        layout=DEFAULT_LAYOUT,
        transition_regions=regions,
        transition=transition,
        forward_share=forward_share,
        frames_per_task=frames_per_task,
        master_seed=seed,
    )


def _driver_transition(spec: ScenarioSpec, driver: DriverSpec) -> np.ndarray:
    """Scenario matrix with self-loops replaced by the driver's dwell means."""
    t = np.asarray(spec.transition, dtype=float).copy()
    for i, region in enumerate(spec.transition_regions):
        dwell = driver.dwell_means.get(region)
        if dwell is None:
            continue
        stay = 1.0 - 1.0 / dwell
        off = t[i].copy()
        off[i] = 0.0
        off_sum = off.sum()
        if off_sum > 0:
            off *= (1.0 - stay) / off_sum
        t[i] = off
        t[i, i] = stay if off_sum > 0 else 1.0
    return t


def _sample_labels(transition: np.ndarray, frames: int, rng: np.random.Generator) -> np.ndarray:
    """Region-index trace of one task, run-by-run (geometric dwells)."""
    n = transition.shape[0]
    jump = transition.copy()
    np.fill_diagonal(jump, 0.0)
    jump_cdf = np.cumsum(jump / np.maximum(jump.sum(axis=1, keepdims=True), 1e-300), axis=1)
    stay = np.diag(transition)
    labels = np.empty(frames, dtype=np.int64)
    pos = 0
    current = 0  # streams start on the forward roadway
    while pos < frames:
        leave_p = 1.0 - stay[current]
        dwell = frames - pos if leave_p <= 0 else int(rng.geometric(leave_p))
        dwell = min(dwell, frames - pos)
        labels[pos : pos + dwell] = current
        pos += dwell
        if pos < frames:
            current = int(np.searchsorted(jump_cdf[current], rng.random()))
    return labels


def _smoothed_noise(frames: int, sd: tuple[float, float, float], rng: np.random.Generator) -> np.ndarray:
    """AR(1)-smoothed Gaussian noise, (frames, 3), stationary start."""
    beta = NOISE_SMOOTHING
    eps = rng.normal(0.0, sd, size=(frames, 3))
    out = np.empty_like(eps)
    out[0] = eps[0] * np.sqrt((1.0 - beta) / (1.0 + beta))
    for t in range(1, frames):
        out[t] = beta * out[t - 1] + (1.0 - beta) * eps[t]
    return out


def generate(spec: ScenarioSpec) -> Dataset:
    """Generate the full dataset for a scenario, deterministically."""
    region_yaw_pitch = np.array([spec.layout.yaw_pitch(r) for r in spec.transition_regions])
    codes = np.array([region_code(r) for r in spec.transition_regions], dtype=np.int16)
    frames = spec.frames_per_task
    period_ms = spec.frame_period_s * 1000.0
    timestamps_one = np.round(np.arange(frames) * period_ms).astype(np.int64)

    columns: list[tuple[np.ndarray, ...]] = []
    for d_idx, driver in enumerate(spec.drivers):
        transition = _driver_transition(spec, driver)
        for t_idx, task in enumerate(TaskKind):
            rng = substream(spec.master_seed, "trace", d_idx, t_idx)
            labels = _sample_labels(transition, frames, rng)
            noise = _smoothed_noise(frames, driver.noise_sd, rng)
            rot = np.empty((frames, 3))
            rot[:, 0] = driver.resting_pitch + driver.head_gain * region_yaw_pitch[labels, 1]
            rot[:, 1] = driver.resting_yaw + driver.head_gain * region_yaw_pitch[labels, 0]
            rot[:, 2] = driver.resting_roll
            rot += noise
            columns.append(
                (
                    np.full(frames, driver.subject_id, dtype=object),
                    np.full(frames, task.value, dtype=object),
                    timestamps_one,
                    rot,
                    codes[labels],
                )
            )
    return Dataset(
        np.concatenate([c[0] for c in columns]),
        np.concatenate([c[1] for c in columns]),
        np.concatenate([c[2] for c in columns]),
        np.vstack([c[3] for c in columns]),
        np.concatenate([c[4] for c in columns]),
        provenance=f"scenario(seed={spec.master_seed})",
    )
