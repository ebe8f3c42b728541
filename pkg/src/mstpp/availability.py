"""Availability sampling and assembly of the augmented step dataset.

Each observed step contributes one frame: the covariates at the observed
position (slot 1) plus J-1 availability positions drawn from a bivariate
normal centered at the previous position with covariance
2 * delta_bar * dt * I. Draws falling off the raster (or on nodata cells)
are rejected and redrawn, which truncates the availability density to the
valid region without distorting its shape there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoDataError, OutOfDomainError, RejectionExhaustedError
from .raster import CovariateStack
from .telemetry import MotilitySeries, Track

# Rejection budget per needed draw; exceeding it signals a track hugging
# the raster edge or an availability scale too large for the domain.
MAX_PROPOSALS_PER_DRAW = 1000


@dataclass(frozen=True)
class StepFrame:
    """One step's covariate vectors: observed slot first, then availability.

    ``w[0]`` and ``positions[0]`` belong to the observed position (the
    single "used" slot); rows 1..J-1 are the availability sample. External
    dumps number slots 1..J with slot 1 used.
    """

    step_index: int
    w: np.ndarray          # (J, p)
    positions: np.ndarray  # (J, 2)
    delta_bar: float       # m^2/h
    dt: float              # hours


@dataclass(frozen=True)
class AugmentedDataset:
    """Stacked step frames ready for likelihood evaluation.

    W has shape (n_steps, J, p) with slot 0 the observed position per
    step. Construction is deterministic given (track, motility, stack, J,
    seed); each step draws from its own seed-derived substream, so frames
    may be built in any order or in parallel without changing the result.
    """

    W: np.ndarray            # (n_steps, J, p)
    positions: np.ndarray    # (n_steps, J, 2)
    delta_bar: np.ndarray    # (n_steps,)
    dt: np.ndarray           # (n_steps,)
    J: int
    seed: int
    proposal_counts: np.ndarray  # (n_steps,) proposals consumed per step

    @property
    def n_frames(self) -> int:
        return self.W.shape[0]

    @property
    def p(self) -> int:
        return self.W.shape[2]

    def frame(self, k: int) -> StepFrame:
        """Frame for the step ending at fix k+1 (0-based frame index k)."""
        return StepFrame(
            step_index=k + 1,
            w=self.W[k],
            positions=self.positions[k],
            delta_bar=float(self.delta_bar[k]),
            dt=float(self.dt[k]),
        )

    @property
    def frames(self) -> list:
        return [self.frame(k) for k in range(self.n_frames)]


def _step_rng(seed: int, step_index: int) -> np.random.Generator:
    # Substream keyed on (seed, step_index): reproducible regardless of
    # the order in which steps are processed.
    return np.random.default_rng([seed, step_index])


def _truncated_gaussian_draws(center, sigma, count, stack, rng, budget):
    """Rejection-sample `count` points from N(center, sigma^2 I) on the stack.

    Returns (positions, n_proposals). Shared by the availability sampler
    and the track simulator so both truncate at the boundary identically.
    """
    center = np.asarray(center, dtype=float)
    out = np.empty((count, 2))
    got = 0
    used = 0
    while got < count:
        batch = min(max(count - got, 16), budget - used)
        if batch <= 0:
            raise RejectionExhaustedError(
                f"used {used} proposals for {count} draws near {tuple(center)}; "
                "the position may be too close to the raster edge for this scale"
            )
        draws = center + sigma * rng.standard_normal((batch, 2))
        used += batch
        ok = stack.valid_mask(draws)
        take = min(int(ok.sum()), count - got)
        if take:
            out[got : got + take] = draws[ok][:take]
            got += take
    return out, used


def sample_availability(s_prev, delta_bar, dt, count, stack, rng) -> np.ndarray:
    """Draw `count` availability positions around the previous position.

    Positions are independent draws from N(s_prev, 2*delta_bar*dt*I),
    redrawn until they land in-extent on non-nodata cells.

    Raises
    ------
    RejectionExhaustedError
        After 1000 proposals per needed draw.
    """
    if not (delta_bar > 0 and dt > 0):
        raise ValueError("delta_bar and dt must be positive")
    sigma = np.sqrt(2.0 * delta_bar * dt)
    positions, _ = _truncated_gaussian_draws(
        s_prev, sigma, count, stack, rng, budget=MAX_PROPOSALS_PER_DRAW * count
    )
    return positions


def build_augmented(
    track: Track,
    motility: MotilitySeries,
    stack: CovariateStack,
    J: int,
    seed: int,
) -> AugmentedDataset:
    """Assemble the augmented dataset of J covariate vectors per step.

    Slot 0 of frame k holds the covariates at the observed fix k+1; slots
    1..J-1 come from the availability distribution centered at fix k.
    Observed fixes off the raster are a hard error listing the offending
    fix indices; nothing is silently dropped.
    """
    if J < 2:
        raise ValueError(f"J must be >= 2, got {J}")
    if len(motility.delta_bar) != track.n_steps:
        raise ValueError(
            f"motility series length {len(motility.delta_bar)} does not match "
            f"{track.n_steps} steps"
        )

    xy = track.xy()
    t = track.times()
    in_extent = stack.header.contains(xy[:, 0], xy[:, 1])
    if not np.all(in_extent):
        bad = np.flatnonzero(~in_extent).tolist()
        raise OutOfDomainError(f"observed fixes outside raster extent: indices {bad}")
    valid = stack.valid_mask(xy)
    if not np.all(valid):
        bad = np.flatnonzero(~valid).tolist()
        raise NoDataError(f"observed fixes on nodata cells: indices {bad}")

    m = track.n_steps
    W = np.empty((m, J, stack.p))
    positions = np.empty((m, J, 2))
    counts = np.zeros(m, dtype=int)
    dt = np.diff(t)
    w_observed = stack.extract_many(xy[1:])

    for k in range(m):
        rng = _step_rng(seed, k + 1)
        sigma = np.sqrt(2.0 * motility.delta_bar[k] * dt[k])
        avail, used = _truncated_gaussian_draws(
            xy[k], sigma, J - 1, stack, rng, budget=MAX_PROPOSALS_PER_DRAW * (J - 1)
        )
        positions[k, 0] = xy[k + 1]
        positions[k, 1:] = avail
        W[k, 0] = w_observed[k]
        W[k, 1:] = stack.extract_many(avail)
        counts[k] = used

    return AugmentedDataset(
        W=W,
        positions=positions,
        delta_bar=motility.delta_bar.copy(),
        dt=dt,
        J=J,
        seed=seed,
        proposal_counts=counts,
    )


def dump_augmented(dataset: AugmentedDataset, path) -> None:
    """Write the augmented dataset as an audit CSV.

    Columns: step, slot (1-based, slot 1 used), x, y, used, w_1..w_p.
    """
    p = dataset.p
    header = "step,slot,x,y,used," + ",".join(f"w_{i + 1}" for i in range(p))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for k in range(dataset.n_frames):
            for j in range(dataset.J):
                x, y = dataset.positions[k, j]
                w = ",".join(f"{v:.17g}" for v in dataset.W[k, j])
                fh.write(f"{k + 1},{j + 1},{x:.17g},{y:.17g},{int(j == 0)},{w}\n")
