"""Telemetry track ingestion and pre-estimation of homogenized motility.

Tracks are ordered fixes (t in hours, x/y in meters). The per-step motility
series delta_bar is the temporal moving average of squared displacement
rates and feeds the Gaussian availability scale downstream.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import TrackFormatError

# Lower bound on the motility estimate (m^2/h). delta_bar enters as a
# covariance scale and as a divisor, so an exact zero is singular.
DELTA_BAR_FLOOR = 1e-6

DEFAULT_WINDOW_HOURS = 70.0


@dataclass(frozen=True)
class Fix:
    t: float  # hours
    x: float  # meters
    y: float  # meters


@dataclass(frozen=True)
class Track:
    """Ordered telemetry fixes for one individual.

    At least 3 fixes (2 steps); t strictly increasing. Step i runs from
    fix i-1 to fix i, for i = 1, ..., n-1 in 0-based fix indices.
    """

    fixes: tuple
    source_id: str = ""

    def __post_init__(self):
        fixes = tuple(self.fixes)
        if len(fixes) < 3:
            raise ValueError(f"a track needs at least 3 fixes, got {len(fixes)}")
        for f in fixes:
            if not (np.isfinite(f.t) and np.isfinite(f.x) and np.isfinite(f.y)):
                raise ValueError("track contains non-finite fields")
        t = np.array([f.t for f in fixes])
        if np.any(np.diff(t) <= 0):
            k = int(np.argmax(np.diff(t) <= 0))
            raise ValueError(f"fix times must be strictly increasing (violated at fix {k + 1})")
        object.__setattr__(self, "fixes", fixes)

    @property
    def n(self) -> int:
        return len(self.fixes)

    @property
    def n_steps(self) -> int:
        return len(self.fixes) - 1

    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.fixes])

    def xy(self) -> np.ndarray:
        return np.array([[f.x, f.y] for f in self.fixes])


@dataclass(frozen=True)
class MotilitySeries:
    """Pre-estimated motility delta_bar (m^2/h), one entry per step.

    ``delta_bar[k]`` belongs to the step ending at fix k+1. ``n_i[k]`` is
    the number of steps whose end time fell inside the averaging window.
    """

    delta_bar: np.ndarray
    window_hours: float
    n_i: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "delta_bar", np.asarray(self.delta_bar, dtype=float))
        object.__setattr__(self, "n_i", np.asarray(self.n_i, dtype=int))
        if np.any(self.delta_bar <= 0):
            raise ValueError("delta_bar entries must be positive")


def _parse_time(token: str, row: int):
    try:
        return float(token), False
    except ValueError:
        pass
    try:
        # fromisoformat on 3.10 rejects a trailing Z
        return datetime.fromisoformat(token.replace("Z", "+00:00")), True
    except ValueError:
        raise TrackFormatError(f"row {row}: cannot parse time {token!r}") from None


def read_track(path, source_id: str | None = None) -> Track:
    """Read a telemetry CSV with header ``t,x,y``.

    t is either decimal hours or an ISO-8601 timestamp; timestamps are
    converted to hours since the first fix. x and y are meters in the
    raster coordinate system. Out-of-order or duplicate times are an
    error, never silently sorted.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows or [c.strip() for c in rows[0]] != ["t", "x", "y"]:
        raise TrackFormatError("row 1: header must be exactly 't,x,y'")

    fixes = []
    iso_epoch = None
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise TrackFormatError(f"row {k}: expected 3 fields, got {len(row)}")
        t_raw, is_iso = _parse_time(row[0].strip(), k)
        if is_iso:
            if iso_epoch is None:
                if fixes:
                    raise TrackFormatError(f"row {k}: mixed numeric and ISO-8601 times")
                iso_epoch = t_raw
            t = (t_raw - iso_epoch).total_seconds() / 3600.0
        else:
            if iso_epoch is not None:
                raise TrackFormatError(f"row {k}: mixed numeric and ISO-8601 times")
            t = t_raw
        try:
            x, y = float(row[1]), float(row[2])
        except ValueError:
            raise TrackFormatError(f"row {k}: non-numeric coordinate") from None
        if fixes and t == fixes[-1].t:
            raise TrackFormatError(f"row {k}: duplicate timestamp {row[0].strip()!r}")
        if fixes and t < fixes[-1].t:
            raise TrackFormatError(f"row {k}: time runs backwards")
        fixes.append(Fix(t=t, x=x, y=y))
    if len(fixes) < 3:
        raise TrackFormatError(f"track has {len(fixes)} fixes, need at least 3")
    return Track(fixes=tuple(fixes), source_id=source_id or str(path))


def write_track(track: Track, path) -> None:
    """Write a track in the telemetry CSV format at full float precision."""
    with open(path, "w", newline="") as fh:
        fh.write("t,x,y\n")
        for f in track.fixes:
            fh.write(f"{f.t:.17g},{f.x:.17g},{f.y:.17g}\n")


def steps(track: Track) -> list:
    """Per-step tuples (s_prev, s_curr, dt), one per consecutive fix pair."""
    xy = track.xy()
    t = track.times()
    return [(xy[k - 1], xy[k], float(t[k] - t[k - 1])) for k in range(1, track.n)]


def estimate_delta_bar(track: Track, window_hours: float = DEFAULT_WINDOW_HOURS) -> MotilitySeries:
    """Moving-average motility estimate per step.

    For the step ending at time t_i, averages the squared displacement
    rate ||s_j - s_{j-1}||^2 / (4 dt_j) over all steps j whose end time
    satisfies |t_j - t_i| <= window_hours / 2. The window truncates at the
    track ends; the step itself always qualifies, so the average is over
    n_i >= 1 terms. Estimates below DELTA_BAR_FLOOR are clamped to it.
    """
    if not window_hours > 0:
        raise ValueError("window_hours must be positive")
    t = track.times()
    xy = track.xy()
    disp2 = np.sum(np.diff(xy, axis=0) ** 2, axis=1)
    dt = np.diff(t)
    rate = disp2 / (4.0 * dt)

    t_end = t[1:]  # step j is labeled by its end time
    half = window_hours / 2.0
    lo = np.searchsorted(t_end, t_end - half, side="left")
    hi = np.searchsorted(t_end, t_end + half, side="right")
    csum = np.concatenate([[0.0], np.cumsum(rate)])
    n_i = hi - lo
    delta_bar = (csum[hi] - csum[lo]) / n_i
    delta_bar = np.maximum(delta_bar, DELTA_BAR_FLOOR)
    return MotilitySeries(delta_bar=delta_bar, window_hours=float(window_hours), n_i=n_i)
