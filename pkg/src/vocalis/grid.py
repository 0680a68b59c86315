"""Alignment of time-stamped metric series onto a shared bin grid.

Different metrics come out at different native rates (200 ms RMS windows,
~10 ms STFT frames). To correlate or display them together they are
mean-aggregated into consecutive grid_ms bins on a shared clock: bin k
covers [k*grid, (k+1)*grid) seconds from time zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSeries:
    """Values aggregated onto the shared grid.

    start_bin is the absolute index of the first value; carried[i] is
    True where bin start_bin+i had no samples and repeats the previous
    value.
    """

    values: np.ndarray
    grid_ms: float
    start_bin: int
    carried: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        flags = np.asarray(self.carried, dtype=bool)
        flags.setflags(write=False)
        object.__setattr__(self, "carried", flags)

    def __len__(self) -> int:
        return len(self.values)

    def times_s(self) -> np.ndarray:
        """Start time of each bin in seconds."""
        step = self.grid_ms * 1e-3
        return (self.start_bin + np.arange(len(self.values))) * step


def resample_to_grid(
    times_s: np.ndarray, values: np.ndarray, grid_ms: float
) -> GridSeries:
    """Mean-aggregate (time, value) samples into grid_ms bins.

    Bins between the first and last occupied bin that receive no samples
    carry the previous bin's value forward and are flagged.
    """
    times_s = np.asarray(times_s, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if len(times_s) == 0:
        raise ValueError("empty series")
    if len(times_s) != len(values):
        raise ValueError("times and values must have equal length")
    if np.any(np.diff(times_s) < 0):
        raise ValueError("series must be time-ordered")
    if grid_ms <= 0:
        raise ValueError(f"grid_ms must be positive, got {grid_ms}")

    step = grid_ms * 1e-3
    bins = np.floor(times_s / step).astype(np.int64)
    start_bin = int(bins[0])
    n_bins = int(bins[-1]) - start_bin + 1

    out = np.empty(n_bins)
    carried = np.zeros(n_bins, dtype=bool)
    for k in range(n_bins):
        mask = bins == start_bin + k
        if np.any(mask):
            out[k] = values[mask].mean()
        else:
            out[k] = out[k - 1]
            carried[k] = True
    return GridSeries(out, grid_ms, start_bin, carried)


def overlap(a: GridSeries, b: GridSeries) -> tuple[np.ndarray, np.ndarray]:
    """Clip two grid series of equal grid_ms to their common bin span."""
    if a.grid_ms != b.grid_ms:
        raise ValueError("grid_ms mismatch")
    lo = max(a.start_bin, b.start_bin)
    hi = min(a.start_bin + len(a), b.start_bin + len(b))
    if hi <= lo:
        raise ValueError("series do not overlap")
    return (
        a.values[lo - a.start_bin : hi - a.start_bin],
        b.values[lo - b.start_bin : hi - b.start_bin],
    )
