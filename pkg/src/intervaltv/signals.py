"""Uniform grids, 1-D signals, index sets, and the norms/metrics used everywhere else.

Discrete total variation and the l1 norm use unit weights (no grid-spacing
factor), so every discrete identity downstream (duality, level sets) is exact.
Grid spacing enters only through geometric quantities such as the Hausdorff
distance.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "EmptySetError",
    "Grid",
    "Signal",
    "IndexSet",
    "tv",
    "l1_norm",
    "linf_norm",
    "psnr",
    "ssim_1d",
    "hausdorff",
]


class EmptySetError(ValueError):
    """Set distance requested for an empty index set."""


@dataclass(frozen=True)
class Grid:
    """Uniform sampling grid with ``n`` points spaced ``h`` apart."""

    n: int
    h: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ValueError(f"grid needs at least 2 samples, got n={self.n}")
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValueError(f"grid spacing must be positive and finite, got h={self.h}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h", float(self.h))

    @property
    def x(self) -> np.ndarray:
        """Sample coordinates ``0, h, 2h, ...``."""
        return np.arange(self.n) * self.h


@dataclass(frozen=True, eq=False)
class Signal:
    """A sampled function on a :class:`Grid`; values are immutable after construction."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values, h: float = 1.0) -> "Signal":
        values = np.asarray(values, dtype=float)
        return cls(Grid(len(values), h), values)

    def with_values(self, values) -> "Signal":
        """New signal on the same grid."""
        return Signal(self.grid, values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for v in self.values:
                w.writerow([format(v, ".17g")])

    @classmethod
    def from_csv(cls, path, h: float = 1.0) -> "Signal":
        with open(path, newline="") as fh:
            vals = [float(row[0]) for row in csv.reader(fh) if row]
        return cls.from_values(vals, h=h)

    def to_json(self) -> str:
        return json.dumps(list(self.values))

    @classmethod
    def from_json(cls, text: str, h: float = 1.0) -> "Signal":
        return cls.from_values(json.loads(text), h=h)


@dataclass(frozen=True)
class IndexSet:
    """Strictly increasing sample indices inside ``[0, n)``."""

    indices: tuple[int, ...]
    n: int

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        if idx and (idx[0] < 0 or idx[-1] >= self.n):
            raise ValueError(f"indices must lie in [0, {self.n})")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_iterable(cls, it: Iterable[int], n: int) -> "IndexSet":
        return cls(tuple(sorted(set(int(i) for i in it))), n)

    @classmethod
    def from_mask(cls, mask) -> "IndexSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(tuple(int(i) for i in np.flatnonzero(mask)), len(mask))

    def as_array(self) -> np.ndarray:
        return np.array(self.indices, dtype=int)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        m[list(self.indices)] = True
        return m

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i) -> bool:
        return int(i) in set(self.indices)


def _same_grid(u: Signal, ref: Signal) -> None:
    if u.grid != ref.grid:
        raise ValueError(f"grid mismatch: {u.grid} vs {ref.grid}")


def tv(u: Signal) -> float:
    """Discrete total variation, the sum of absolute forward differences."""
    return float(np.sum(np.abs(np.diff(u.values))))


def l1_norm(u: Signal) -> float:
    return float(np.sum(np.abs(u.values)))


def linf_norm(u: Signal) -> float:
    return float(np.max(np.abs(u.values)))


def psnr(u: Signal, ref: Signal, peak: float | None = None) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the signals coincide.

    ``peak`` defaults to the maximum of the reference signal.
    """
    _same_grid(u, ref)
    if peak is None:
        peak = float(np.max(ref.values))
    if not peak > 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean((u.values - ref.values) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def ssim_1d(u: Signal, ref: Signal, window: int = 8, dynamic_range: float | None = None) -> float:
    """Mean structural similarity over all sliding windows of the given length.

    Per-window statistics are population moments (no Bessel correction); the
    stabilising constants are ``C1 = (0.01 L)**2`` and ``C2 = (0.03 L)**2``
    where ``L`` is the dynamic range (defaults to the peak-to-peak range of
    the reference).
    """
    _same_grid(u, ref)
    n = u.grid.n
    if not 1 <= window <= n:
        raise ValueError(f"window must be in [1, {n}], got {window}")
    if dynamic_range is None:
        dynamic_range = float(np.ptp(ref.values))
    if not dynamic_range > 0:
        raise ValueError("dynamic range must be positive")
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    uw = np.lib.stride_tricks.sliding_window_view(u.values, window)
    rw = np.lib.stride_tricks.sliding_window_view(ref.values, window)
    mu = uw.mean(axis=1)
    mr = rw.mean(axis=1)
    vu = ((uw - mu[:, None]) ** 2).mean(axis=1)
    vr = ((rw - mr[:, None]) ** 2).mean(axis=1)
    cov = ((uw - mu[:, None]) * (rw - mr[:, None])).mean(axis=1)
    s = ((2 * mu * mr + c1) * (2 * cov + c2)) / ((mu**2 + mr**2 + c1) * (vu + vr + c2))
    return float(np.mean(s))


def hausdorff(a: IndexSet, b: IndexSet, grid: Grid) -> float:
    """Hausdorff distance between two index sets in grid units."""
    if len(a) == 0 or len(b) == 0:
        raise EmptySetError("hausdorff distance is undefined for empty index sets")
    if a.n != grid.n or b.n != grid.n:
        raise ValueError("index sets do not match the grid")
    ia = a.as_array()[:, None]
    ib = b.as_array()[None, :]
    d = np.abs(ia - ib)
    d_ab = d.min(axis=1).max()
    d_ba = d.min(axis=0).max()
    return grid.h * float(max(d_ab, d_ba))
