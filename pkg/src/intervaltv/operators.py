"""Forward operators and their entrywise interval enclosures.

The forward map is a dense Gaussian convolution with Dirichlet (zero)
extension.  Uncertainty is modelled by entrywise brackets: a perturbed
operator plus a known amplitude yields lower/upper matrices enclosing the
exact one, and noisy data plus a noise level yields elementwise data bounds.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .signals import Grid, Signal

__all__ = [
    "DenseOperator",
    "IntervalOperator",
    "IntervalData",
    "gaussian_convolution",
    "perturb_operator",
    "interval_from_noisy",
    "data_bounds",
    "check_assumption5",
    "apply",
    "adjoint_apply",
    "interval_width",
]


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Dense matrix acting on signals; immutable after construction."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.entries, dtype=float)
        if m.ndim != 2 or m.size == 0:
            raise ValueError(f"operator entries must form a non-empty matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator entries must be finite")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def max_abs_entry(self) -> float:
        """The l1-to-linf operator norm, exact in the discrete setting."""
        return float(np.max(np.abs(self.entries)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for row in self.entries:
                w.writerow([format(v, ".17g") for v in row])

    @classmethod
    def from_csv(cls, path) -> "DenseOperator":
        with open(path, newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        return cls(np.array(rows))


@dataclass(frozen=True, eq=False)
class IntervalOperator:
    """Entrywise bracket ``lower <= A <= upper`` around an unknown operator."""

    lower: DenseOperator
    upper: DenseOperator

    def __post_init__(self) -> None:
        if self.lower.entries.shape != self.upper.entries.shape:
            raise ValueError("interval operator bounds must share a shape")
        if np.any(self.lower.entries > self.upper.entries):
            raise ValueError("operator lower bound exceeds upper bound")

    @property
    def rows(self) -> int:
        return self.lower.rows

    @property
    def cols(self) -> int:
        return self.lower.cols

    def contains(self, a: DenseOperator, tol: float = 0.0) -> bool:
        return bool(
            np.all(self.lower.entries <= a.entries + tol)
            and np.all(a.entries <= self.upper.entries + tol)
        )

    def midpoint(self) -> DenseOperator:
        return DenseOperator(0.5 * (self.lower.entries + self.upper.entries))


@dataclass(frozen=True, eq=False)
class IntervalData:
    """Elementwise bracket ``lower <= f <= upper`` around the exact data."""

    lower: Signal
    upper: Signal

    def __post_init__(self) -> None:
        if self.lower.grid != self.upper.grid:
            raise ValueError("interval data bounds must share a grid")
        if np.any(self.lower.values > self.upper.values):
            raise ValueError("data lower bound exceeds upper bound")

    @property
    def grid(self) -> Grid:
        return self.lower.grid

    def contains(self, f: Signal, tol: float = 0.0) -> bool:
        return bool(
            np.all(self.lower.values <= f.values + tol)
            and np.all(f.values <= self.upper.values + tol)
        )

    def midpoint(self) -> Signal:
        return Signal(self.grid, 0.5 * (self.lower.values + self.upper.values))


def gaussian_convolution(grid: Grid, sigma: float) -> DenseOperator:
    """Gaussian blur matrix with Dirichlet boundary handling.

    The kernel is sampled at grid spacing and normalised to unit sum over its
    full untruncated stencil; contributions falling outside the domain are
    dropped, so boundary row sums are below one while interior rows sum to
    one.  ``sigma`` is in the same units as ``grid.h``.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    n, h = grid.n, grid.h
    # stencil wide enough that dropped normalisation mass is far below 1e-12
    reach = max(n, int(np.ceil(12.0 * sigma / h)) + 1)
    offsets = np.arange(-reach, reach + 1)
    kernel = np.exp(-((offsets * h) ** 2) / (2.0 * sigma**2))
    kernel /= kernel.sum()
    idx = np.arange(n)
    entries = kernel[(idx[:, None] - idx[None, :]) + reach]
    return DenseOperator(entries)


def perturb_operator(a: DenseOperator, level: float, rng_seed: int) -> DenseOperator:
    """Entrywise uniform perturbation with clipping at zero.

    Each entry becomes ``max(a_ij + r_ij d, 0)`` with ``r_ij`` i.i.d. uniform
    on [-1, 1] and ``d = level * max a_kl``.  Deterministic for a fixed seed.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"perturbation level must be in (0, 1), got {level}")
    rng = np.random.default_rng(rng_seed)
    d = level * float(np.max(a.entries))
    r = rng.uniform(-1.0, 1.0, size=a.entries.shape)
    return DenseOperator(np.maximum(a.entries + r * d, 0.0))


def interval_from_noisy(a_noisy: DenseOperator, d: float) -> IntervalOperator:
    """Bracket of width ``2 d`` around a noisy operator, clipped at zero below.

    Encloses any generating exact operator with non-negative entries whose
    entrywise distance to ``a_noisy`` is at most ``d``.
    """
    if d < 0:
        raise ValueError(f"enclosure amplitude must be non-negative, got {d}")
    return IntervalOperator(
        lower=DenseOperator(np.maximum(a_noisy.entries - d, 0.0)),
        upper=DenseOperator(a_noisy.entries + d),
    )


def data_bounds(f_noisy: Signal, delta: float) -> IntervalData:
    """Elementwise bracket of half-width ``delta`` around noisy data."""
    if delta < 0:
        raise ValueError(f"noise level must be non-negative, got {delta}")
    return IntervalData(
        lower=f_noisy.with_values(f_noisy.values - delta),
        upper=f_noisy.with_values(f_noisy.values + delta),
    )


def check_assumption5(a: DenseOperator) -> float:
    """Smallest column sum of the matrix (smallest entry of the adjoint applied to ones).

    The boundedness guarantee for the feasible set requires this to be
    strictly positive.
    """
    return float(np.min(a.entries.sum(axis=0)))


def apply(a: DenseOperator, u: Signal) -> Signal:
    if a.cols != u.grid.n:
        raise ValueError(f"operator has {a.cols} columns but the signal has {u.grid.n} samples")
    return Signal(Grid(a.rows, u.grid.h), a.entries @ u.values)


def adjoint_apply(a: DenseOperator, v: Signal) -> Signal:
    if a.rows != v.grid.n:
        raise ValueError(f"operator has {a.rows} rows but the signal has {v.grid.n} samples")
    return Signal(Grid(a.cols, v.grid.h), a.entries.T @ v.values)


def interval_width(op: IntervalOperator) -> float:
    """Largest entrywise gap between the upper and lower operator bounds."""
    return float(np.max(op.upper.entries - op.lower.entries))
