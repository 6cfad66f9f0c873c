"""Bound schedules, convergence-rate experiments, and level-set diagnostics.

A schedule generates nested data/operator brackets whose widths decay
geometrically.  The rate experiment solves the primal problem along the
schedule and tracks the symmetric Bregman distance to the exact solution
against the data-width parameter; its reference subgradient comes from the
minimum-norm certificate on the exact operator.  Level-set helpers extract
super-level index sets, their perimeters, and the perimeter/area/subgradient
identity satisfied at optimality.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import lp
from .operators import DenseOperator, IntervalData, IntervalOperator
from .regularizers import Regularizer, symm_bregman
from .signals import Grid, IndexSet, Signal, hausdorff
from .solver import min_norm_certificate, solve_primal

__all__ = [
    "BoundsSchedule",
    "RateRow",
    "RateTable",
    "generate_bounds",
    "rate_experiment",
    "level_set",
    "perimeter",
    "check_levelset_identity",
    "hausdorff_levelsets",
    "midpoint_thresholds",
]


@dataclass(frozen=True)
class BoundsSchedule:
    """Geometric decay schedule for bracket widths.

    Data widths lie in ``[eps_n, c0 * eps_n]`` with ``eps_n = eps0 * decay**n``;
    operator widths stay below ``eta_n = d0 * eps_n``.  Successive brackets are
    nested by running intersection.
    """

    eps0: float
    decay: float
    c0: float = 1.5
    d0: float = 0.5
    steps: int = 8

    def __post_init__(self) -> None:
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must be in (0, 1)")
        if not self.c0 >= 1.0:
            raise ValueError("c0 must be at least 1")
        if self.d0 < 0:
            raise ValueError("d0 must be non-negative")
        if self.steps < 1:
            raise ValueError("steps must be positive")

    def eps(self, n: int) -> float:
        return self.eps0 * self.decay**n

    def eta(self, n: int) -> float:
        return self.d0 * self.eps(n)


def generate_bounds(
    schedule: BoundsSchedule,
    f_exact: Signal,
    a_exact: DenseOperator,
    n: int,
    rng_seed: int,
) -> tuple[IntervalData, IntervalOperator]:
    """Brackets for step ``n``, nested against every earlier step.

    Steps 0..n are generated with per-step substreams of the seed and
    intersected in order, so a fixed seed yields one consistent nested
    sequence regardless of which step is requested.
    """
    if not 0 <= n < schedule.steps:
        raise ValueError(f"step must lie in [0, {schedule.steps}), got {n}")
    f = f_exact.values
    a = a_exact.entries
    fu = np.full_like(f, np.inf)
    fl = np.full_like(f, -np.inf)
    au = np.full_like(a, np.inf)
    al = np.full_like(a, -np.inf)
    for k in range(n + 1):
        rng = np.random.default_rng([rng_seed, k])
        eps = schedule.eps(k)
        eta = schedule.eta(k)
        fu = np.minimum(fu, f + rng.uniform(eps, schedule.c0 * eps, f.shape))
        fl = np.maximum(fl, f - rng.uniform(eps, schedule.c0 * eps, f.shape))
        au = np.minimum(au, a + rng.uniform(0.0, eta, a.shape))
        al = np.maximum(al, np.maximum(a - rng.uniform(0.0, eta, a.shape), 0.0))
    data = IntervalData(
        lower=Signal(f_exact.grid, fl), upper=Signal(f_exact.grid, fu)
    )
    op = IntervalOperator(lower=DenseOperator(al), upper=DenseOperator(au))
    return data, op


@dataclass(frozen=True)
class RateRow:
    step: int
    eps: float
    bregman: float
    objective: float
    hausdorff: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class RateTable:
    """Per-step convergence record with the fitted log-log rate."""

    rows: tuple[RateRow, ...]
    thresholds: tuple[float, ...]
    slope: float | None
    mu_min_l1: float
    note: str = ""

    def eps_values(self) -> np.ndarray:
        return np.array([r.eps for r in self.rows])

    def bregman_values(self) -> np.ndarray:
        return np.array([r.bregman for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["n", "eps", "bregman", "objective"]
            header += [f"hausdorff_t{k + 1}" for k in range(len(self.thresholds))]
            w.writerow(header)
            for r in self.rows:
                row = [r.step, format(r.eps, ".17g"), format(r.bregman, ".17g"),
                       format(r.objective, ".17g")]
                row += [format(v, ".17g") for v in r.hausdorff]
                w.writerow(row)


def midpoint_thresholds(u: Signal, rel_tol: float = 1e-6) -> tuple[float, ...]:
    """Midpoints between consecutive distinct positive levels of a signal.

    Midpoints avoid thresholds that coincide with attained values, where
    level sets are unstable under perturbation.  Values closer than
    ``rel_tol`` (scaled by the signal magnitude) count as one level, so
    solver pivot noise does not spawn thresholds inside a plateau.
    """
    vals = np.unique(u.values)
    vals = vals[vals >= 0]
    if vals.size == 0:
        return ()
    gap = rel_tol * max(1.0, float(np.max(np.abs(u.values))))
    levels = [float(vals[0])]
    for v in vals[1:]:
        if v - levels[-1] > gap:
            levels.append(float(v))
    mids = [0.5 * (a + b) for a, b in zip(levels, levels[1:])]
    return tuple(m for m in mids if m > 0)


def level_set(u: Signal, t: float) -> IndexSet:
    """Indices where the signal reaches at least ``t``."""
    if not t > 0:
        raise ValueError(f"threshold must be positive, got {t}")
    return IndexSet.from_mask(u.values >= t)


def perimeter(e: IndexSet, grid: Grid) -> float:
    """Boundary transitions of the indicator; the domain boundary contributes none."""
    if e.n != grid.n:
        raise ValueError("index set does not match the grid")
    ind = e.mask().astype(float)
    return float(np.sum(np.abs(np.diff(ind))))


def check_levelset_identity(
    e: IndexSet, p: Signal, gamma: float, tol: float = 1e-6
) -> bool:
    """Perimeter plus ``gamma`` times area equals the subgradient mass on the set."""
    per = perimeter(e, p.grid)
    lhs = per + gamma * len(e)
    rhs = float(np.sum(p.values[list(e.indices)])) if len(e) else 0.0
    return abs(lhs - rhs) <= tol * (1.0 + per)


def hausdorff_levelsets(
    u_n: Signal, u_exact: Signal, thresholds
) -> dict[float, float]:
    """Hausdorff distance per threshold; ``inf`` flags an empty/non-empty mismatch."""
    out: dict[float, float] = {}
    for t in thresholds:
        a = level_set(u_n, t)
        b = level_set(u_exact, t)
        if len(a) == 0 and len(b) == 0:
            out[t] = 0.0
        elif len(a) == 0 or len(b) == 0:
            out[t] = math.inf
        else:
            out[t] = hausdorff(a, b, u_n.grid)
    return out


def rate_experiment(
    j: Regularizer,
    schedule: BoundsSchedule,
    f_exact: Signal,
    a_exact: DenseOperator,
    u_exact: Signal,
    rng_seed: int = 0,
    opts: lp.SolverOptions | None = None,
) -> RateTable:
    """Solve the primal problem along the schedule and fit the decay of the
    symmetric Bregman distance against the data-width parameter.

    Requires a feasible minimum-norm certificate on the exact operator; its
    subgradient is the fixed reference in the Bregman distance.
    """
    cert = min_norm_certificate(j, a_exact, u_exact, opts)
    if cert.status != lp.OPTIMAL:
        raise ValueError(
            f"minimum-norm certificate unavailable (status {cert.status}); "
            "the rate experiment requires the source condition"
        )
    thresholds = midpoint_thresholds(u_exact)
    rows = []
    for step in range(schedule.steps):
        data, op = generate_bounds(schedule, f_exact, a_exact, step, rng_seed)
        rep = solve_primal(j, op, data, opts)
        if rep.status != lp.OPTIMAL:
            raise ValueError(f"primal solve failed at step {step}: {rep.status}")
        d_symm = symm_bregman(rep.certificate.p, cert.p, rep.u, u_exact)
        hd = tuple(hausdorff_levelsets(rep.u, u_exact, thresholds).values())
        rows.append(
            RateRow(
                step=step,
                eps=schedule.eps(step),
                bregman=d_symm,
                objective=rep.objective,
                hausdorff=hd,
            )
        )
    eps = np.array([r.eps for r in rows])
    dvals = np.array([max(r.bregman, 1e-16) for r in rows])
    note = ""
    if np.ptp(eps) < 1e-9 * eps[0]:
        slope = None
        note = "(near-)constant widths: slope undefined"
    else:
        slope = float(np.polyfit(np.log(eps), np.log(dvals), 1)[0])
        if np.any(np.array([r.bregman for r in rows]) <= 0):
            note = "non-positive Bregman values clamped for the fit"
    return RateTable(
        rows=tuple(rows),
        thresholds=thresholds,
        slope=slope,
        mu_min_l1=cert.mu_l1,
        note=note,
    )
