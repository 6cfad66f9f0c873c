"""Comparison methods: naive noisy-operator solve and sup-norm Tikhonov
regularisation with (plain or operator-aware) discrepancy-principle weight
selection.

The naive solve treats the perturbed operator as exact, collapsing the
operator interval to a point.  The Tikhonov baseline minimises
``||A u - f||_inf + alpha * value(j, u)`` over ``u >= 0`` as one LP; the
weight is chosen so the residual matches ``C * delta`` (plain rule) or
``C * (delta + h * l1(u))`` (modified rule, accounting for operator error).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lp
from .operators import DenseOperator, IntervalData, IntervalOperator
from .regularizers import Regularizer, epigraph_encode
from .signals import Grid, Signal, l1_norm
from .solver import PrimalSolveReport, solve_primal

__all__ = [
    "MorozovConfig",
    "MorozovResult",
    "TikhonovLinfSolver",
    "naive_solve",
    "tikhonov_linf",
    "morozov",
]


@dataclass(frozen=True)
class MorozovConfig:
    """Parameters of the discrepancy-principle root find."""

    c_factor: float = 1.01
    delta: float = 0.0
    h_op: float = 0.0
    alpha_lo: float = 1e-6
    alpha_hi: float = 1e3
    root_tol: float = 1e-2
    grid_points: int = 60
    max_bisect: int = 60

    def __post_init__(self) -> None:
        if not self.c_factor > 1.0:
            raise ValueError("c_factor must exceed 1")
        if self.delta < 0 or self.h_op < 0:
            raise ValueError("noise levels must be non-negative")
        if not 0 < self.alpha_lo < self.alpha_hi:
            raise ValueError("alpha bracket must be positive and ordered")


def naive_solve(
    j: Regularizer,
    a_noisy: DenseOperator,
    data: IntervalData,
    opts: lp.SolverOptions | None = None,
) -> PrimalSolveReport:
    """Solve with the noisy operator treated as exact (degenerate interval).

    Infeasibility is a legitimate outcome here: nothing guarantees the true
    solution fits the collapsed constraints.
    """
    return solve_primal(j, IntervalOperator(a_noisy, a_noisy), data, opts)


class TikhonovLinfSolver:
    """Sup-norm Tikhonov LP with re-pricing across regularisation weights.

    The constraints do not depend on ``alpha``, so one simplex tableau serves
    the whole weight path; subsequent solves restart from the previous basis.
    """

    def __init__(self, j: Regularizer, a: DenseOperator, f: Signal,
                 opts: lp.SolverOptions | None = None) -> None:
        if a.rows != f.grid.n:
            raise ValueError("operator and data dimensions do not match")
        self._grid = Grid(a.cols, f.grid.h)
        b = lp.LpBuilder()
        self._u_idx = b.add_vars(a.cols)
        terms = epigraph_encode(j, self._u_idx, b)
        self._r_idx = b.add_vars(1)
        ext = np.concatenate([self._u_idx, self._r_idx])
        for i in range(a.rows):
            row = a.entries[i]
            b.add_leq(ext, np.concatenate([row, [-1.0]]), f.values[i])
            b.add_leq(ext, np.concatenate([-row, [-1.0]]), -f.values[i])
        self._j_part = b.pad(terms.objective)
        self._engine = lp.SimplexEngine(b.build(self._j_part), opts)
        self._last_alpha: float | None = None

    def _reprice(self, alpha: float) -> Signal:
        c = alpha * self._j_part
        c[self._r_idx] = 1.0
        sol = self._engine.solve(c) if self._last_alpha is None else self._engine.resolve(c)
        if sol.status != lp.OPTIMAL:
            raise RuntimeError(f"Tikhonov LP is {sol.status}")
        self._last_alpha = alpha
        return Signal(self._grid, np.maximum(sol.x[self._u_idx], 0.0))

    def solve(self, alpha: float) -> Signal:
        """Solve at the given weight, walking the weight path in bounded hops.

        Re-pricing far from the current basis can make the simplex crawl, so
        large weight changes are bridged by intermediate solves.
        """
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        if self._last_alpha is not None:
            span = abs(math.log(alpha / self._last_alpha))
            segments = max(1, math.ceil(span / math.log(10.0)))
            if segments > 1:
                path = np.linspace(math.log(self._last_alpha), math.log(alpha), segments + 1)
                for lg in path[1:-1]:
                    self._reprice(math.exp(lg))
        return self._reprice(alpha)


def tikhonov_linf(
    j: Regularizer,
    a: DenseOperator,
    f: Signal,
    alpha: float,
    opts: lp.SolverOptions | None = None,
) -> Signal:
    """Minimise ``||A u - f||_inf + alpha * value(j, u)`` over ``u >= 0``."""
    return TikhonovLinfSolver(j, a, f, opts).solve(alpha)


@dataclass(frozen=True, eq=False)
class MorozovResult:
    alpha: float
    u: Signal
    residual: float
    target: float
    fallback_used: bool


def _residual(a: DenseOperator, u: Signal, f: Signal) -> float:
    return float(np.max(np.abs(a.entries @ u.values - f.values)))


def morozov(
    j: Regularizer,
    a: DenseOperator,
    f: Signal,
    cfg: MorozovConfig,
    modified: bool = False,
    opts: lp.SolverOptions | None = None,
) -> MorozovResult:
    """Pick the Tikhonov weight by bisection on the discrepancy mismatch.

    ``modified`` targets ``C (delta + h ||u||_1)`` instead of ``C delta``.
    Monotonicity of the mismatch is assumed for the bisection; when the
    bracket shows no sign change a log-spaced grid scan locates one, and if
    none exists the scan's best point is refused with an error.
    """

    solver = TikhonovLinfSolver(j, a, f, opts)
    tol_scale = max(cfg.delta, 1e-12)
    best: list = [math.inf, None]

    def mismatch(alpha: float) -> tuple[float, Signal, float, float]:
        u = solver.solve(alpha)
        res = _residual(a, u, f)
        target = cfg.c_factor * (cfg.delta + (cfg.h_op * l1_norm(u) if modified else 0.0))
        g = res - target
        # the residual is piecewise constant in alpha, so the equation may
        # only be solvable up to its jump size; remember the closest visit
        score = abs(g) / max(target, tol_scale)
        if score < best[0]:
            best[0] = score
            best[1] = (alpha, u, res, target)
        return g, u, res, target

    # descend a weight ladder from the large end and stop at the first sign
    # change; the subsequent bisection then never re-prices the tableau far
    # from its current basis, which keeps every solve cheap
    lo_log, hi_log = math.log(cfg.alpha_lo), math.log(cfg.alpha_hi)
    decades = max(1, math.ceil((hi_log - lo_log) / math.log(10.0)))

    def find_bracket(num: int) -> tuple[float, float, float] | None:
        ladder = np.linspace(hi_log, lo_log, num + 1)
        g_prev, lg_prev = None, None
        for lg in ladder:
            g, _, _, _ = mismatch(math.exp(lg))
            if g_prev is not None and g_prev * g <= 0:
                return lg, lg_prev, g
            g_prev, lg_prev = g, lg
        return None

    fallback = False
    bracket = find_bracket(decades)
    if bracket is None:
        # no sign change on the decade ladder: re-scan on a finer grid
        fallback = True
        bracket = find_bracket(max(cfg.grid_points, 2 * decades))
        if bracket is None:
            raise ValueError(
                "discrepancy mismatch has no sign change on the alpha bracket; "
                "widen the bracket or check the noise levels"
            )
    lo, hi, g_lo = bracket
    for _ in range(cfg.max_bisect):
        mid = 0.5 * (lo + hi)
        g_mid, u_mid, res_mid, tgt_mid = mismatch(math.exp(mid))
        if abs(g_mid) <= cfg.root_tol * max(tgt_mid, tol_scale):
            break
        if g_lo * g_mid <= 0:
            hi = mid
        else:
            lo = mid
            g_lo = g_mid
        if hi - lo < 1e-4:
            break
    alpha, u, res, tgt = best[1]
    return MorozovResult(alpha=alpha, u=u, residual=res, target=tgt, fallback_used=fallback)
