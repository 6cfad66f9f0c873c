"""Two-step debiasing on the model manifold, jump detection, and error bars.

The model manifold is the feasible set intersected with a near-zero Bregman
ball around the reconstruction: signals that keep the regulariser pairing
``value(j, u) - <p_ref, u>`` below a small budget, optionally capped in the
``<p_ref, u - u_ref>`` direction.  In the total-variation setting its members
essentially share the reconstruction's jump set, which is what makes
re-optimising a quadratic data term on it remove contrast loss without
re-introducing oscillations.

Debiasing runs fully-corrective conditional-gradient iterations: every linear
subproblem is one LP solve (warm re-priced, since only the objective changes
between iterations), and the weights over the collected atoms are re-optimised
exactly after each oracle call.  The reported gap is the certified best
conditional-gradient gap seen so far, which is monotone and upper-bounds the
objective error of the returned point.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import lp
from .operators import DenseOperator, IntervalData, IntervalOperator, check_assumption5
from .regularizers import Regularizer, difference_matrix, value
from .signals import Grid, IndexSet, Signal, l1_norm
from .solver import PrimalSolveReport

__all__ = [
    "ModelManifoldSpec",
    "RegionDecomposition",
    "ErrorBars",
    "DebiasOptions",
    "DebiasResult",
    "manifold_from_solve",
    "debias",
    "detect_jumps",
    "error_bars",
]


@dataclass(frozen=True, eq=False)
class ModelManifoldSpec:
    """Constraint data of the debiasing search set."""

    u_ref: Signal
    p_ref: Signal
    eps: float
    c_cap: float
    op: IntervalOperator
    data: IntervalData
    gamma: float

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise ValueError("manifold slack eps must be positive")
        if not self.c_cap > 0:
            raise ValueError("manifold cap must be positive (may be inf)")

    @property
    def regularizer(self) -> Regularizer:
        return Regularizer(self.gamma)

    def membership(self, v: Signal, tol: float = 1e-8) -> bool:
        """All five manifold conditions within an absolute tolerance."""
        scale = 1.0 + float(np.max(np.abs(self.data.upper.values)))
        if float(np.min(v.values)) < -tol:
            return False
        if float(np.max(self.op.lower.entries @ v.values - self.data.upper.values)) > tol * scale:
            return False
        if float(np.max(self.data.lower.values - self.op.upper.entries @ v.values)) > tol * scale:
            return False
        pairing = value(self.regularizer, v) - float(self.p_ref.values @ v.values)
        if pairing > self.eps + tol:
            return False
        if math.isfinite(self.c_cap):
            drift = float(self.p_ref.values @ (v.values - self.u_ref.values))
            if drift > self.c_cap + tol:
                return False
        return True


def manifold_from_solve(
    report: PrimalSolveReport, eps: float, c_cap_finite: float = 10.0
) -> ModelManifoldSpec:
    """Manifold around a solved reconstruction.

    The cap is dropped (set infinite) when the reconstruction is strictly
    positive; otherwise the configured finite value applies.
    """
    if report.status != lp.OPTIMAL:
        raise ValueError(f"cannot build a manifold from a {report.status} solve")
    if report.op is None or report.data is None:
        raise ValueError("the report carries no interval bounds; re-attach them first")
    u_ref = report.u
    c_cap = math.inf if float(np.min(u_ref.values)) > 0 else float(c_cap_finite)
    return ModelManifoldSpec(
        u_ref=u_ref,
        p_ref=report.certificate.p,
        eps=eps,
        c_cap=c_cap,
        op=report.op,
        data=report.data,
        gamma=report.gamma,
    )


@dataclass(frozen=True)
class _ManifoldLp:
    engine: lp.SimplexEngine
    u_idx: np.ndarray
    num_vars: int


def _build_manifold_engine(m: ModelManifoldSpec, opts: lp.SolverOptions | None = None) -> _ManifoldLp:
    n = m.u_ref.grid.n
    b = lp.LpBuilder()
    u_idx = b.add_vars(n)
    t_idx = b.add_vars(n - 1)
    for i in range(n - 1):
        cols = [u_idx[i], u_idx[i + 1], t_idx[i]]
        b.add_leq(cols, [-1.0, 1.0, -1.0], 0.0)
        b.add_leq(cols, [1.0, -1.0, -1.0], 0.0)
    b.add_leq_block(m.op.lower.entries, u_idx, m.data.upper.values)
    b.add_leq_block(-m.op.upper.entries, u_idx, -m.data.lower.values)
    p = m.p_ref.values
    cols = list(u_idx) + list(t_idx)
    coeffs = list(m.gamma - p) + [1.0] * (n - 1)
    b.add_leq(cols, coeffs, m.eps)
    if math.isfinite(m.c_cap):
        b.add_leq(u_idx, p, float(p @ m.u_ref.values) + m.c_cap)
    problem = b.build(np.zeros(b.num_vars))
    return _ManifoldLp(engine=lp.SimplexEngine(problem, opts), u_idx=u_idx, num_vars=b.num_vars)


@dataclass(frozen=True)
class DebiasOptions:
    """``objective`` selects the data term: the supported quadratic one, or a
    sup-norm variant solved as a single LP (kept for experimentation)."""

    gap_tol: float = 1e-5
    max_iters: int = 2000
    drop_tol: float = 1e-12
    objective: str = "l2"


def _restricted_simplex_qp(
    q_cols: np.ndarray, f: np.ndarray, w_start: np.ndarray, max_pivots: int = 200
) -> np.ndarray:
    """Exact active-set solve of ``min 0.5 ||Q w - f||^2`` over the weight simplex.

    The column count is the active-set size of the conditional-gradient outer
    loop, so the problem stays tiny; rank deficiency is handled by the
    least-squares solve.
    """
    k = q_cols.shape[1]
    if k == 1:
        return np.ones(1)
    w = np.maximum(np.asarray(w_start, dtype=float), 0.0)
    w /= w.sum()
    pinned = np.zeros(k, dtype=bool)
    for _ in range(max_pivots):
        idx = np.flatnonzero(~pinned)
        if idx.size == 1:
            cand = np.zeros(k)
            cand[idx[0]] = 1.0
        else:
            base = np.zeros(idx.size)
            base[0] = 1.0
            null = np.vstack([-np.ones(idx.size - 1), np.eye(idx.size - 1)])
            qf = q_cols[:, idx]
            coef, *_ = np.linalg.lstsq(qf @ null, f - qf @ base, rcond=None)
            cand = np.zeros(k)
            cand[idx] = base + null @ coef
        if np.all(cand >= -1e-10):
            w = np.maximum(cand, 0.0)
            w /= w.sum()
            grad = q_cols.T @ (q_cols @ w - f)
            nu = float(np.min(grad[~pinned]))
            releasable = np.flatnonzero(pinned & (grad < nu - 1e-10))
            if releasable.size == 0:
                return w
            pinned[releasable[np.argmin(grad[releasable])]] = False
        else:
            step = cand - w
            shrink = step < -1e-15
            theta = min(1.0, float(np.min(-w[shrink] / step[shrink])))
            w = np.maximum(w + theta * step, 0.0)
            total = w.sum()
            if total <= 0:
                w = np.zeros(k)
                w[int(np.argmax(cand))] = 1.0
            else:
                w /= total
            pinned |= w <= 1e-14
            if np.all(pinned):
                pinned[int(np.argmax(w))] = False
    return w


@dataclass(frozen=True, eq=False)
class DebiasResult:
    u: Signal
    objective: float
    gap: float
    iterations: int
    converged: bool


def debias(
    m: ModelManifoldSpec,
    a_mid: DenseOperator | None = None,
    f_mid: Signal | None = None,
    opts: DebiasOptions | None = None,
    lp_opts: lp.SolverOptions | None = None,
) -> DebiasResult:
    """Minimise ``0.5 ||A u - f||^2`` over the manifold by conditional gradient.

    ``a_mid`` and ``f_mid`` default to the interval midpoints.  Away steps over
    the collected atoms give the scheme its speed; the line search on the
    quadratic is exact and closed-form.  Stops at the gap tolerance or the
    iteration cap.
    """
    opts = opts or DebiasOptions()
    if check_assumption5(m.op.lower) <= 0:
        raise ValueError(
            "manifold may be unbounded: the lower operator bound has a non-positive column sum"
        )
    a = (a_mid or m.op.midpoint()).entries
    f = (f_mid or m.data.midpoint()).values
    if opts.objective == "linf":
        return _debias_linf(m, a, f, lp_opts)
    if opts.objective != "l2":
        raise ValueError(f"unknown debias objective {opts.objective!r}")
    mlp = _build_manifold_engine(m, lp_opts)

    # atoms: feasible points whose convex hull carries the iterate; each new
    # oracle vertex joins and the weights are re-optimised exactly (a tiny
    # simplex-constrained least squares), which avoids the zigzag stall of
    # plain step rules near a face
    x = m.u_ref.values.copy()
    atoms = [x.copy()]
    a_atoms = [a @ x]
    weights = np.ones(1)
    ax = a_atoms[0].copy()
    best_gap = math.inf
    it = 0
    converged = False
    while it < opts.max_iters:
        grad = a.T @ (ax - f)
        c = np.zeros(mlp.num_vars)
        c[mlp.u_idx] = grad
        sol = mlp.engine.solve(c) if it == 0 else mlp.engine.resolve(c)
        if sol.status != lp.OPTIMAL:
            raise RuntimeError(f"linear subproblem failed: {sol.status}")
        v = sol.x[mlp.u_idx]
        fw_gap = float(grad @ (x - v))
        best_gap = min(best_gap, max(fw_gap, 0.0))
        if best_gap <= opts.gap_tol:
            converged = True
            break
        is_new = all(
            np.max(np.abs(at - v)) > 1e-12 * (1.0 + np.max(np.abs(v))) for at in atoms
        )
        if is_new:
            atoms.append(v.copy())
            a_atoms.append(a @ v)
            weights = np.append(weights, 0.0)
        q_cols = np.column_stack(a_atoms)
        weights = _restricted_simplex_qp(q_cols, f, weights)
        keep = np.flatnonzero(weights > opts.drop_tol)
        if keep.size == 0:
            keep = np.array([int(np.argmax(weights))])
        atoms = [atoms[k] for k in keep]
        a_atoms = [a_atoms[k] for k in keep]
        weights = weights[keep]
        weights = weights / weights.sum()
        x = np.column_stack(atoms) @ weights
        ax = np.column_stack(a_atoms) @ weights
        it += 1
    u = Signal(m.u_ref.grid, np.maximum(x, 0.0))
    obj = 0.5 * float(np.sum((a @ u.values - f) ** 2))
    return DebiasResult(u=u, objective=obj, gap=best_gap, iterations=it, converged=converged)


def _debias_linf(m: ModelManifoldSpec, a: np.ndarray, f: np.ndarray,
                 lp_opts: lp.SolverOptions | None) -> DebiasResult:
    """Sup-norm discrepancy variant: one LP over the lifted manifold."""
    n = m.u_ref.grid.n
    b = lp.LpBuilder()
    u_idx = b.add_vars(n)
    t_idx = b.add_vars(n - 1)
    for i in range(n - 1):
        cols = [u_idx[i], u_idx[i + 1], t_idx[i]]
        b.add_leq(cols, [-1.0, 1.0, -1.0], 0.0)
        b.add_leq(cols, [1.0, -1.0, -1.0], 0.0)
    b.add_leq_block(m.op.lower.entries, u_idx, m.data.upper.values)
    b.add_leq_block(-m.op.upper.entries, u_idx, -m.data.lower.values)
    p = m.p_ref.values
    b.add_leq(
        list(u_idx) + list(t_idx),
        list(m.gamma - p) + [1.0] * (n - 1),
        m.eps,
    )
    if math.isfinite(m.c_cap):
        b.add_leq(u_idx, p, float(p @ m.u_ref.values) + m.c_cap)
    r_idx = b.add_vars(1)
    ext = np.concatenate([u_idx, r_idx])
    for i in range(a.shape[0]):
        b.add_leq(ext, np.concatenate([a[i], [-1.0]]), f[i])
        b.add_leq(ext, np.concatenate([-a[i], [-1.0]]), -f[i])
    obj = np.zeros(b.num_vars)
    obj[r_idx] = 1.0
    sol = lp.solve_lp(b.build(obj), lp_opts)
    if sol.status != lp.OPTIMAL:
        raise RuntimeError(f"sup-norm debias LP is {sol.status}")
    u = Signal(m.u_ref.grid, np.maximum(sol.x[u_idx], 0.0))
    return DebiasResult(
        u=u,
        objective=float(sol.objective_value),
        gap=0.0,
        iterations=sol.iterations,
        converged=True,
    )


def _clean_diff(u: Signal, floor_rel: float = 1e-9) -> tuple[np.ndarray, float]:
    du = np.diff(u.values)
    floor = floor_rel * max(1.0, float(np.max(np.abs(u.values))))
    du = np.where(np.abs(du) > floor, du, 0.0)
    return du, float(np.sum(np.abs(du)))


def detect_jumps(
    u_n: Signal,
    p_n: Signal | None,
    gamma: float,
    nu: float = 1e-6,
    method: str = "tv_pairing",
    lp_opts: lp.SolverOptions | None = None,
) -> tuple[np.ndarray, IndexSet]:
    """Locate jump slots via a minimal-l1 dual vector field.

    The default method picks the smallest field ``q`` with ``|q| <= 1`` whose
    pairing with the forward differences reproduces the total variation; it is
    insensitive to the cut-off because saturation is forced exactly on jump
    slots.  The alternative ``"decomposition"`` method first resolves the l1
    sign field and then reconstructs ``q`` from the subgradient; it requires
    ``p_n``.  Differences below a small floor relative to the signal scale are
    treated as zero before either LP is formed, which keeps solver pivot noise
    out of the detected set.
    """
    n = u_n.grid.n
    du, tv_clean = _clean_diff(u_n)
    if method == "tv_pairing":
        if tv_clean == 0.0:
            return np.zeros(n - 1), IndexSet((), n - 1)
        b = lp.LpBuilder()
        qp = b.add_vars(n - 1)
        qm = b.add_vars(n - 1)
        for i in range(n - 1):
            b.add_leq([qp[i], qm[i]], [1.0, 1.0], 1.0)
        cols = list(qp) + list(qm)
        b.add_eq(cols, list(du) + list(-du), tv_clean)
        obj = np.ones(b.num_vars)
        sol = lp.solve_lp(b.build(obj), lp_opts)
        if sol.status != lp.OPTIMAL:
            raise ValueError(f"jump-detection LP is {sol.status}: inconsistent input signal")
        q = sol.x[qp] - sol.x[qm]
    elif method == "decomposition":
        if p_n is None:
            raise ValueError("the decomposition method needs the subgradient")
        y = _sign_field(u_n, lp_opts)
        rhs = p_n.values - gamma * y
        dt = difference_matrix(n).T
        b = lp.LpBuilder()
        qp = b.add_vars(n - 1)
        qm = b.add_vars(n - 1)
        for i in range(n - 1):
            b.add_leq([qp[i], qm[i]], [1.0, 1.0], 1.0)
        tol_eq = 1e-8 * (1.0 + float(np.max(np.abs(rhs))))
        for row in range(n):
            nz = dt[row] != 0
            cols = list(qp[nz]) + list(qm[nz])
            coeffs = list(dt[row][nz]) + list(-dt[row][nz])
            b.add_leq(cols, coeffs, rhs[row] + tol_eq)
            b.add_leq(cols, [-c for c in coeffs], -(rhs[row] - tol_eq))
        obj = np.ones(b.num_vars)
        sol = lp.solve_lp(b.build(obj), lp_opts)
        if sol.status != lp.OPTIMAL:
            raise ValueError(
                f"jump-detection LP is {sol.status}: subgradient and signal are inconsistent"
            )
        q = sol.x[qp] - sol.x[qm]
    else:
        raise ValueError(f"unknown jump-detection method {method!r}")
    jumps = IndexSet.from_mask(np.abs(q) > 1.0 - nu)
    return q, jumps


def _sign_field(u: Signal, lp_opts: lp.SolverOptions | None) -> np.ndarray:
    """Minimal-l1 field ``y`` with ``|y| <= 1`` pairing to the l1 norm of ``u``."""
    n = u.grid.n
    b = lp.LpBuilder()
    yp = b.add_vars(n)
    ym = b.add_vars(n)
    for i in range(n):
        b.add_leq([yp[i], ym[i]], [1.0, 1.0], 1.0)
    vals = u.values
    b.add_eq(list(yp) + list(ym), list(vals) + list(-vals), l1_norm(u))
    sol = lp.solve_lp(b.build(np.ones(b.num_vars)), lp_opts)
    if sol.status != lp.OPTIMAL:
        raise ValueError(f"sign-field LP is {sol.status}")
    return sol.x[yp] - sol.x[ym]


@dataclass(frozen=True)
class RegionDecomposition:
    """Maximal constant runs between jump slots; regions partition the domain."""

    jumps: IndexSet
    regions: tuple[tuple[int, int], ...]

    @classmethod
    def from_jumps(cls, jumps: IndexSet, n: int) -> "RegionDecomposition":
        starts = [0] + [i + 1 for i in jumps]
        ends = [i + 1 for i in jumps] + [n]
        regions = tuple((s, e) for s, e in zip(starts, ends) if e > s)
        return cls(jumps=jumps, regions=regions)

    def __len__(self) -> int:
        return len(self.regions)


@dataclass(frozen=True, eq=False)
class ErrorBars:
    """Pointwise bounds for the region means over the model manifold."""

    decomposition: RegionDecomposition
    lower: np.ndarray
    upper: np.ndarray
    ref_mean: np.ndarray
    statuses: tuple[str, ...]
    argmin_points: tuple[Signal, ...]
    argmax_points: tuple[Signal, ...]

    def to_csv(self, path, grid: Grid, u_exact: Signal | None = None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["region_start", "region_end", "lower", "upper", "ref_mean"]
            if u_exact is not None:
                header.append("exact_mean")
            w.writerow(header)
            for k, (s, e) in enumerate(self.decomposition.regions):
                row = [s, e, format(self.lower[k], ".17g"), format(self.upper[k], ".17g"),
                       format(self.ref_mean[k], ".17g")]
                if u_exact is not None:
                    row.append(format(float(np.mean(u_exact.values[s:e])), ".17g"))
                w.writerow(row)


def error_bars(
    m: ModelManifoldSpec,
    regions: RegionDecomposition,
    lp_opts: lp.SolverOptions | None = None,
) -> ErrorBars:
    """Two LP solves per region: extremal region means over the manifold."""
    if check_assumption5(m.op.lower) <= 0:
        raise ValueError(
            "manifold may be unbounded: the lower operator bound has a non-positive column sum"
        )
    mlp = _build_manifold_engine(m, lp_opts)
    n = m.u_ref.grid.n
    lower, upper, statuses = [], [], []
    mins, maxs = [], []
    first = True
    for start, end in regions.regions:
        size = end - start
        c = np.zeros(mlp.num_vars)
        c[mlp.u_idx[start:end]] = 1.0
        sol_min = mlp.engine.solve(c) if first else mlp.engine.resolve(c)
        first = False
        sol_max = mlp.engine.resolve(-c)
        if sol_min.status != lp.OPTIMAL or sol_max.status != lp.OPTIMAL:
            statuses.append(f"{sol_min.status}/{sol_max.status}")
            lower.append(math.nan)
            upper.append(math.nan)
            mins.append(m.u_ref)
            maxs.append(m.u_ref)
            continue
        statuses.append(lp.OPTIMAL)
        lower.append(sol_min.objective_value / size)
        upper.append(-sol_max.objective_value / size)
        mins.append(Signal(m.u_ref.grid, np.maximum(sol_min.x[mlp.u_idx], 0.0)))
        maxs.append(Signal(m.u_ref.grid, np.maximum(sol_max.x[mlp.u_idx], 0.0)))
    ref_mean = np.array(
        [float(np.mean(m.u_ref.values[s:e])) for s, e in regions.regions]
    )
    return ErrorBars(
        decomposition=regions,
        lower=np.array(lower),
        upper=np.array(upper),
        ref_mean=ref_mean,
        statuses=tuple(statuses),
        argmin_points=tuple(mins),
        argmax_points=tuple(maxs),
    )
