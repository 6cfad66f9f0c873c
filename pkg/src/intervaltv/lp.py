"""Self-contained dense linear programming.

``solve_lp`` runs a two-phase tableau simplex and extracts primal values,
dual multipliers and reduced costs from the final tableau.  ``vertex_oracle``
brute-forces small instances by enumerating basic solutions; it is the
independent correctness check for the simplex and for LPs built on top of it.

Conventions
-----------
Problems are stated as  ``min c.x  s.t.  G x <= g,  E x = e``  with ``x >= 0``
except for variables flagged free.  At an optimum with multipliers
``mu >= 0`` (inequalities) and ``nu`` (equalities, any sign):

* stationarity:  ``c + G.T mu + E.T nu = lambda``  with ``lambda >= 0`` the
  multipliers of the sign constraints (the reduced costs),
* dual objective:  ``-(g.mu + e.nu)``  equals ``c.x`` (strong duality),
* complementary slackness:  ``mu_k (g - G x)_k = 0`` and ``lambda_j x_j = 0``.

Equality rows are handled as two opposing inequalities at build time; their
multipliers are recombined by subtraction.  Pricing is Dantzig's rule with an
automatic, permanent switch to Bland's rule after ``5 (rows + cols)``
iterations without objective progress, which guarantees termination.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "ITERATION_LIMIT",
    "SolverOptions",
    "LpProblem",
    "LpSolution",
    "LpBuilder",
    "SimplexEngine",
    "solve_lp",
    "vertex_oracle",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class SolverOptions:
    """Iteration cap and pivot tolerance for the simplex."""

    max_iters: int | None = None
    pivot_tol: float = 1e-9


def _as_matrix(a, rows: int | None, cols: int) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.size == 0:
        m = np.zeros((0, cols))
    if m.ndim != 2 or m.shape[1] != cols:
        raise ValueError(f"expected a matrix with {cols} columns, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got {m.shape[0]}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


@dataclass(frozen=True)
class LpProblem:
    """Inequality-form LP ``min c.x : G x <= g, E x = e`` with optional free variables."""

    c: np.ndarray
    G: np.ndarray
    g: np.ndarray
    E: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    e: np.ndarray = field(default_factory=lambda: np.zeros(0))
    free: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
            raise ValueError("objective must be a finite 1-D vector")
        nv = c.size
        G = _as_matrix(self.G, None, nv)
        g = np.asarray(self.g, dtype=float)
        if g.shape != (G.shape[0],) or not np.all(np.isfinite(g)):
            raise ValueError("inequality right-hand side has wrong shape or non-finite entries")
        E = _as_matrix(self.E, None, nv) if np.asarray(self.E).size else np.zeros((0, nv))
        e = np.asarray(self.e, dtype=float)
        if e.shape != (E.shape[0],) or not np.all(np.isfinite(e)):
            raise ValueError("equality right-hand side has wrong shape or non-finite entries")
        free = np.asarray(self.free, dtype=bool)
        if free.size == 0:
            free = np.zeros(nv, dtype=bool)
        if free.shape != (nv,):
            raise ValueError("free-variable mask has wrong shape")
        for name, val in (("c", c), ("G", G), ("g", g), ("E", E), ("e", e), ("free", free)):
            object.__setattr__(self, name, val)

    @property
    def num_vars(self) -> int:
        return self.c.size

    def to_json(self) -> str:
        return json.dumps(
            {
                "c": self.c.tolist(),
                "G": self.G.tolist(),
                "g": self.g.tolist(),
                "E": self.E.tolist(),
                "e": self.e.tolist(),
                "free": self.free.astype(int).tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "LpProblem":
        d = json.loads(text)
        nv = len(d["c"])
        return cls(
            c=np.array(d["c"], dtype=float),
            G=np.array(d["G"], dtype=float).reshape(-1, nv),
            g=np.array(d["g"], dtype=float),
            E=np.array(d["E"], dtype=float).reshape(-1, nv),
            e=np.array(d["e"], dtype=float),
            free=np.array(d["free"], dtype=bool),
        )


@dataclass(frozen=True)
class LpSolution:
    """Result of an LP solve.

    ``duals`` holds one multiplier per inequality row (>= 0 at an optimum),
    ``duals_eq`` one per equality row, and ``reduced_costs`` the sign-bound
    multipliers ``c + G.T duals + E.T duals_eq``.  The oracle fills only
    status, point and objective.
    """

    status: str
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    duals_eq: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    objective_value: float | None = None
    iterations: int = 0

    def residuals(self, p: LpProblem) -> dict[str, float]:
        """Scaled feasibility / duality / complementarity residuals at this solution."""
        if self.status != OPTIMAL or self.x is None:
            raise ValueError("residuals are only defined for optimal solutions")
        x = self.x
        scale_g = 1.0 + (float(np.max(np.abs(p.g))) if p.g.size else 0.0)
        primal = float(np.max(p.G @ x - p.g)) if p.g.size else 0.0
        primal = max(primal, float(np.max(np.abs(p.E @ x - p.e))) if p.e.size else 0.0)
        primal = max(primal, float(np.max(-x[~p.free])) if np.any(~p.free) else 0.0)
        out = {"primal": primal / scale_g}
        if self.duals is not None:
            mu = self.duals
            nu = self.duals_eq if self.duals_eq is not None else np.zeros(0)
            rc = p.c + (p.G.T @ mu if mu.size else 0.0) + (p.E.T @ nu if nu.size else 0.0)
            dual_feas = max(
                float(np.max(-mu)) if mu.size else 0.0,
                float(np.max(-rc[~p.free])) if np.any(~p.free) else 0.0,
                float(np.max(np.abs(rc[p.free]))) if np.any(p.free) else 0.0,
            )
            comp = abs(float(mu @ (p.g - p.G @ x))) if mu.size else 0.0
            comp = max(comp, abs(float(rc @ x)))
            dual_obj = -(float(p.g @ mu) if mu.size else 0.0) - (float(p.e @ nu) if nu.size else 0.0)
            gap = abs(float(p.c @ x) - dual_obj)
            out["dual"] = dual_feas
            out["compl"] = comp / scale_g
            out["gap"] = gap / (1.0 + abs(float(p.c @ x)))
        return out


class LpBuilder:
    """Incremental construction of an :class:`LpProblem`.

    Rows may be tagged; ``leq_rows(tag)`` / ``eq_rows(tag)`` return the row
    indices later used to pull the matching dual multipliers out of a
    solution.
    """

    def __init__(self) -> None:
        self._nv = 0
        self._free: list[bool] = []
        self._leq: list[tuple[np.ndarray, np.ndarray, float]] = []
        self._eq: list[tuple[np.ndarray, np.ndarray, float]] = []
        self._leq_tags: dict[str, list[int]] = {}
        self._eq_tags: dict[str, list[int]] = {}

    @property
    def num_vars(self) -> int:
        return self._nv

    def add_vars(self, count: int, free: bool = False) -> np.ndarray:
        idx = np.arange(self._nv, self._nv + count)
        self._nv += count
        self._free.extend([free] * count)
        return idx

    def _add(self, store, tags, idx, coeffs, rhs, tag) -> int:
        idx = np.asarray(idx, dtype=int)
        coeffs = np.asarray(coeffs, dtype=float)
        if idx.shape != coeffs.shape:
            raise ValueError("index/coefficient shape mismatch")
        row_id = len(store)
        store.append((idx, coeffs, float(rhs)))
        if tag is not None:
            tags.setdefault(tag, []).append(row_id)
        return row_id

    def add_leq(self, idx, coeffs, rhs: float, tag: str | None = None) -> int:
        return self._add(self._leq, self._leq_tags, idx, coeffs, rhs, tag)

    def add_eq(self, idx, coeffs, rhs: float, tag: str | None = None) -> int:
        return self._add(self._eq, self._eq_tags, idx, coeffs, rhs, tag)

    def add_leq_block(self, matrix, idx, rhs, tag: str | None = None) -> list[int]:
        """Add rows ``matrix @ x[idx] <= rhs`` all at once."""
        matrix = np.asarray(matrix, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        return [self.add_leq(idx, matrix[k], rhs[k], tag) for k in range(matrix.shape[0])]

    def add_eq_block(self, matrix, idx, rhs, tag: str | None = None) -> list[int]:
        matrix = np.asarray(matrix, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        return [self.add_eq(idx, matrix[k], rhs[k], tag) for k in range(matrix.shape[0])]

    def leq_rows(self, tag: str) -> list[int]:
        return list(self._leq_tags.get(tag, []))

    def eq_rows(self, tag: str) -> list[int]:
        return list(self._eq_tags.get(tag, []))

    def pad(self, objective) -> np.ndarray:
        """Zero-extend an objective vector to the current variable count."""
        obj = np.zeros(self._nv)
        objective = np.asarray(objective, dtype=float)
        obj[: objective.size] = objective
        return obj

    def build(self, objective) -> LpProblem:
        obj = self.pad(objective)
        G = np.zeros((len(self._leq), self._nv))
        g = np.zeros(len(self._leq))
        for k, (idx, coeffs, rhs) in enumerate(self._leq):
            G[k, idx] = coeffs
            g[k] = rhs
        E = np.zeros((len(self._eq), self._nv))
        e = np.zeros(len(self._eq))
        for k, (idx, coeffs, rhs) in enumerate(self._eq):
            E[k, idx] = coeffs
            e[k] = rhs
        return LpProblem(c=obj, G=G, g=g, E=E, e=e, free=np.array(self._free, dtype=bool))


class SimplexEngine:
    """Two-phase dense tableau simplex bound to one problem's constraints.

    The engine can be re-priced with a new objective over the same feasible
    set (``resolve``), which re-uses the final basis; iterative schemes that
    change only the objective restart from there at a cost of a few pivots.
    """

    def __init__(self, problem: LpProblem, opts: SolverOptions | None = None) -> None:
        self.problem = problem
        self.opts = opts or SolverOptions()
        self._build_standard()
        self._phase1_done = False
        self._feasible = False

    # standard form: columns = split structural vars | slacks | artificials,
    # every original row becomes <=, equalities become a (<=, >=) pair.
    def _build_standard(self) -> None:
        p = self.problem
        nv = p.num_vars
        self._col_pos = np.zeros(nv, dtype=int)
        self._col_neg = np.full(nv, -1, dtype=int)
        col = 0
        for j in range(nv):
            self._col_pos[j] = col
            col += 1
            if p.free[j]:
                self._col_neg[j] = col
                col += 1
        self._ncols = col
        mi, me = p.G.shape[0], p.E.shape[0]
        m = mi + 2 * me
        A = np.zeros((m, col))
        b = np.zeros(m)

        def fill(row, coeffs, rhs):
            A[row, self._col_pos] = coeffs
            has_neg = self._col_neg >= 0
            A[row, self._col_neg[has_neg]] = -coeffs[has_neg]
            b[row] = rhs

        for i in range(mi):
            fill(i, p.G[i], p.g[i])
        for k in range(me):
            fill(mi + 2 * k, p.E[k], p.e[k])
            fill(mi + 2 * k + 1, -p.E[k], -p.e[k])
        self._A = A
        self._b = b
        self._m = m

    def _std_objective(self, c: np.ndarray) -> np.ndarray:
        out = np.zeros(self._ncols)
        out[self._col_pos] = c
        has_neg = self._col_neg >= 0
        out[self._col_neg[has_neg]] = -c[has_neg]
        return out

    def _phase1(self) -> str:
        m, ncols = self._m, self._ncols
        flip = self._b < 0
        art_rows = np.flatnonzero(flip)
        k = art_rows.size
        # columns: structural | slacks | artificials | rhs
        width = ncols + m + k + 1
        M = np.zeros((m, width))
        M[:, :ncols] = self._A
        M[np.arange(m), ncols + np.arange(m)] = 1.0
        M[:, -1] = self._b
        M[flip] *= -1.0
        for j, r in enumerate(art_rows):
            M[r, ncols + m + j] = 1.0
        basis = ncols + np.arange(m)
        basis[art_rows] = ncols + m + np.arange(k)
        self._M = M
        self._basis = basis
        self._slack0 = ncols
        self._art0 = ncols + m
        self._nart = k
        enterable = np.ones(width - 1, dtype=bool)
        enterable[self._art0 :] = False
        self._enterable = enterable
        if k == 0:
            self._phase1_done = True
            self._feasible = True
            return OPTIMAL
        c1 = np.zeros(width - 1)
        c1[self._art0 :] = 1.0
        status = self._run(c1, allow_unbounded=False)
        if status == ITERATION_LIMIT:
            return status
        self._phase1_done = True
        if -self._rc[-1] > 1e-7 * (1.0 + float(np.max(np.abs(self._b)))):
            return INFEASIBLE
        self._evict_artificials()
        self._feasible = True
        return OPTIMAL

    def _evict_artificials(self) -> None:
        # pivot basic artificials out; rows that cannot release one are
        # redundant (their non-artificial entries are ~0) and stay inert.
        tol = self.opts.pivot_tol
        for r in range(self._m):
            if self._basis[r] >= self._art0:
                row = self._M[r, : self._art0]
                j = int(np.argmax(np.abs(row)))
                if abs(row[j]) > 1e3 * tol:
                    self._pivot(r, j, rc=None)
                else:
                    self._M[r, : self._art0][np.abs(row) <= 1e3 * tol] = 0.0
                    self._M[r, -1] = 0.0

    def _pivot(self, r: int, jc: int, rc: np.ndarray | None) -> None:
        M = self._M
        M[r] /= M[r, jc]
        colvals = M[:, jc].copy()
        colvals[r] = 0.0
        M -= np.outer(colvals, M[r])
        M[:, jc] = 0.0
        M[r, jc] = 1.0
        if rc is not None:
            rc -= rc[jc] * M[r]
            rc[jc] = 0.0
        self._basis[r] = jc

    def _run(self, c_all: np.ndarray, allow_unbounded: bool = True) -> str:
        M, basis = self._M, self._basis
        m = self._m
        tol = self.opts.pivot_tol
        rc = np.concatenate([c_all, [0.0]]) - c_all[basis] @ M
        self._rc = rc
        max_iters = self.opts.max_iters or max(20000, 100 * (m + self._ncols))
        bland_after = 5 * (m + self._ncols)
        no_progress = 0
        bland = False
        it = 0
        enter_mask = self._enterable
        while True:
            if it >= max_iters:
                self._iters = it
                return ITERATION_LIMIT
            red = rc[:-1]
            if bland:
                cand = np.flatnonzero((red < -tol) & enter_mask)
                if cand.size == 0:
                    self._iters = it
                    return OPTIMAL
                jc = int(cand[0])
            else:
                masked = np.where(enter_mask, red, np.inf)
                jc = int(np.argmin(masked))
                if masked[jc] >= -tol:
                    self._iters = it
                    return OPTIMAL
            col = M[:, jc]
            pos = col > tol
            if not np.any(pos):
                self._iters = it
                return UNBOUNDED if allow_unbounded else OPTIMAL
            ratios = np.full(m, np.inf)
            ratios[pos] = M[pos, -1] / col[pos]
            rmin = ratios.min()
            ties = np.flatnonzero(ratios <= rmin + tol * (1.0 + abs(rmin)))
            if bland and ties.size > 1:
                r = int(ties[np.argmin(basis[ties])])
            else:
                r = int(ties[0])
            obj_before = rc[-1]
            self._pivot(r, jc, rc)
            it += 1
            if abs(rc[-1] - obj_before) <= 1e-12 * (1.0 + abs(obj_before)):
                no_progress += 1
                if no_progress > bland_after:
                    bland = True
            else:
                no_progress = 0

    def _extract(self, c_struct: np.ndarray) -> LpSolution:
        p = self.problem
        z = np.zeros(self._M.shape[1] - 1)
        z[self._basis] = self._M[:, -1]
        x = z[self._col_pos].copy()
        has_neg = self._col_neg >= 0
        x[has_neg] -= z[self._col_neg[has_neg]]
        duals_std = self._rc[self._slack0 : self._slack0 + self._m].copy()
        np.maximum(duals_std, 0.0, out=duals_std)
        mi = p.G.shape[0]
        me = p.E.shape[0]
        duals = duals_std[:mi]
        duals_eq = duals_std[mi::2] - duals_std[mi + 1 :: 2] if me else np.zeros(0)
        rc_vars = c_struct + (p.G.T @ duals if mi else 0.0) + (p.E.T @ duals_eq if me else 0.0)
        return LpSolution(
            status=OPTIMAL,
            x=x,
            duals=duals,
            duals_eq=duals_eq,
            reduced_costs=rc_vars,
            objective_value=float(c_struct @ x),
            iterations=self._iters,
        )

    def solve(self, c: np.ndarray | None = None) -> LpSolution:
        """Solve from scratch (phase 1 once, then phase 2 for the objective)."""
        c = self.problem.c if c is None else np.asarray(c, dtype=float)
        if not self._phase1_done:
            status = self._phase1()
            if status != OPTIMAL:
                return LpSolution(status=status, iterations=getattr(self, "_iters", 0))
        if not self._feasible:
            return LpSolution(status=INFEASIBLE, iterations=self._iters)
        return self.resolve(c)

    def resolve(self, c: np.ndarray) -> LpSolution:
        """Re-optimise with a new objective over the unchanged feasible set."""
        if not (self._phase1_done and self._feasible):
            raise ValueError("resolve requires a prior feasible solve")
        c = np.asarray(c, dtype=float)
        if c.shape != (self.problem.num_vars,):
            raise ValueError("objective has wrong length")
        c_all = np.zeros(self._M.shape[1] - 1)
        c_all[: self._ncols] = self._std_objective(c)
        status = self._run(c_all)
        if status != OPTIMAL:
            return LpSolution(status=status, iterations=self._iters)
        return self._extract(c)


def solve_lp(problem: LpProblem, opts: SolverOptions | None = None) -> LpSolution:
    """Two-phase simplex solve; see the module docstring for conventions."""
    return SimplexEngine(problem, opts).solve()


def vertex_oracle(
    problem: LpProblem,
    box: float = 1e7,
    tol: float = 1e-7,
    max_combinations: int = 3_000_000,
) -> LpSolution:
    """Brute-force reference solve by enumeration of basic solutions.

    All candidate vertices are intersections of ``num_vars`` constraints drawn
    from the pool (rows, sign bounds and a large artificial box).  The box
    makes the search region compact; unboundedness is detected by re-running
    with a 100x larger box and checking whether the optimal value drifts.
    Intended for small instances only.
    """
    p = problem
    nv = p.num_vars

    def enumerate_best(box_size: float):
        # sign-constrained variables only need an upper box face; free ones need both
        rows = [p.G, p.E, -p.E]
        rhs = [p.g, p.e, -p.e]
        if np.any(~p.free):
            bound = np.eye(nv)[~p.free]
            rows.append(-bound)
            rhs.append(np.zeros(bound.shape[0]))
        rows.append(np.eye(nv))
        rhs.append(np.full(nv, box_size))
        if np.any(p.free):
            neg_box = -np.eye(nv)[p.free]
            rows.append(neg_box)
            rhs.append(np.full(neg_box.shape[0], box_size))
        pool = np.vstack(rows)
        prhs = np.concatenate(rhs)
        npool = pool.shape[0]
        total = math.comb(npool, nv)
        if total > max_combinations:
            raise ValueError(
                f"instance too large for vertex oracle: C({npool},{nv}) = {total} subsets"
            )
        feas_scale = np.maximum(1.0, np.abs(prhs))
        best_obj = np.inf
        best_x = None
        found_feasible = False
        combos = itertools.combinations(range(npool), nv)
        chunk = 100000
        while True:
            batch = list(itertools.islice(combos, chunk))
            if not batch:
                break
            S = np.array(batch)
            mats = pool[S]
            rr = prhs[S]
            dets = np.abs(np.linalg.det(mats))
            ok = dets > 1e-12
            if not np.any(ok):
                continue
            xs = np.linalg.solve(mats[ok], rr[ok][..., None])[..., 0]
            resid = np.abs(np.einsum("kij,kj->ki", mats[ok], xs) - rr[ok]).max(axis=1)
            xs = xs[resid <= 1e-8 * (1.0 + np.abs(rr[ok]).max(axis=1))]
            if xs.size == 0:
                continue
            viol = (pool @ xs.T).T - prhs
            # rounding in the batched solves grows with the candidate magnitude
            rounding = 1e-11 * np.maximum(1.0, np.abs(xs).max(axis=1))
            feas = np.all(viol <= tol * feas_scale + rounding[:, None], axis=1)
            if not np.any(feas):
                continue
            found_feasible = True
            objs = xs[feas] @ p.c
            j = int(np.argmin(objs))
            if objs[j] < best_obj:
                best_obj = float(objs[j])
                best_x = xs[feas][j]
        return found_feasible, best_obj, best_x

    feasible, obj1, x1 = enumerate_best(box)
    if not feasible:
        return LpSolution(status=INFEASIBLE)
    on_box = bool(np.any(np.abs(x1) >= box * (1 - 1e-9)))
    if not on_box:
        return LpSolution(status=OPTIMAL, x=x1, objective_value=obj1)
    _, obj2, x2 = enumerate_best(100.0 * box)
    if obj2 < obj1 - 1e-6 * (1.0 + abs(obj1)):
        return LpSolution(status=UNBOUNDED)
    return LpSolution(status=OPTIMAL, x=x1, objective_value=obj1)
