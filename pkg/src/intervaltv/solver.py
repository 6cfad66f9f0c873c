"""Interval-constrained primal solves and dual certificates.

The primal problem minimises the regulariser over non-negative signals whose
image under the operator bracket stays inside the data bracket:

    min value(j, u)   s.t.   u >= 0,  A_l u <= f_u,  A_u u >= f_l.

It is solved exactly as an LP through the epigraph encoding, so the dual
certificate comes out of the simplex tableau instead of a noisy first-order
scheme.  Sign convention, fixed here and used everywhere: ``mu2`` multiplies
the constraint ``-A_u u <= -f_l``, so the induced subgradient is

    p = lambda - A_l.T mu1 + A_u.T mu2,

with ``lambda`` the multipliers of ``u >= 0`` (the reduced costs of the ``u``
columns).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import lp
from .operators import DenseOperator, IntervalData, IntervalOperator
from .regularizers import (
    Regularizer,
    SubgradientDecomposition,
    difference_matrix,
    epigraph_encode,
    value,
)
from .signals import Grid, Signal

__all__ = [
    "Certificate",
    "PrimalSolveReport",
    "PrimalEncoding",
    "MinNormCertificate",
    "L1BoundReport",
    "build_primal_problem",
    "solve_primal",
    "min_norm_certificate",
    "feasible_l1_bound",
]

_NONNEG_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class Certificate:
    """Dual solution and the subgradient it induces at the primal optimum."""

    lam: Signal
    mu1: Signal
    mu2: Signal
    p: Signal
    witness: SubgradientDecomposition | None = None

    def __post_init__(self) -> None:
        for name, sig in (("lambda", self.lam), ("mu1", self.mu1), ("mu2", self.mu2)):
            if float(np.min(sig.values)) < -_NONNEG_SLACK:
                raise ValueError(f"certificate component {name} has negative entries")

    def mu_l1(self) -> float:
        return float(np.sum(self.mu1.values) + np.sum(self.mu2.values))

    def to_dict(self) -> dict:
        d = {
            "lambda": self.lam.values.tolist(),
            "mu1": self.mu1.values.tolist(),
            "mu2": self.mu2.values.tolist(),
            "p": self.p.values.tolist(),
        }
        if self.witness is not None:
            d["witness_s"] = self.witness.s.tolist()
            d["witness_y"] = self.witness.y.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict, domain: Grid, data_grid: Grid) -> "Certificate":
        witness = None
        if "witness_s" in d:
            witness = SubgradientDecomposition(
                np.array(d["witness_s"], dtype=float), np.array(d["witness_y"], dtype=float)
            )
        return cls(
            lam=Signal(domain, np.array(d["lambda"], dtype=float)),
            mu1=Signal(data_grid, np.array(d["mu1"], dtype=float)),
            mu2=Signal(data_grid, np.array(d["mu2"], dtype=float)),
            p=Signal(domain, np.array(d["p"], dtype=float)),
            witness=witness,
        )


@dataclass(frozen=True, eq=False)
class PrimalSolveReport:
    """Solution, certificate and the numerical health of one primal solve.

    Carries the problem context (regulariser weight and interval bounds) so
    downstream consumers such as the manifold builder need only the report.
    """

    status: str
    u: Signal | None = None
    certificate: Certificate | None = None
    objective: float | None = None
    duality_gap: float | None = None
    compl_data: float | None = None
    compl_positivity: float | None = None
    feasibility: float | None = None
    pairing_gap: float | None = None
    lp_iterations: int = 0
    gamma: float | None = None
    op: IntervalOperator | None = None
    data: IntervalData | None = None

    def with_context(self, op: IntervalOperator, data: IntervalData) -> "PrimalSolveReport":
        """Re-attach interval bounds (after JSON round trips, which drop them)."""
        d = dict(self.__dict__)
        d["op"] = op
        d["data"] = data
        return PrimalSolveReport(**d)

    def ok(self, tol: float = 1e-7) -> bool:
        """All residuals within the declared tolerance (scaled where relative)."""
        if self.status != lp.OPTIMAL:
            return False
        scale = 1.0 + abs(self.objective or 0.0)
        return (
            self.duality_gap <= tol * scale
            and self.compl_data <= tol * scale
            and self.compl_positivity <= tol * scale
            and self.feasibility <= tol
            and self.pairing_gap <= tol * scale
        )

    def to_json(self) -> str:
        """Serialise everything except the interval bounds, which live in instance files."""
        d = {"status": self.status, "lp_iterations": self.lp_iterations}
        if self.u is not None:
            d.update(
                u=self.u.values.tolist(),
                h=self.u.grid.h,
                objective=self.objective,
                duality_gap=self.duality_gap,
                compl_data=self.compl_data,
                compl_positivity=self.compl_positivity,
                feasibility=self.feasibility,
                pairing_gap=self.pairing_gap,
                gamma=self.gamma,
                certificate=self.certificate.to_dict(),
                m=self.certificate.mu1.grid.n,
            )
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "PrimalSolveReport":
        d = json.loads(text)
        if "u" not in d:
            return cls(status=d["status"], lp_iterations=d.get("lp_iterations", 0))
        domain = Grid(len(d["u"]), d["h"])
        data_grid = Grid(d["m"], d["h"])
        return cls(
            status=d["status"],
            u=Signal(domain, np.array(d["u"], dtype=float)),
            certificate=Certificate.from_dict(d["certificate"], domain, data_grid),
            objective=d["objective"],
            duality_gap=d["duality_gap"],
            compl_data=d["compl_data"],
            compl_positivity=d["compl_positivity"],
            feasibility=d["feasibility"],
            pairing_gap=d["pairing_gap"],
            gamma=d.get("gamma"),
            lp_iterations=d.get("lp_iterations", 0),
        )


@dataclass(frozen=True, eq=False)
class PrimalEncoding:
    """LP form of the primal problem with the index bookkeeping for extraction."""

    problem: lp.LpProblem
    u_idx: np.ndarray
    t_idx: np.ndarray
    rows_upper: list[int]
    rows_lower: list[int]
    rows_tv_pos: list[int]
    rows_tv_neg: list[int]


def build_primal_problem(
    j: Regularizer, op: IntervalOperator, data: IntervalData
) -> PrimalEncoding:
    if op.rows != data.grid.n:
        raise ValueError(f"operator has {op.rows} rows but the data has {data.grid.n} samples")
    n = op.cols
    b = lp.LpBuilder()
    u_idx = b.add_vars(n)
    terms = epigraph_encode(j, u_idx, b)
    rows_upper = b.add_leq_block(op.lower.entries, u_idx, data.upper.values, tag="data_upper")
    rows_lower = b.add_leq_block(-op.upper.entries, u_idx, -data.lower.values, tag="data_lower")
    problem = b.build(terms.objective)
    return PrimalEncoding(
        problem=problem,
        u_idx=u_idx,
        t_idx=terms.t_idx,
        rows_upper=rows_upper,
        rows_lower=rows_lower,
        rows_tv_pos=b.leq_rows("tv_pos"),
        rows_tv_neg=b.leq_rows("tv_neg"),
    )


def solve_primal(
    j: Regularizer,
    op: IntervalOperator,
    data: IntervalData,
    opts: lp.SolverOptions | None = None,
) -> PrimalSolveReport:
    """Solve the interval-constrained primal problem and extract its certificate."""
    enc = build_primal_problem(j, op, data)
    sol = lp.solve_lp(enc.problem, opts)
    if sol.status != lp.OPTIMAL:
        return PrimalSolveReport(status=sol.status, lp_iterations=sol.iterations)
    n = op.cols
    domain = Grid(n, data.grid.h)
    u = Signal(domain, np.maximum(sol.x[enc.u_idx], 0.0))
    mu1 = sol.duals[enc.rows_upper]
    mu2 = sol.duals[enc.rows_lower]
    lam = np.maximum(sol.reduced_costs[enc.u_idx], 0.0)
    p_vec = lam - op.lower.entries.T @ mu1 + op.upper.entries.T @ mu2
    s_plus = sol.duals[enc.rows_tv_pos]
    s_minus = sol.duals[enc.rows_tv_neg]
    s = np.clip(s_plus - s_minus, -1.0, 1.0)
    y = np.ones(n) if j.gamma > 0 else np.zeros(n)
    cert = Certificate(
        lam=Signal(domain, lam),
        mu1=Signal(data.grid, mu1),
        mu2=Signal(data.grid, mu2),
        p=Signal(domain, p_vec),
        witness=SubgradientDecomposition(s=s, y=y),
    )
    obj = value(j, u)
    dual_obj = -float(data.upper.values @ mu1) + float(data.lower.values @ mu2)
    res_upper = op.lower.entries @ u.values - data.upper.values
    res_lower = data.lower.values - op.upper.entries @ u.values
    feas_scale = 1.0 + max(
        float(np.max(np.abs(data.upper.values))), float(np.max(np.abs(data.lower.values)))
    )
    feasibility = max(float(np.max(res_upper)), float(np.max(res_lower)), 0.0) / feas_scale
    compl_data = abs(float(mu1 @ res_upper) + float(mu2 @ res_lower))
    compl_pos = abs(float(lam @ u.values))
    return PrimalSolveReport(
        status=lp.OPTIMAL,
        u=u,
        certificate=cert,
        objective=obj,
        duality_gap=abs(obj - dual_obj),
        compl_data=compl_data,
        compl_positivity=compl_pos,
        feasibility=feasibility,
        pairing_gap=abs(obj - float(p_vec @ u.values)),
        lp_iterations=sol.iterations,
        gamma=j.gamma,
        op=op,
        data=data,
    )


@dataclass(frozen=True, eq=False)
class MinNormCertificate:
    """Solution of the minimum-norm dual feasibility problem, or its failure."""

    status: str
    lam: Signal | None = None
    mu1: Signal | None = None
    mu2: Signal | None = None
    p: Signal | None = None
    mu_l1: float | None = None


def min_norm_certificate(
    j: Regularizer,
    a_exact: DenseOperator,
    u_ref: Signal,
    opts: lp.SolverOptions | None = None,
) -> MinNormCertificate:
    """Smallest-l1 multiplier pair whose induced ``p`` is a subgradient at ``u_ref``.

    Infeasibility is a meaningful outcome: it reports that the source
    condition could not be certified numerically for this operator/signal.
    """
    if float(np.min(u_ref.values)) < -1e-12:
        raise ValueError("reference signal must be non-negative")
    n = u_ref.grid.n
    m = a_exact.rows
    if a_exact.cols != n:
        raise ValueError("operator and reference signal dimensions do not match")
    gam = j.gamma
    dt = difference_matrix(n).T
    b = lp.LpBuilder()
    lam_idx = b.add_vars(n)
    mu1_idx = b.add_vars(m)
    mu2_idx = b.add_vars(m)
    sig_idx = b.add_vars(n - 1)
    ups_idx = b.add_vars(n) if gam > 0 else None
    for i in sig_idx:
        b.add_leq([i], [1.0], 2.0)
    if ups_idx is not None:
        for i in ups_idx:
            b.add_leq([i], [1.0], 2.0)
    # p = lambda - A.T mu1 + A.T mu2 must decompose as D.T s + gam y with the
    # shifted box variables s = sigma - 1, y = upsilon - 1.
    shift = dt @ np.ones(n - 1) + (gam if ups_idx is not None else 0.0)
    at = a_exact.entries.T
    for row in range(n):
        cols = [lam_idx[row]]
        coeffs = [1.0]
        cols += list(mu1_idx) + list(mu2_idx)
        coeffs += list(-at[row]) + list(at[row])
        nz = dt[row] != 0
        cols += list(sig_idx[nz])
        coeffs += list(-dt[row][nz])
        if ups_idx is not None:
            cols.append(ups_idx[row])
            coeffs.append(-gam)
        b.add_eq(cols, coeffs, -shift[row])
    au = a_exact.entries @ u_ref.values
    cols = list(lam_idx) + list(mu1_idx) + list(mu2_idx)
    coeffs = list(u_ref.values) + list(-au) + list(au)
    b.add_eq(cols, coeffs, value(j, u_ref))
    obj = np.zeros(b.num_vars)
    obj[mu1_idx] = 1.0
    obj[mu2_idx] = 1.0
    sol = lp.solve_lp(b.build(obj), opts)
    if sol.status != lp.OPTIMAL:
        return MinNormCertificate(status=sol.status)
    domain = u_ref.grid
    data_grid = Grid(m, u_ref.grid.h)
    lam = np.maximum(sol.x[lam_idx], 0.0)
    mu1 = np.maximum(sol.x[mu1_idx], 0.0)
    mu2 = np.maximum(sol.x[mu2_idx], 0.0)
    p = lam - a_exact.entries.T @ mu1 + a_exact.entries.T @ mu2
    return MinNormCertificate(
        status=lp.OPTIMAL,
        lam=Signal(domain, lam),
        mu1=Signal(data_grid, mu1),
        mu2=Signal(data_grid, mu2),
        p=Signal(domain, p),
        mu_l1=float(np.sum(mu1) + np.sum(mu2)),
    )


@dataclass(frozen=True)
class L1BoundReport:
    """Largest l1 mass of a feasible signal, or the flags that it has none / is unbounded."""

    status: str
    bound: float | None = None

    @property
    def unbounded(self) -> bool:
        return self.status == lp.UNBOUNDED


def feasible_l1_bound(
    op: IntervalOperator, data: IntervalData, opts: lp.SolverOptions | None = None
) -> L1BoundReport:
    """Maximise ``sum(u)`` over the feasible set of the primal problem."""
    n = op.cols
    b = lp.LpBuilder()
    u_idx = b.add_vars(n)
    b.add_leq_block(op.lower.entries, u_idx, data.upper.values, tag="data_upper")
    b.add_leq_block(-op.upper.entries, u_idx, -data.lower.values, tag="data_lower")
    obj = np.zeros(b.num_vars)
    obj[u_idx] = -1.0
    sol = lp.solve_lp(b.build(obj), opts)
    if sol.status == lp.OPTIMAL:
        return L1BoundReport(status=sol.status, bound=-sol.objective_value)
    if sol.status == lp.UNBOUNDED:
        return L1BoundReport(status=sol.status, bound=math.inf)
    return L1BoundReport(status=sol.status)
