"""One-homogeneous regularisers: total variation plus an optional l1 term.

Membership in the subdifferential at zero is decided constructively: ``p``
belongs to it iff it decomposes as ``D.T s + gamma y`` with ``|s| <= 1`` and
``|y| <= 1``, where ``D`` is the forward-difference matrix.  The
decomposition is exact in one dimension, and the deciding LP returns a
witness.  Tolerances are relative, scaled by ``1 + magnitude``, because LP
solutions carry pivot noise.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import lp
from .signals import Signal, l1_norm, tv

__all__ = [
    "Regularizer",
    "SubgradientDecomposition",
    "EpigraphTerms",
    "difference_matrix",
    "value",
    "epigraph_encode",
    "in_subdiff_zero",
    "in_subdiff_at",
    "bregman",
    "symm_bregman",
]

_BOX_SLACK = 1e-6


@dataclass(frozen=True)
class Regularizer:
    """``tv(u) + gamma * l1(u)``; ``gamma = 0`` is plain total variation."""

    gamma: float = 0.0

    def __post_init__(self) -> None:
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")


@dataclass(frozen=True, eq=False)
class SubgradientDecomposition:
    """Dual witness: a vector field for the tv part and a sign field for the l1 part."""

    s: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if s.size and np.max(np.abs(s)) > 1.0 + _BOX_SLACK:
            raise ValueError("tv witness exceeds the unit box")
        if y.size and np.max(np.abs(y)) > 1.0 + _BOX_SLACK:
            raise ValueError("l1 witness exceeds the unit box")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "y", y)

    def to_json(self) -> str:
        return json.dumps({"s": self.s.tolist(), "y": self.y.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "SubgradientDecomposition":
        d = json.loads(text)
        return cls(np.array(d["s"], dtype=float), np.array(d["y"], dtype=float))


@dataclass(frozen=True)
class EpigraphTerms:
    """Objective coefficients produced by :func:`epigraph_encode` plus the slot variables."""

    objective: np.ndarray
    t_idx: np.ndarray


def difference_matrix(n: int) -> np.ndarray:
    """Forward-difference matrix mapping ``n`` samples to ``n - 1`` slot differences."""
    d = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    d[idx, idx] = -1.0
    d[idx, idx + 1] = 1.0
    return d


def value(j: Regularizer, u: Signal) -> float:
    return tv(u) + j.gamma * l1_norm(u)


def epigraph_encode(j: Regularizer, u_idx: np.ndarray, builder: lp.LpBuilder) -> EpigraphTerms:
    """Linearise the regulariser over non-negative ``u`` variables.

    Adds slot variables ``t_i >= +-(u_{i+1} - u_i)`` and returns the objective
    ``sum t + gamma * sum u``, whose LP-optimal value equals ``value(j, u)``
    because the enclosing problem keeps ``u >= 0``.
    """
    u_idx = np.asarray(u_idx, dtype=int)
    n = u_idx.size
    t_idx = builder.add_vars(n - 1)
    for i in range(n - 1):
        cols = [u_idx[i], u_idx[i + 1], t_idx[i]]
        builder.add_leq(cols, [-1.0, 1.0, -1.0], 0.0, tag="tv_pos")
        builder.add_leq(cols, [1.0, -1.0, -1.0], 0.0, tag="tv_neg")
    obj = np.zeros(builder.num_vars)
    obj[u_idx] = j.gamma
    obj[t_idx] = 1.0
    return EpigraphTerms(objective=obj, t_idx=t_idx)


def _decomposition_gap(j: Regularizer, p: Signal) -> tuple[float, SubgradientDecomposition] | None:
    """Smallest sup-norm mismatch of ``D.T s + gamma y`` against ``p``, with the witness.

    Box variables are shifted to [0, 2] so the LP needs no free-variable
    splitting.  Returns None if the auxiliary LP fails (it should not: the
    feasible set is non-empty and the objective non-negative).
    """
    n = p.grid.n
    gam = j.gamma
    dt = difference_matrix(n).T
    b = lp.LpBuilder()
    sig = b.add_vars(n - 1)
    ups = b.add_vars(n) if gam > 0 else None
    err = b.add_vars(1)
    for i in sig:
        b.add_leq([i], [1.0], 2.0)
    if ups is not None:
        for i in ups:
            b.add_leq([i], [1.0], 2.0)
    shift = dt @ np.ones(n - 1) + (gam if ups is not None else 0.0)
    rhs = p.values + shift
    for row in range(n):
        cols = list(sig[dt[row] != 0]) + ([ups[row]] if ups is not None else []) + [err[0]]
        coeffs = list(dt[row][dt[row] != 0]) + ([gam] if ups is not None else []) + [-1.0]
        b.add_leq(cols, coeffs, rhs[row])
        b.add_leq(cols, [-c for c in coeffs[:-1]] + [-1.0], -rhs[row])
    obj = np.zeros(b.num_vars)
    obj[err] = 1.0
    sol = lp.solve_lp(b.build(obj))
    if sol.status != lp.OPTIMAL:
        return None
    s = sol.x[sig] - 1.0
    y = (sol.x[ups] - 1.0) if ups is not None else np.zeros(n)
    np.clip(s, -1.0, 1.0, out=s)
    np.clip(y, -1.0, 1.0, out=y)
    return float(sol.objective_value), SubgradientDecomposition(s=s, y=y)


def in_subdiff_zero(
    j: Regularizer, p: Signal, tol: float = 1e-7
) -> tuple[bool, SubgradientDecomposition | None]:
    """Decide membership of ``p`` in the subdifferential at zero, with witness."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    out = _decomposition_gap(j, p)
    if out is None:
        return False, None
    gap, witness = out
    if gap <= tol * (1.0 + float(np.max(np.abs(p.values)))):
        return True, witness
    return False, None


def in_subdiff_at(j: Regularizer, p: Signal, u: Signal, tol: float = 1e-7) -> bool:
    """Membership of ``p`` in the subdifferential at ``u``: membership at zero
    plus the pairing equality ``value(j, u) == <p, u>``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    ok, _ = in_subdiff_zero(j, p, tol)
    if not ok:
        return False
    val = value(j, u)
    return abs(val - float(p.values @ u.values)) <= tol * (1.0 + val)


def check_witness(
    j: Regularizer, p: Signal, witness: SubgradientDecomposition, tol: float = 1e-7
) -> bool:
    """Cheap membership check when a decomposition is already at hand."""
    n = p.grid.n
    recon = difference_matrix(n).T @ witness.s + j.gamma * witness.y
    return float(np.max(np.abs(recon - p.values))) <= tol * (1.0 + float(np.max(np.abs(p.values))))


def bregman(j: Regularizer, p: Signal, v: Signal) -> float:
    """Generalised Bregman distance ``value(j, v) - <p, v>`` for a subgradient ``p`` at zero."""
    return value(j, v) - float(p.values @ v.values)


def symm_bregman(p_a: Signal, p_b: Signal, u_a: Signal, u_b: Signal) -> float:
    """Symmetric Bregman distance ``<p_a - p_b, u_a - u_b>``."""
    return float((p_a.values - p_b.values) @ (u_a.values - u_b.values))
