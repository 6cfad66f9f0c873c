"""Experiment configuration, instance synthesis, and the deblurring protocol.

A configuration describes a piecewise-constant ground truth on a physical
domain, the Gaussian blur width, the noise fractions, and the solver
parameters.  Synthesis turns it into one seeded instance: exact operator and
data, their noisy versions, and the interval brackets.  The stage helpers run
the individual pipeline steps on an instance; the command-line layer and the
test suite compose them.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import lp
from .analysis import BoundsSchedule
from .baselines import MorozovConfig, MorozovResult, morozov, naive_solve
from .debias import (
    DebiasOptions,
    DebiasResult,
    ErrorBars,
    ModelManifoldSpec,
    RegionDecomposition,
    debias,
    detect_jumps,
    error_bars,
    manifold_from_solve,
)
from .operators import (
    DenseOperator,
    IntervalData,
    IntervalOperator,
    apply,
    data_bounds,
    gaussian_convolution,
    interval_from_noisy,
    perturb_operator,
)
from .regularizers import Regularizer
from .signals import Grid, Signal
from .solver import PrimalSolveReport, solve_primal

__all__ = [
    "ScheduleConfig",
    "ExperimentConfig",
    "Instance",
    "synthesize",
    "piecewise_constant",
    "run_interval_solve",
    "run_naive_solve",
    "run_debias",
    "run_jump_regions",
    "run_error_bars",
    "run_morozov",
]


@dataclass(frozen=True)
class ScheduleConfig:
    eps0: float = 0.25
    decay: float = 0.5
    c0: float = 1.5
    d0: float = 0.5
    steps: int = 8

    def to_schedule(self) -> BoundsSchedule:
        return BoundsSchedule(
            eps0=self.eps0, decay=self.decay, c0=self.c0, d0=self.d0, steps=self.steps
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Instance family parameters; defaults reproduce the reference protocol."""

    n: int = 128
    length: float = 11.0
    sigma: float = 0.5
    breakpoints: tuple[float, ...] = (4.2625, 5.6375)
    levels: tuple[float, ...] = (3.0, 14.0, 3.0)
    data_noise: float = 0.025
    data_noise_model: str = "relative"
    op_noise: float = 0.05
    gamma: float = 1e-4
    eps_manifold: float = 1e-6
    nu: float = 1e-6
    c_factor: float = 1.01
    c_cap: float = 10.0
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    seed: int = 0

    @property
    def h(self) -> float:
        return self.length / self.n

    def validate(self) -> list[str]:
        errs = []
        if self.n < 8:
            errs.append(f"n: need at least 8 samples, got {self.n}")
        if not self.length > 0:
            errs.append(f"length: must be positive, got {self.length}")
        if not self.sigma > 0:
            errs.append(f"sigma: must be positive, got {self.sigma}")
        for name in ("data_noise", "op_noise"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                errs.append(f"{name}: must lie in [0, 1), got {v}")
        if self.data_noise_model not in ("relative", "absolute"):
            errs.append(
                f"data_noise_model: must be 'relative' or 'absolute', got {self.data_noise_model!r}"
            )
        if self.gamma < 0:
            errs.append(f"gamma: must be non-negative, got {self.gamma}")
        if not self.eps_manifold > 0:
            errs.append(f"eps_manifold: must be positive, got {self.eps_manifold}")
        if not 0 < self.nu < 1:
            errs.append(f"nu: must lie in (0, 1), got {self.nu}")
        if not self.c_factor > 1:
            errs.append(f"c_factor: must exceed 1, got {self.c_factor}")
        if len(self.levels) != len(self.breakpoints) + 1:
            errs.append(
                f"levels: expected {len(self.breakpoints) + 1} values for "
                f"{len(self.breakpoints)} breakpoints, got {len(self.levels)}"
            )
        if any(b <= 0 or b >= self.length for b in self.breakpoints):
            errs.append("breakpoints: must lie strictly inside (0, length)")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            errs.append("breakpoints: must be strictly increasing")
        if any(lv < 0 for lv in self.levels):
            errs.append("levels: must be non-negative")
        try:
            self.schedule.to_schedule()
        except ValueError as exc:
            errs.append(f"schedule: {exc}")
        return errs

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        d = json.loads(text)
        if "schedule" in d:
            d["schedule"] = ScheduleConfig(**d["schedule"])
        for key in ("breakpoints", "levels"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:12]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)


def piecewise_constant(grid: Grid, breakpoints, levels) -> Signal:
    """Step function with the given levels between physical breakpoints."""
    x = grid.x
    u = np.full(grid.n, float(levels[0]))
    for bp, lv in zip(breakpoints, levels[1:]):
        u[x >= bp] = float(lv)
    return Signal(grid, u)


@dataclass(frozen=True, eq=False)
class Instance:
    """One synthesised problem: exact quantities, noisy versions, brackets."""

    config: ExperimentConfig
    grid: Grid
    u_exact: Signal
    a_exact: DenseOperator
    f_clean: Signal
    f_noisy: Signal
    delta: float
    a_noisy: DenseOperator
    d_op: float
    data: IntervalData
    op: IntervalOperator

    @property
    def regularizer(self) -> Regularizer:
        return Regularizer(self.config.gamma)


def synthesize(config: ExperimentConfig, op_noise: float | None = None) -> Instance:
    """Build the seeded instance; noise draws are deterministic per seed.

    ``op_noise`` overrides the configured operator-noise fraction while
    re-using the same perturbation draw, which makes instances at different
    noise levels nested.
    """
    errs = config.validate()
    if errs:
        raise ValueError("invalid config: " + "; ".join(errs))
    level = config.op_noise if op_noise is None else op_noise
    grid = Grid(config.n, config.h)
    u_exact = piecewise_constant(grid, config.breakpoints, config.levels)
    a_exact = gaussian_convolution(grid, config.sigma)
    f_clean = apply(a_exact, u_exact)
    rng = np.random.default_rng([config.seed, 101])
    delta = config.data_noise * float(np.max(np.abs(f_clean.values)))
    if config.data_noise_model == "relative":
        # multiplicative noise: each sample is off by at most the fraction of
        # its own magnitude, and the bounds reconstructed from the noisy data
        # stay sound:  |f - f_noisy| <= frac |f| <= frac |f_noisy| / (1 - frac)
        frac = config.data_noise
        noise = rng.uniform(-frac, frac, grid.n) * np.abs(f_clean.values)
        f_noisy = Signal(grid, f_clean.values + noise)
        width = frac / (1.0 - frac) * np.abs(f_noisy.values)
        data = IntervalData(
            lower=Signal(grid, f_noisy.values - width),
            upper=Signal(grid, f_noisy.values + width),
        )
    else:
        f_noisy = Signal(grid, f_clean.values + rng.uniform(-delta, delta, grid.n))
        data = data_bounds(f_noisy, delta)
    a_noisy = (
        perturb_operator(a_exact, level, rng_seed=config.seed * 7919 + 211)
        if level > 0
        else a_exact
    )
    d_op = level * a_exact.max_abs_entry()
    op = interval_from_noisy(a_noisy, d_op)
    return Instance(
        config=config,
        grid=grid,
        u_exact=u_exact,
        a_exact=a_exact,
        f_clean=f_clean,
        f_noisy=f_noisy,
        delta=delta,
        a_noisy=a_noisy,
        d_op=d_op,
        data=data,
        op=op,
    )


def run_interval_solve(inst: Instance, opts: lp.SolverOptions | None = None) -> PrimalSolveReport:
    return solve_primal(inst.regularizer, inst.op, inst.data, opts)


def run_naive_solve(inst: Instance, opts: lp.SolverOptions | None = None) -> PrimalSolveReport:
    return naive_solve(inst.regularizer, inst.a_noisy, inst.data, opts)


def run_debias(
    inst: Instance,
    report: PrimalSolveReport,
    opts: DebiasOptions | None = None,
) -> tuple[ModelManifoldSpec, DebiasResult]:
    """Debias against the noisy operator and data (the deblurring protocol).

    The interval midpoint operator inherits a one-sided bias from the lower
    bound's clipping at zero, which skews the fitted scale; the noisy
    operator is the unbiased discrepancy anchor for this noise model.
    """
    manifold = manifold_from_solve(report, inst.config.eps_manifold, inst.config.c_cap)
    result = debias(manifold, a_mid=inst.a_noisy, f_mid=inst.f_noisy, opts=opts)
    return manifold, result


def run_jump_regions(
    inst: Instance, report: PrimalSolveReport
) -> tuple[np.ndarray, RegionDecomposition]:
    q, jumps = detect_jumps(
        report.u, report.certificate.p, inst.config.gamma, nu=inst.config.nu
    )
    return q, RegionDecomposition.from_jumps(jumps, inst.grid.n)


def run_error_bars(
    manifold: ModelManifoldSpec, regions: RegionDecomposition
) -> ErrorBars:
    return error_bars(manifold, regions)


def run_morozov(inst: Instance, modified: bool = True) -> MorozovResult:
    cfg = MorozovConfig(
        c_factor=inst.config.c_factor,
        delta=inst.delta,
        h_op=inst.d_op,
    )
    return morozov(inst.regularizer, inst.a_noisy, inst.f_noisy, cfg, modified=modified)
