import numpy as np
import pytest

from intervaltv import lp
from intervaltv.analysis import BoundsSchedule, generate_bounds
from intervaltv.operators import (
    DenseOperator,
    IntervalData,
    IntervalOperator,
    check_assumption5,
    data_bounds,
    gaussian_convolution,
    interval_from_noisy,
    perturb_operator,
)
from intervaltv.regularizers import Regularizer, in_subdiff_at, in_subdiff_zero, value
from intervaltv.signals import Grid, Signal, l1_norm, linf_norm
from intervaltv.solver import (
    Certificate,
    PrimalSolveReport,
    build_primal_problem,
    feasible_l1_bound,
    min_norm_certificate,
    solve_primal,
)

sig = Signal.from_values


def denoising(lower, upper):
    n = len(lower)
    eye = DenseOperator(np.eye(n))
    return IntervalOperator(eye, eye), IntervalData(sig(lower), sig(upper))


class TestSolvePrimalDenoising:
    def test_zero_is_feasible_and_minimal(self):
        op, data = denoising([-1.0, -1.0], [1.0, 1.0])
        rep = solve_primal(Regularizer(0.7), op, data)
        assert rep.status == lp.OPTIMAL
        np.testing.assert_allclose(rep.u.values, 0.0, atol=1e-10)
        assert rep.objective == pytest.approx(0.0, abs=1e-10)

    def test_band_above_zero(self):
        op, data = denoising([1.0, 1.0], [2.0, 2.0])
        rep = solve_primal(Regularizer(0.5), op, data)
        np.testing.assert_allclose(rep.u.values, 1.0, atol=1e-9)
        assert rep.objective == pytest.approx(1.0, abs=1e-9)
        assert rep.ok(1e-7)

    def test_infeasible_band(self):
        eye = DenseOperator(np.eye(2))
        op = IntervalOperator(eye, eye)
        # upper image bound below the lower data bound makes the set empty
        data = IntervalData(sig([1.0, 1.0]), sig([2.0, 2.0]))
        op_bad = IntervalOperator(DenseOperator(np.zeros((2, 2))), DenseOperator(np.zeros((2, 2))))
        rep = solve_primal(Regularizer(0.0), op_bad, data)
        assert rep.status == lp.INFEASIBLE

    def test_certificate_contract(self):
        op, data = denoising([1.0, 0.5, 1.5], [1.2, 0.8, 1.8])
        j = Regularizer(0.25)
        rep = solve_primal(j, op, data)
        cert = rep.certificate
        assert float(np.min(cert.lam.values)) >= -1e-9
        assert float(np.min(cert.mu1.values)) >= -1e-9
        assert float(np.min(cert.mu2.values)) >= -1e-9
        ok, _ = in_subdiff_zero(j, cert.p, 1e-7)
        assert ok
        assert in_subdiff_at(j, cert.p, rep.u, 1e-7)


class TestSolvePrimalDeblurring:
    def make_instance(self, seed, n=16, gamma=1e-4):
        grid = Grid(n, 10.0 / n)
        rng = np.random.default_rng(seed)
        u = np.ones(n)
        u[n // 3 : 2 * n // 3] = 3.0
        u_exact = Signal(grid, u)
        a = gaussian_convolution(grid, 0.5)
        f = a.entries @ u
        delta = 0.05 * float(np.max(np.abs(f)))
        fn = Signal(grid, f + rng.uniform(-delta, delta, n))
        noisy = perturb_operator(a, 0.05, rng_seed=seed)
        op = interval_from_noisy(noisy, 0.05 * a.max_abs_entry())
        return Regularizer(gamma), op, data_bounds(fn, delta), u_exact

    def test_oracle_equivalence_small_instance(self):
        # 4 samples keeps the full epigraph encoding within the oracle's cap
        j, op, data, _ = self.make_instance(seed=0, n=4)
        enc = build_primal_problem(j, op, data)
        rep = solve_primal(j, op, data)
        oracle = lp.vertex_oracle(enc.problem, max_combinations=4_000_000)
        assert rep.status == oracle.status == lp.OPTIMAL
        j_oracle = float(enc.problem.c @ oracle.x)
        assert rep.objective == pytest.approx(j_oracle, abs=1e-7, rel=1e-7)

    def test_residuals_across_seeds(self):
        for seed in range(5):
            j, op, data, _ = self.make_instance(seed, n=16)
            rep = solve_primal(j, op, data)
            assert rep.status == lp.OPTIMAL
            scale = 1.0 + rep.objective
            assert rep.duality_gap <= 1e-7 * scale
            assert rep.compl_data <= 1e-7 * scale
            assert rep.compl_positivity <= 1e-7 * scale
            assert rep.pairing_gap <= 1e-7 * scale
            assert rep.feasibility <= 1e-7

    def test_exact_solution_feasible_and_j_dominates(self):
        j, op, data, u_exact = self.make_instance(seed=3, n=16)
        rep = solve_primal(j, op, data)
        assert rep.objective <= value(j, u_exact) + 1e-9

    def test_monotone_refinement(self):
        # shrinking nested brackets never decreases the optimum
        n = 12
        grid = Grid(n)
        u = np.ones(n)
        u[4:8] = 2.5
        u_exact = Signal(grid, u)
        a = gaussian_convolution(grid, 0.8)
        f_exact = Signal(grid, a.entries @ u)
        sched = BoundsSchedule(eps0=0.5, decay=0.5, c0=1.5, d0=0.5, steps=5)
        j = Regularizer(0.2)
        prev = -np.inf
        for step in range(5):
            data, op = generate_bounds(sched, f_exact, a, step, rng_seed=11)
            rep = solve_primal(j, op, data)
            assert rep.status == lp.OPTIMAL
            assert rep.objective >= prev - 1e-9
            prev = rep.objective

    def test_lambda_l1_estimate(self):
        # multiplier mass bound from pairing the subgradient with the ones vector
        for seed in range(3):
            j, op, data, _ = self.make_instance(seed, n=16)
            rep = solve_primal(j, op, data)
            a_exact = gaussian_convolution(Grid(16, 10.0 / 16), 0.5)
            j_ones = value(j, sig(np.ones(16)))
            bound = j_ones + rep.certificate.mu_l1() * linf_norm(
                Signal(rep.u.grid, a_exact.entries @ np.ones(16))
            )
            assert l1_norm(rep.certificate.lam) <= bound + 1e-7


class TestMinNormCertificate:
    def test_zero_reference(self):
        a = DenseOperator(np.eye(3))
        res = min_norm_certificate(Regularizer(0.5), a, sig([0.0, 0.0, 0.0]))
        assert res.status == lp.OPTIMAL
        assert res.mu_l1 == pytest.approx(0.0, abs=1e-9)

    def test_denoising_flat_reference(self):
        j = Regularizer(0.5)
        a = DenseOperator(np.eye(2))
        u_ref = sig([1.0, 1.0])
        res = min_norm_certificate(j, a, u_ref)
        assert res.status == lp.OPTIMAL
        assert in_subdiff_at(j, res.p, u_ref, 1e-7)
        assert res.mu_l1 >= -1e-9

    def test_infeasible_with_dead_operator_row(self):
        # a decreasing two-sample reference needs p = (1, -1) for pure tv, but
        # the adjoint never reaches the second coordinate and the positivity
        # multiplier can only add there, so p_2 = -1 is unreachable
        j = Regularizer(0.0)
        a = DenseOperator(np.array([[1.0, 0.0], [0.0, 0.0]]))
        res = min_norm_certificate(j, a, sig([1.0, 0.0]))
        assert res.status == lp.INFEASIBLE

    def test_crafted_infeasible_confirmed_by_oracle(self):
        # same instance in explicit LP form cross-checked by enumeration
        j = Regularizer(0.0)
        a = DenseOperator(np.array([[1.0, 0.0], [0.0, 0.0]]))
        u_ref = sig([1.0, 0.0])
        b = lp.LpBuilder()
        lam = b.add_vars(2)
        mu1 = b.add_vars(2)
        mu2 = b.add_vars(2)
        s = b.add_vars(1)
        b.add_leq([s[0]], [1.0], 2.0)
        at = a.entries.T
        dt = np.array([[-1.0], [1.0]])
        shift = dt @ np.ones(1)
        for row in range(2):
            cols = [lam[row], mu1[0], mu1[1], mu2[0], mu2[1], s[0]]
            coeffs = [1.0, -at[row, 0], -at[row, 1], at[row, 0], at[row, 1], -dt[row, 0]]
            b.add_eq(cols, coeffs, -shift[row])
        au = a.entries @ u_ref.values
        b.add_eq(
            [lam[0], lam[1], mu1[0], mu1[1], mu2[0], mu2[1]],
            [1.0, 0.0, -au[0], -au[1], au[0], au[1]],
            1.0,
        )
        obj = np.zeros(b.num_vars)
        obj[mu1] = 1.0
        obj[mu2] = 1.0
        assert lp.vertex_oracle(b.build(obj)).status == lp.INFEASIBLE

    def test_rejects_negative_reference(self):
        with pytest.raises(ValueError):
            min_norm_certificate(Regularizer(0.0), DenseOperator(np.eye(2)), sig([-1.0, 0.0]))


class TestFeasibleL1Bound:
    def test_denoising_bound(self):
        op, data = denoising([0.0, 0.0], [2.0, 2.0])
        res = feasible_l1_bound(op, data)
        assert res.status == lp.OPTIMAL
        assert res.bound == pytest.approx(4.0, abs=1e-9)

    def test_zero_operator_unbounded(self):
        zero = DenseOperator(np.zeros((2, 2)))
        op = IntervalOperator(zero, zero)
        data = IntervalData(sig([-1.0, -1.0]), sig([1.0, 1.0]))
        res = feasible_l1_bound(op, data)
        assert res.unbounded
        assert res.bound == np.inf

    def test_deblurring_cross_checked_by_dual(self):
        n = 32
        grid = Grid(n, 10.0 / n)
        a = gaussian_convolution(grid, 0.5)
        u = np.ones(n)
        f = Signal(grid, a.entries @ u)
        data = data_bounds(f, 0.1)
        noisy = perturb_operator(a, 0.05, rng_seed=4)
        op = interval_from_noisy(noisy, 0.05 * a.max_abs_entry())
        res = feasible_l1_bound(op, data)
        assert res.status == lp.OPTIMAL
        assert check_assumption5(op.lower) > 0
        # dual bound: min <mu, phi> s.t. B.T mu >= ones, mu >= 0
        b = lp.LpBuilder()
        mu1 = b.add_vars(n)
        mu2 = b.add_vars(n)
        bt = np.hstack([op.lower.entries.T, -op.upper.entries.T])
        for row in range(n):
            b.add_leq(
                np.concatenate([mu1, mu2]), -bt[row], -1.0
            )
        obj = np.zeros(b.num_vars)
        obj[mu1] = data.upper.values
        obj[mu2] = -data.lower.values
        dual = lp.solve_lp(b.build(obj))
        assert dual.status == lp.OPTIMAL
        # weak duality brackets the primal value; strong duality closes it
        assert res.bound <= dual.objective_value + 1e-6 * (1 + abs(dual.objective_value))
        assert res.bound == pytest.approx(dual.objective_value, rel=1e-6)

    def test_finite_bound_respects_column_sum_estimate(self):
        n = 16
        grid = Grid(n, 10.0 / n)
        a = gaussian_convolution(grid, 0.5)
        f = Signal(grid, a.entries @ np.ones(n))
        data = data_bounds(f, 0.05)
        op = IntervalOperator(a, a)
        res = feasible_l1_bound(op, data)
        c = check_assumption5(op.lower)
        assert c > 0
        assert res.bound <= float(np.sum(data.upper.values)) / c + 1e-9


class TestCertificateNormBoundAlongSchedule:
    def test_mu_stays_within_factor_of_min_norm(self):
        # deblurring instance with a genuinely non-zero minimum-norm
        # certificate: the schedule's multipliers stay within a small factor
        from intervaltv import experiments as exmod

        cfg = exmod.ExperimentConfig(seed=0, n=24)
        inst = exmod.synthesize(cfg)
        ref = min_norm_certificate(inst.regularizer, inst.a_exact, inst.u_exact)
        assert ref.status == lp.OPTIMAL
        assert ref.mu_l1 > 0.1
        sched = BoundsSchedule(eps0=0.25, decay=0.5, c0=1.5, d0=0.5, steps=6)
        worst = 0.0
        for step in range(6):
            data, op = generate_bounds(sched, inst.f_clean, inst.a_exact, step, rng_seed=2)
            rep = solve_primal(inst.regularizer, op, data)
            assert rep.status == lp.OPTIMAL
            worst = max(worst, rep.certificate.mu_l1())
        assert worst <= 10.0 * ref.mu_l1


def test_report_json_roundtrip():
    op, data = denoising([1.0, 1.0], [2.0, 2.0])
    rep = solve_primal(Regularizer(0.5), op, data)
    rt = PrimalSolveReport.from_json(rep.to_json())
    np.testing.assert_allclose(rt.u.values, rep.u.values)
    np.testing.assert_allclose(rt.certificate.p.values, rep.certificate.p.values)
    assert rt.gamma == rep.gamma
    assert rt.op is None
    back = rt.with_context(op, data)
    assert back.op is op


def test_certificate_rejects_negative_multipliers():
    g = Grid(2)
    with pytest.raises(ValueError):
        Certificate(
            lam=Signal(g, [-1.0, 0.0]),
            mu1=Signal(g, [0.0, 0.0]),
            mu2=Signal(g, [0.0, 0.0]),
            p=Signal(g, [0.0, 0.0]),
        )
