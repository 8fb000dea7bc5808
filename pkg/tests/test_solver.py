import numpy as np
import pytest

from wirtflow import (MeasurementFrame, NoConstantBoundError,
                      SolverConfig, StagnationError, backtracking_step,
                      complex_standard_normal, gen_gaussian_instance,
                      make_loss, solve, spectral_init)

from conftest import make_kind


class TestSpectralInit:
    def test_noiseless_overlap(self):
        rng = np.random.default_rng(5)
        n, m = 16, 200 * 16
        frame = MeasurementFrame(complex_standard_normal(rng, (m, n)))
        x = complex_standard_normal(rng, n)
        init = spectral_init(frame, frame.intensities(x))
        overlap = abs(np.vdot(init.z0, x)) / (np.linalg.norm(init.z0)
                                              * np.linalg.norm(x))
        assert overlap >= 0.9
        assert not init.fallback

    def test_all_zero_counts_falls_back(self):
        rng = np.random.default_rng(6)
        frame = MeasurementFrame(complex_standard_normal(rng, (20, 4)))
        init = spectral_init(frame, np.zeros(20))
        assert init.fallback
        assert init.estimate is None
        assert np.linalg.norm(init.z0) == pytest.approx(1.0)

    def test_count_scaling(self):
        rng = np.random.default_rng(7)
        frame = MeasurementFrame(complex_standard_normal(rng, (40, 8)))
        y = frame.intensities(complex_standard_normal(rng, 8))
        base = spectral_init(frame, y)
        scaled = spectral_init(frame, 4.0 * y)
        assert np.linalg.norm(scaled.z0) == pytest.approx(
            2.0 * np.linalg.norm(base.z0), rel=1e-9)
        cos = abs(np.vdot(scaled.z0, base.z0)) / (
            np.linalg.norm(scaled.z0) * np.linalg.norm(base.z0))
        assert cos == pytest.approx(1.0, abs=1e-9)


class TestTheoremConstantStep:
    def test_descent_certificates_hold(self):
        inst = gen_gaussian_instance(32, 320, 500.0, seed=0)
        loss = make_kind("poisson_reg", inst.frame, inst.counts)
        run = solve(loss, SolverConfig(max_iters=500, grad_tol=0.0,
                                       monitor_descent=True))
        assert run.stop_reason in ("max_iters", "grad_tol")
        assert run.descent_certificates.all()
        assert len(run.descent_certificates) == run.n_iters

    def test_loss_trace_monotone(self):
        inst = gen_gaussian_instance(16, 160, 300.0, seed=1)
        for kind in ("poisson_reg", "amplitude", "zero_adapted"):
            loss = make_kind(kind, inst.frame, inst.counts)
            run = solve(loss, SolverConfig(max_iters=300))
            diffs = np.diff(run.loss_trace)
            assert np.all(diffs <= 1e-10 * np.abs(run.loss_trace[:-1]))

    def test_zero_counts_quadratic_decay(self):
        rng = np.random.default_rng(2)
        frame = MeasurementFrame(complex_standard_normal(rng, (160, 16)))
        loss = make_loss("poisson_reg", frame, np.zeros(160), eps=0.25)
        run = solve(loss, SolverConfig(max_iters=2000, grad_tol=0.0,
                                       init_mode="random", seed=3))
        assert run.init_fallback is False
        assert np.all(np.diff(run.loss_trace) <= 0)
        assert run.final_loss <= 1e-10 * run.loss_trace[0]

    def test_oversized_step_violates_descent(self):
        violations = 0
        for seed in range(3):
            inst = gen_gaussian_instance(16, 160, 300.0, seed=seed)
            loss = make_kind("poisson_reg", inst.frame, inst.counts)
            bound = loss.lipschitz_bound()
            run = solve(loss, SolverConfig(step_mode="fixed",
                                           step_size=100.0 / bound,
                                           max_iters=200,
                                           monitor_descent=True))
            if run.stop_reason == "descent_violation":
                violations += 1
        assert violations >= 1

    def test_gaussian_rejected(self):
        inst = gen_gaussian_instance(8, 40, 100.0, seed=3)
        loss = make_kind("gaussian_lsq", inst.frame, inst.counts)
        with pytest.raises(NoConstantBoundError):
            solve(loss, SolverConfig())

    def test_gradient_norm_convergence(self):
        inst = gen_gaussian_instance(32, 320, 800.0, seed=4)
        loss = make_loss("poisson_reg", inst.frame, inst.counts, eps=0.5)
        run = solve(loss, SolverConfig(max_iters=10 ** 4, grad_tol=1e-6))
        assert run.grad_norm_trace.min() < 1e-6
        assert run.stop_reason == "grad_tol"

    def test_iterates_confined_to_shifted_row_space(self):
        # with m < n the gradients span range(A*); iterates never leave
        # z0 + range(A*)
        rng = np.random.default_rng(8)
        rows = complex_standard_normal(rng, (4, 8))
        frame = MeasurementFrame(rows)
        y = np.array([2.0, 0.0, 1.0, 3.0])
        loss = make_loss("poisson_reg", frame, y, eps=0.25)
        z0 = complex_standard_normal(rng, 8)
        run = solve(loss, SolverConfig(max_iters=100, init_mode="given",
                                       z0=z0, keep_iterates=True))
        # null space of A = conj(rows): rows of vh beyond the rank
        _, _, vh = np.linalg.svd(rows.conj())
        null_basis = vh[4:].conj().T
        for zk in run.iterates:
            leak = np.linalg.norm(null_basis.conj().T @ (zk - z0))
            assert leak <= 1e-9 * max(np.linalg.norm(zk - z0), 1.0)

    def test_trace_shapes(self):
        inst = gen_gaussian_instance(8, 40, 100.0, seed=5)
        loss = make_kind("poisson_reg", inst.frame, inst.counts)
        run = solve(loss, SolverConfig(max_iters=50, grad_tol=0.0))
        assert len(run.loss_trace) == len(run.grad_norm_trace)
        assert len(run.loss_trace) == run.n_iters + 1
        assert run.step_size == pytest.approx(
            1.0 / loss.lipschitz_bound())
        assert np.all(run.step_sizes == run.step_size)


class TestBacktracking:
    def test_quadratic_accepts_first_trial(self):
        rng = np.random.default_rng(9)
        frame = MeasurementFrame(complex_standard_normal(rng, (40, 8)))
        loss = make_loss("poisson_reg", frame, np.zeros(40), eps=1.0)
        mu0 = 1.0 / frame.operator_norm().value ** 2
        z = complex_standard_normal(rng, 8)
        z_next, mu_used = backtracking_step(loss, z, mu_init=mu0)
        assert mu_used == mu0
        assert loss.value(z_next) < loss.value(z)

    def test_zero_gradient_accepts_immediately(self):
        rng = np.random.default_rng(10)
        frame = MeasurementFrame(complex_standard_normal(rng, (20, 4)))
        loss = make_loss("poisson_reg", frame, np.zeros(20), eps=1.0)
        z = np.zeros(4, dtype=complex)
        z_next, mu_used = backtracking_step(loss, z, mu_init=0.5)
        assert np.array_equal(z_next, z)
        assert mu_used == 0.5

    def test_gaussian_full_run_non_increasing(self):
        inst = gen_gaussian_instance(16, 160, 500.0, seed=11)
        loss = make_kind("gaussian_lsq", inst.frame, inst.counts)
        run = solve(loss, SolverConfig(step_mode="backtracking",
                                       max_iters=300,
                                       monitor_descent=True))
        assert np.all(np.diff(run.loss_trace)
                      <= 1e-10 * np.abs(run.loss_trace[:-1]))
        assert run.descent_certificates.all()
        assert run.step_size is None
        assert len(run.step_sizes) == run.n_iters

    def test_stagnation_signalled(self, small_instance):
        loss = make_kind("poisson_reg", small_instance.frame,
                         small_instance.counts)

        class NeverDecreasing:
            frame = loss.frame
            counts = loss.counts

            def gradient(self, z):
                return loss.gradient(z)

            def value(self, z):
                return float("inf")

        z = complex_standard_normal(np.random.default_rng(12), 8)
        with pytest.raises(StagnationError, match="underflow"):
            backtracking_step(NeverDecreasing(), z, mu_init=1.0)

    def test_bad_shrink_rejected(self, small_instance):
        loss = make_kind("poisson_reg", small_instance.frame,
                         small_instance.counts)
        with pytest.raises(ValueError, match="shrink"):
            backtracking_step(loss, np.zeros(8), mu_init=1.0, shrink=1.5)


class TestConfigValidation:
    def test_fixed_needs_step_size(self):
        with pytest.raises(ValueError, match="step_size"):
            SolverConfig(step_mode="fixed")

    def test_given_needs_z0(self):
        with pytest.raises(ValueError, match="z0"):
            SolverConfig(init_mode="given")

    def test_bad_modes(self):
        with pytest.raises(ValueError, match="step_mode"):
            SolverConfig(step_mode="momentum")
        with pytest.raises(ValueError, match="init_mode"):
            SolverConfig(init_mode="warm")
        with pytest.raises(ValueError, match="max_iters"):
            SolverConfig(max_iters=0)
        with pytest.raises(ValueError, match="bt_shrink"):
            SolverConfig(step_mode="backtracking", bt_shrink=1.0)
