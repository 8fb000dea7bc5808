import numpy as np
import pytest

from wirtflow import (AveragingVstLoss, DomainError, MeasurementFrame,
                      NoConstantBoundError, complex_standard_normal,
                      gen_gaussian_instance, make_loss)

from conftest import (ALL_KINDS, BOUNDED_KINDS, KIND_PARAMS, fd_gradient,
                      make_kind, quad_form_fd, random_z)


class TestValues:
    def test_poisson_reg_at_zero(self, small_instance):
        eps = 0.3
        loss = make_loss("poisson_reg", small_instance.frame,
                         small_instance.counts, eps=eps)
        expected = -np.sum(small_instance.counts * np.log(eps))
        assert loss.value(np.zeros(8)) == pytest.approx(expected, rel=1e-12)

    def test_amplitude_is_degenerate_averaging(self, small_instance, rng):
        # 2 (sqrt(t+eps) - sqrt(y))^2 == 1/2 (2 sqrt(t+eps) - 2 sqrt(y))^2
        eps = 0.05
        frame, y = small_instance.frame, small_instance.counts
        amp = make_loss("amplitude", frame, y, eps=eps)
        avg = AveragingVstLoss(frame, y, c1=eps, c2=eps,
                               target=2.0 * np.sqrt(y))
        for _ in range(10):
            z = random_z(rng, 8)
            assert amp.value(z) == pytest.approx(avg.value(z), rel=1e-12)
            ga, gv = amp.gradient(z).grad, avg.gradient(z).grad
            assert np.allclose(ga, gv, rtol=1e-12, atol=1e-12)

    def test_zero_adapted_all_zero_counts(self, rng):
        frame = MeasurementFrame(complex_standard_normal(rng, (12, 4)))
        loss = make_loss("zero_adapted", frame, np.zeros(12))
        z = random_z(rng, 4)
        assert loss.value(z) == pytest.approx(
            np.sum(frame.intensities(z)), rel=1e-12)

    def test_poisson_reg_zero_counts_reduces_to_quadratic(self, rng):
        frame = MeasurementFrame(complex_standard_normal(rng, (12, 4)))
        reg = make_loss("poisson_reg", frame, np.zeros(12), eps=0.1)
        zad = make_loss("zero_adapted", frame, np.zeros(12))
        z = random_z(rng, 4)
        quad = np.sum(frame.intensities(z))
        assert reg.value(z) == pytest.approx(quad, rel=1e-12)
        assert zad.value(z) == pytest.approx(quad, rel=1e-12)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_phase_invariance(self, kind, small_instance, rng):
        loss = make_kind(kind, small_instance.frame, small_instance.counts)
        z = random_z(rng, 8)
        base = loss.value(z)
        for theta in (0.3, 1.7, np.pi, 5.1):
            rotated = loss.value(np.exp(1j * theta) * z)
            assert rotated == pytest.approx(base, rel=1e-12)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_sublevel_growth_along_rays(self, kind, small_instance, rng):
        loss = make_kind(kind, small_instance.frame, small_instance.counts)
        z0 = random_z(rng, 8)
        vals = [loss.value(t * z0) for t in (10.0, 100.0, 1000.0)]
        assert vals[0] < vals[1] < vals[2]
        assert vals[2] > 1e4

    def test_per_term_storage_optional(self, small_instance, rng):
        loss = make_kind("poisson_reg", small_instance.frame,
                         small_instance.counts)
        z = random_z(rng, 8)
        ge = loss.gradient(z)
        assert ge.per_term is None
        ge = loss.gradient(z, keep_per_term=True)
        assert ge.per_term.shape == (40,)
        assert np.sum(ge.per_term) == pytest.approx(ge.value, rel=1e-12)


class TestGradients:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_zero_is_stationary(self, kind, small_instance):
        loss = make_kind(kind, small_instance.frame, small_instance.counts)
        ge = loss.gradient(np.zeros(8))
        assert np.all(ge.grad == 0)

    def test_unbiased_poisson_stationary_at_exact_fit(self, rng):
        frame = MeasurementFrame(complex_standard_normal(rng, (20, 6)))
        z = random_z(rng, 6)
        y = frame.intensities(z)
        loss = make_loss("poisson_unbiased", frame, y, eps=0.37)
        ge = loss.gradient(z)
        assert np.linalg.norm(ge.grad) <= 1e-12 * np.linalg.norm(z)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_matches_finite_differences(self, kind, small_instance, rng):
        loss = make_kind(kind, small_instance.frame, small_instance.counts)
        for _ in range(10):
            z = random_z(rng, 8)
            g = loss.gradient(z).grad
            fd = fd_gradient(loss, z)
            assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_finite_differences_near_vanishing_intensity(self, kind,
                                                         small_instance):
        # regularized kinds stay differentiable where some |<a_i,z>|^2 ~ 0
        loss = make_kind(kind, small_instance.frame, small_instance.counts)
        rng = np.random.default_rng(77)
        z = random_z(rng, 8, scale=1e-4)
        g = loss.gradient(z).grad
        fd = fd_gradient(loss, z, h=1e-6)
        assert np.linalg.norm(fd - g) <= 1e-5 * max(np.linalg.norm(g), 1e-12)


class TestLipschitzBounds:
    def test_amplitude_bound_is_twice_norm_squared(self, small_instance):
        loss = make_kind("amplitude", small_instance.frame,
                         small_instance.counts)
        rows = small_instance.frame.rows
        sigma = np.linalg.svd(rows.conj(), compute_uv=False)[0]
        assert loss.lipschitz_bound() == pytest.approx(2.0 * sigma ** 2,
                                                       rel=1e-6)

    def test_tukey_freeman_style_bound(self, small_instance):
        eps = 0.04
        loss = make_loss("averaging_vst", small_instance.frame,
                         small_instance.counts, c1=eps, c2=1.0)
        rows = small_instance.frame.rows
        sigma = np.linalg.svd(rows.conj(), compute_uv=False)[0]
        expected = 0.5 * (3.0 + np.sqrt(1.0 / eps)) * sigma ** 2
        assert loss.lipschitz_bound() == pytest.approx(expected, rel=1e-6)

    @pytest.mark.parametrize("kind", ["poisson_reg", "poisson_unbiased"])
    def test_poisson_bounds_match_dense_eig(self, kind, small_instance):
        eps = 0.25
        loss = make_loss(kind, small_instance.frame, small_instance.counts,
                         eps=eps)
        y = small_instance.counts.astype(float)
        shift = y if kind == "poisson_reg" else y + eps
        weights = 1.0 + shift / (8.0 * eps)
        a_mat = small_instance.frame.rows.conj()
        gram = a_mat.conj().T @ (weights[:, None] * a_mat)
        expected = np.linalg.eigvalsh(gram)[-1]
        assert loss.lipschitz_bound() == pytest.approx(expected, rel=1e-6)

    def test_gaussian_has_no_constant_bound(self, small_instance):
        loss = make_kind("gaussian_lsq", small_instance.frame,
                         small_instance.counts)
        with pytest.raises(NoConstantBoundError, match="adaptive"):
            loss.lipschitz_bound()

    def test_sqrt_shift_subtract_quarter_needs_large_shift(self,
                                                           small_instance):
        loss = make_loss("sqrt_shift", small_instance.frame,
                         small_instance.counts, c=0.2, subtract_quarter=True)
        with pytest.raises(NoConstantBoundError):
            loss.lipschitz_bound()

    @pytest.mark.parametrize("kind", BOUNDED_KINDS)
    def test_quadratic_form_never_exceeds_bound(self, kind):
        inst = gen_gaussian_instance(5, 20, 50.0, seed=11)
        loss = make_kind(kind, inst.frame, inst.counts)
        bound = loss.lipschitz_bound()
        rng = np.random.default_rng(int(np.sum(inst.counts)) + len(kind))
        for _ in range(50):
            z = random_z(rng, 5)
            v = random_z(rng, 5)
            q = quad_form_fd(loss, z, v)
            pair_norm_sq = 2.0 * float(np.sum(np.abs(v) ** 2))
            assert q <= bound * pair_norm_sq * (1.0 + 1e-4)


class TestDomainChecks:
    def test_subtract_quarter_rejects_small_intensities(self, rng):
        frame = MeasurementFrame(complex_standard_normal(rng, (10, 4)))
        loss = make_loss("sqrt_shift", frame, np.ones(10), c=0.2,
                         subtract_quarter=True)
        tiny = 1e-6 * np.ones(4, dtype=complex)
        with pytest.raises(DomainError, match="undefined"):
            loss.value(tiny)
        with pytest.raises(DomainError):
            loss.gradient(tiny)

    def test_subtract_quarter_ok_above_boundary(self, rng):
        frame = MeasurementFrame(np.eye(3))
        loss = make_loss("sqrt_shift", frame, np.ones(3), c=0.2,
                         subtract_quarter=True)
        z = np.full(3, 2.0, dtype=complex)  # every intensity is 4 > 0.05
        assert np.isfinite(loss.value(z))
        assert np.all(np.isfinite(loss.gradient(z).grad))


class TestConstruction:
    def test_unknown_kind(self, small_instance):
        with pytest.raises(ValueError, match="unknown loss kind"):
            make_loss("huber", small_instance.frame, small_instance.counts)

    def test_negative_counts_rejected(self, small_instance):
        with pytest.raises(ValueError, match="negative"):
            make_loss("poisson_reg", small_instance.frame, -np.ones(40))

    def test_nonpositive_eps_rejected(self, small_instance):
        with pytest.raises(ValueError, match="eps"):
            make_loss("poisson_reg", small_instance.frame,
                      small_instance.counts, eps=0.0)

    def test_vst_shift_ordering_enforced(self, small_instance):
        with pytest.raises(ValueError, match="c1 <= c2"):
            make_loss("averaging_vst", small_instance.frame,
                      small_instance.counts, c1=0.5, c2=0.1)

    def test_negative_target_rejected(self, small_instance):
        with pytest.raises(ValueError, match="negative"):
            AveragingVstLoss(small_instance.frame, small_instance.counts,
                             c1=0.1, c2=0.2, target=-1.0)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_labels_are_stable(self, kind, small_instance):
        loss = make_kind(kind, small_instance.frame, small_instance.counts)
        label = loss.label()
        assert label.startswith(kind)
        params, _ = KIND_PARAMS[kind]
        for key in params:
            assert key in label
