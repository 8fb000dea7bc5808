import numpy as np
import pytest

from wirtflow import complex_standard_normal, gen_gaussian_instance, make_loss

# every loss kind with representative parameters; the boolean marks whether
# a constant curvature bound exists for that configuration
KIND_PARAMS = {
    "poisson_reg": ({"eps": 0.25}, True),
    "poisson_unbiased": ({"eps": 0.25}, True),
    "gaussian_lsq": ({"sigma_sq": 0.25}, False),
    "amplitude": ({"eps": 1e-3}, True),
    "sqrt_shift": ({"c": 0.5, "subtract_quarter": False}, True),
    "averaging_vst": ({"c1": 0.12, "c2": 0.27}, True),
    "zero_adapted": ({"c1": 0.12, "c2": 0.27}, True),
}

BOUNDED_KINDS = [k for k, (_, bounded) in KIND_PARAMS.items() if bounded]
ALL_KINDS = list(KIND_PARAMS)


def make_kind(kind, frame, counts):
    params, _ = KIND_PARAMS[kind]
    return make_loss(kind, frame, counts, **params)


def fd_gradient(loss, z, h=1e-5):
    """Central finite differences of the loss w.r.t. real/imaginary parts,
    packed as (d/dx + i d/dy) / 2 to match the Wirtinger gradient."""
    n = z.shape[0]
    out = np.zeros(n, dtype=complex)
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = h
        dx = (loss.value(z + e) - loss.value(z - e)) / (2 * h)
        dy = (loss.value(z + 1j * e) - loss.value(z - 1j * e)) / (2 * h)
        out[j] = 0.5 * (dx + 1j * dy)
    return out


def quad_form_fd(loss, z, v, h=1e-4):
    """Second directional derivative of the loss along v, i.e. the
    Wirtinger Hessian quadratic form at (v, conj(v))."""
    return (loss.value(z + h * v) - 2.0 * loss.value(z)
            + loss.value(z - h * v)) / h ** 2


@pytest.fixture
def small_instance():
    return gen_gaussian_instance(8, 40, 100.0, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_z(rng, n, scale=1.0):
    return scale * complex_standard_normal(rng, n)
