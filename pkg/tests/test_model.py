"""Kernels, coupling geometry, smallness predicate, and the mean-field force."""

import math

import numpy as np
import pytest

from vfplab import (ConfigurationError, ModelParams, builtin_kernel,
                    coupling_constants, mean_field_force, norm_equivalence_ratio,
                    smallness_holds, smallness_threshold)

GAMMA_GRID = np.logspace(np.log10(1.0 / 16.0), np.log10(16.0), 33)

KERNEL_SPECS = [
    {"type": "quadratic_linear", "a": 0.7, "b": -1.3},
    {"type": "sine", "amplitude": 1.4},
    {"type": "gaussian_bump", "height": -2.0, "width": 0.6},
    {"type": "gaussian_bump", "height": 1.0, "width": 2.5},
    {"type": "symmetrized", "inner": {"type": "sine", "amplitude": 0.9}},
]


@pytest.mark.parametrize("spec", KERNEL_SPECS, ids=lambda s: s["type"])
def test_kernel_derivatives_match_finite_differences(spec):
    kernel = builtin_kernel(spec)
    x = np.linspace(-4.0, 4.0, 41)
    h = 1e-5
    fd1 = (kernel.evaluate(x + h) - kernel.evaluate(x - h)) / (2.0 * h)
    fd2 = (kernel.d1(x + h) - kernel.d1(x - h)) / (2.0 * h)
    assert np.abs(fd1 - kernel.d1(x)).max() < 1e-8
    assert np.abs(fd2 - kernel.d2(x)).max() < 1e-8


@pytest.mark.parametrize("spec", KERNEL_SPECS, ids=lambda s: s["type"])
def test_d2_sup_dominates_curvature(spec):
    kernel = builtin_kernel(spec)
    x = np.linspace(-30.0, 30.0, 200001)
    observed = np.abs(kernel.d2(x)).max()
    assert observed <= kernel.d2_sup + 1e-12
    if spec["type"] != "symmetrized":
        # the certificate is tight for the closed forms; the symmetrized
        # wrapper inherits the inner bound, which may be loose (an odd inner
        # kernel symmetrizes to zero)
        assert observed >= kernel.d2_sup - 1e-3


def test_zero_kernel_is_the_trivial_quadratic():
    kernel = builtin_kernel("zero")
    x = np.linspace(-2.0, 2.0, 7)
    assert np.all(kernel.evaluate(x) == 0.0)
    assert np.all(kernel.d1(x) == 0.0)
    assert kernel.d2_sup == 0.0
    assert kernel.is_even
    assert kernel.kind == "quadratic_linear"
    assert kernel.coeffs == (0.0, 0.0)
    assert np.all(kernel.pair_sum(x) == 0.0)


def test_symmetrized_kernel_is_even():
    kernel = builtin_kernel({"type": "symmetrized",
                             "inner": {"type": "quadratic_linear", "a": 1.0, "b": 3.0}})
    x = np.linspace(-3.0, 3.0, 13)
    assert np.abs(kernel.evaluate(x) - kernel.evaluate(-x)).max() < 1e-14
    assert np.abs(kernel.d1(x) + kernel.d1(-x)).max() < 1e-14
    assert kernel.is_even
    # symmetrizing x^2 + 3x leaves x^2
    assert np.abs(kernel.evaluate(x) - x ** 2).max() < 1e-12


def test_kernel_evenness_flags():
    assert builtin_kernel({"type": "quadratic_linear", "a": 1.0, "b": 0.0}).is_even
    assert not builtin_kernel({"type": "quadratic_linear", "a": 1.0, "b": 0.1}).is_even
    assert not builtin_kernel({"type": "sine", "amplitude": 1.0}).is_even
    assert builtin_kernel({"type": "gaussian_bump", "height": 1.0, "width": 1.0}).is_even


@pytest.mark.parametrize("bad", [
    {"type": "does_not_exist"},
    {"type": "sine"},
    {"type": "sine", "amplitude": 1.0, "phase": 0.2},
    {"type": "quadratic_linear", "a": 1.0},
    {"type": "gaussian_bump", "height": 1.0, "width": 0.0},
    {"type": "zero", "scale": 2.0},
    {"no_type": True},
    42,
])
def test_kernel_descriptor_validation(bad):
    with pytest.raises(ConfigurationError):
        builtin_kernel(bad)


def test_kernel_passthrough():
    kernel = builtin_kernel({"type": "sine", "amplitude": 2.0})
    assert builtin_kernel(kernel) is kernel


def test_model_params_validation():
    kernel = builtin_kernel("zero")
    with pytest.raises(ConfigurationError):
        ModelParams(gamma=0.0, lam=0.0, kernel=kernel)
    with pytest.raises(ConfigurationError):
        ModelParams(gamma=-1.0, lam=0.0, kernel=kernel)
    with pytest.raises(ConfigurationError):
        ModelParams(gamma=1.0, lam=-0.1, kernel=kernel)
    with pytest.raises(ConfigurationError):
        ModelParams(gamma=math.nan, lam=0.0, kernel=kernel)


def test_coupling_constants_unit_friction():
    c = coupling_constants(1.0)
    assert c.a == 0.5
    assert c.b == 0.75
    assert np.allclose(c.M, [[1.0, -0.5], [-0.5, 1.0]], atol=1e-15)
    assert abs(np.linalg.det(c.M) - c.b) < 1e-15
    assert c.contraction_rate == 0.125


def test_coupling_constants_friction_two():
    c = coupling_constants(2.0)
    assert c.a == 0.25
    assert c.b == 0.5625
    assert np.allclose(c.M, [[1.0, -0.25], [-0.25, 0.625]], atol=1e-15)
    assert abs(np.linalg.det(c.M) - 0.5625) < 1e-15


@pytest.mark.parametrize("gamma", GAMMA_GRID)
def test_coupling_identities_across_frictions(gamma):
    c = coupling_constants(gamma)
    assert 0.5 <= c.b <= 1.25
    assert abs(np.linalg.det(c.M) - c.b) < 1e-12
    assert abs(norm_equivalence_ratio(c) - 4.0) < 1e-12
    # A is the symmetric PSD square root of M^{-1}
    assert np.abs(c.A - c.A.T).max() < 1e-13
    assert np.linalg.eigvalsh(c.A).min() > 0.0
    assert np.abs(c.A @ c.A @ c.M - np.eye(2)).max() < 1e-12


def test_coupling_constants_reject_bad_friction():
    with pytest.raises(ConfigurationError):
        coupling_constants(0.0)
    with pytest.raises(ConfigurationError):
        coupling_constants(math.inf)


def test_smallness_threshold_and_predicate():
    assert smallness_threshold(1.0) == 0.125
    assert smallness_threshold(4.0) == 1.0 / 32.0
    assert smallness_threshold(0.25) == 1.0 / 32.0
    sine = builtin_kernel({"type": "sine", "amplitude": 1.0})
    assert smallness_holds(ModelParams(gamma=1.0, lam=0.125, kernel=sine))
    assert not smallness_holds(ModelParams(gamma=1.0, lam=0.1250001, kernel=sine))
    # monotone in lam
    flags = [smallness_holds(ModelParams(gamma=0.5, lam=lam, kernel=sine))
             for lam in np.linspace(0.0, 0.2, 21)]
    assert flags == sorted(flags, reverse=True)


def test_mean_field_force_quadratic_closed_form():
    kernel = builtin_kernel({"type": "quadratic_linear", "a": 0.8, "b": -0.3})
    params = ModelParams(gamma=1.0, lam=0.6, kernel=kernel)
    rng = np.random.default_rng(2)
    points = rng.normal(size=50)
    weights = rng.random(50)
    weights /= weights.sum()
    m = points @ weights
    x = np.linspace(-2.0, 2.0, 9)
    expected = -0.6 * (2.0 * 0.8 * (x - m) - 0.3)
    got = mean_field_force(params, x, (points, weights))
    assert np.abs(got - expected).max() < 1e-12


def test_mean_field_force_scalar_and_zero_kernel():
    params = ModelParams(gamma=1.0, lam=2.0, kernel=builtin_kernel("zero"))
    points = np.array([0.0, 1.0])
    weights = np.array([0.5, 0.5])
    out = mean_field_force(params, 0.3, (points, weights))
    assert isinstance(out, float) and out == 0.0


def test_mean_field_force_rejects_bad_marginals():
    params = ModelParams(gamma=1.0, lam=1.0, kernel=builtin_kernel("zero"))
    with pytest.raises(ValueError):
        mean_field_force(params, 0.0, (np.zeros(3), np.full(3, 0.5)))
    with pytest.raises(ValueError):
        mean_field_force(params, 0.0, (np.zeros(3), np.full(2, 0.5)))
