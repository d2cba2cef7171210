"""Model parameters, interaction kernels, and coupling-geometry constants.

The dynamics couples harmonic confinement, linear friction ``gamma``, and a
mean-field interaction of intensity ``lam`` acting through a kernel K: each
unit feels the velocity drift  -x - gamma*v - lam * <dK/dx(x - y)>_y.
Every other module sees kernels only through :class:`InteractionKernel`, so
the curvature bound used by the small-interaction guarantee is certified
here, never estimated downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConfigurationError

Array = np.ndarray
KernelFn = Callable[[Union[float, Array]], Union[float, Array]]

__all__ = [
    "InteractionKernel",
    "ModelParams",
    "CouplingConstants",
    "builtin_kernel",
    "smallness_holds",
    "smallness_threshold",
    "coupling_constants",
    "norm_equivalence_ratio",
    "mean_field_force",
]


@dataclass(frozen=True)
class InteractionKernel:
    """Twice-differentiable interaction potential with a certified curvature bound.

    ``d2_sup`` must dominate sup_x |d2(x)|.  It is supplied analytically for the
    builtin kernels and trusted for custom ones, because the small-interaction
    predicate has to be a certificate, not an estimate.

    ``pair_sum``, when present, evaluates sum_j d1(x_i - x_j) over all j
    (including j = i) exactly in O(N); it exists only for kernels with an
    algebraic reduction and must agree with direct summation to rounding.
    """

    name: str
    evaluate: KernelFn
    d1: KernelFn
    d2: KernelFn
    d2_sup: float
    is_even: bool
    kind: str = "custom"
    coeffs: tuple = ()
    pair_sum: Optional[Callable[[Array], Array]] = None


@dataclass(frozen=True)
class ModelParams:
    """Friction ``gamma`` > 0, interaction intensity ``lam`` >= 0, and a kernel."""

    gamma: float
    lam: float
    kernel: InteractionKernel

    def __post_init__(self):
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise ConfigurationError(f"gamma must be positive and finite, got {self.gamma}")
        if not (self.lam >= 0.0 and math.isfinite(self.lam)):
            raise ConfigurationError(f"lam must be nonnegative and finite, got {self.lam}")


@dataclass(frozen=True)
class CouplingConstants:
    """Constants of the contraction geometry for a given friction.

    a = min(gamma, 1/gamma)/2 and b = 1 + a^2 - a*gamma define the modified
    difference norm |dx + a*dv|^2 + b*|dv|^2.  M is the matching quadratic
    form on (x, -v); A is the symmetric square root of M^{-1}, used to twist
    the Fisher information.
    """

    gamma: float
    a: float
    b: float
    M: Array
    A: Array

    @property
    def contraction_rate(self) -> float:
        """Guaranteed decay rate of the squared modified norm."""
        return self.a / 4.0


def _as_float_array(x):
    return np.asarray(x, dtype=float)


def builtin_kernel(spec: Union[str, dict, InteractionKernel]) -> InteractionKernel:
    """Build one of the builtin kernels from a descriptor.

    Accepted descriptors: ``"zero"`` or ``{"type": "zero"}``,
    ``{"type": "quadratic_linear", "a": ..., "b": ...}``,
    ``{"type": "sine", "amplitude": ...}``,
    ``{"type": "gaussian_bump", "height": ..., "width": ...}``,
    ``{"type": "symmetrized", "inner": <descriptor>}``.
    """
    if isinstance(spec, InteractionKernel):
        return spec
    if isinstance(spec, str):
        spec = {"type": spec}
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigurationError(f"kernel descriptor must be a dict with a 'type' key, got {spec!r}")
    kind = spec["type"]
    extra = set(spec) - {"type"}

    if kind == "zero":
        if extra:
            raise ConfigurationError(f"zero kernel takes no parameters, got {sorted(extra)}")
        zero = lambda x: _as_float_array(x) * 0.0
        return InteractionKernel(
            name="zero", evaluate=zero, d1=zero, d2=zero, d2_sup=0.0,
            is_even=True, kind="quadratic_linear", coeffs=(0.0, 0.0),
            pair_sum=lambda x: np.zeros_like(_as_float_array(x)),
        )

    if kind == "quadratic_linear":
        if extra != {"a", "b"}:
            raise ConfigurationError(f"quadratic_linear kernel needs exactly 'a' and 'b', got {sorted(extra)}")
        a, b = float(spec["a"]), float(spec["b"])

        def pair_sum(x: Array) -> Array:
            x = _as_float_array(x)
            return 2.0 * a * (x.size * x - x.sum()) + x.size * b

        return InteractionKernel(
            name=f"quadratic_linear(a={a:g}, b={b:g})",
            evaluate=lambda x: a * _as_float_array(x) ** 2 + b * _as_float_array(x),
            d1=lambda x: 2.0 * a * _as_float_array(x) + b,
            d2=lambda x: _as_float_array(x) * 0.0 + 2.0 * a,
            d2_sup=2.0 * abs(a), is_even=(b == 0.0),
            kind="quadratic_linear", coeffs=(a, b), pair_sum=pair_sum,
        )

    if kind == "sine":
        if extra != {"amplitude"}:
            raise ConfigurationError(f"sine kernel needs exactly 'amplitude', got {sorted(extra)}")
        c = float(spec["amplitude"])

        def pair_sum(x: Array) -> Array:
            # sum_j cos(x_i - x_j) = cos(x_i) * sum_j cos(x_j) + sin(x_i) * sum_j sin(x_j)
            x = _as_float_array(x)
            cx, sx = np.cos(x), np.sin(x)
            return c * (cx * cx.sum() + sx * sx.sum())

        return InteractionKernel(
            name=f"sine(amplitude={c:g})",
            evaluate=lambda x: c * np.sin(_as_float_array(x)),
            d1=lambda x: c * np.cos(_as_float_array(x)),
            d2=lambda x: -c * np.sin(_as_float_array(x)),
            d2_sup=abs(c), is_even=False, kind="sine", coeffs=(c,),
            pair_sum=pair_sum,
        )

    if kind == "gaussian_bump":
        if extra != {"height", "width"}:
            raise ConfigurationError(f"gaussian_bump kernel needs exactly 'height' and 'width', got {sorted(extra)}")
        h, w = float(spec["height"]), float(spec["width"])
        if not w > 0.0:
            raise ConfigurationError(f"gaussian_bump width must be positive, got {w}")
        w2 = w * w

        def ev(x):
            x = _as_float_array(x)
            return h * np.exp(-x * x / (2.0 * w2))

        def d1(x):
            x = _as_float_array(x)
            return -h * x / w2 * np.exp(-x * x / (2.0 * w2))

        def d2(x):
            x = _as_float_array(x)
            return h / w2 * (x * x / w2 - 1.0) * np.exp(-x * x / (2.0 * w2))

        # |d2| is maximal at x = 0: |h|/w^2 beats the secondary extremum 2|h|e^{-3/2}/w^2.
        return InteractionKernel(
            name=f"gaussian_bump(height={h:g}, width={w:g})",
            evaluate=ev, d1=d1, d2=d2, d2_sup=abs(h) / w2,
            is_even=True, kind="gaussian_bump", coeffs=(h, w),
        )

    if kind == "symmetrized":
        if extra != {"inner"}:
            raise ConfigurationError(f"symmetrized kernel needs exactly 'inner', got {sorted(extra)}")
        inner = builtin_kernel(spec["inner"])

        def ev(x):
            x = _as_float_array(x)
            return 0.5 * (inner.evaluate(x) + inner.evaluate(-x))

        def d1(x):
            x = _as_float_array(x)
            return 0.5 * (inner.d1(x) - inner.d1(-x))

        def d2(x):
            x = _as_float_array(x)
            return 0.5 * (inner.d2(x) + inner.d2(-x))

        return InteractionKernel(
            name=f"symmetrized({inner.name})",
            evaluate=ev, d1=d1, d2=d2, d2_sup=inner.d2_sup,
            is_even=True, kind="symmetrized", coeffs=(inner,),
        )

    raise ConfigurationError(f"unknown kernel type {kind!r}")


def smallness_threshold(gamma: float) -> float:
    """Largest certified value of lam * d2_sup for the given friction."""
    return min(gamma, 1.0 / gamma) / 8.0


def smallness_holds(params: ModelParams) -> bool:
    """Whether the small-interaction condition lam*d2_sup <= min(gamma, 1/gamma)/8 holds."""
    return params.lam * params.kernel.d2_sup <= smallness_threshold(params.gamma)


def coupling_constants(gamma: float) -> CouplingConstants:
    """Contraction geometry for friction ``gamma``.

    A is computed by eigendecomposition of M, so A is symmetric positive
    definite and A @ A @ M = I to rounding.
    """
    if not (gamma > 0.0 and math.isfinite(gamma)):
        raise ConfigurationError(f"gamma must be positive and finite, got {gamma}")
    a = min(gamma, 1.0 / gamma) / 2.0
    b = 1.0 + a * a - a * gamma
    M = np.array([[1.0, -a], [-a, b + a * a]])
    evals, evecs = np.linalg.eigh(M)
    A = (evecs / np.sqrt(evals)) @ evecs.T
    return CouplingConstants(gamma=gamma, a=a, b=b, M=M, A=A)


def norm_equivalence_ratio(constants: CouplingConstants) -> float:
    """Equivalence ratio between the modified and Euclidean squared norms.

    max(2, b + 2a^2) / min(1/2, b / (1 + 2a^2)); equals 4 for every gamma.
    """
    a, b = constants.a, constants.b
    upper = max(2.0, b + 2.0 * a * a)
    lower = min(0.5, b / (1.0 + 2.0 * a * a))
    return upper / lower


def mean_field_force(params: ModelParams, x: Union[float, Array],
                     marginal: tuple[Array, Array]) -> Union[float, Array]:
    """Mean-field force -lam * sum_j w_j dK/dx(x - y_j) against weighted samples.

    ``marginal`` is a pair (points, weights) with weights summing to one
    within 1e-10 (e.g. a grid x-marginal or an empirical measure).
    """
    points, weights = marginal
    points = _as_float_array(points)
    weights = _as_float_array(weights)
    if points.shape != weights.shape or points.ndim != 1:
        raise ValueError("marginal must be a pair of equal-length 1-d arrays")
    total = weights.sum()
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"marginal weights must sum to 1 within 1e-10, got {total!r}")
    x_arr = _as_float_array(x)
    d1 = params.kernel.d1(x_arr[..., None] - points)
    out = -params.lam * (d1 @ weights)
    if np.isscalar(x) or x_arr.ndim == 0:
        return float(out)
    return out
