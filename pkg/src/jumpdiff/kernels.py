"""Jump kernels: the admissible nonlinearity class and its regularization.

A jump kernel is a symmetric, non-negative weight ``m(a, b; r)`` giving the
intensity of exchange between two locations at distance ``r`` whose current
solution values are ``a`` and ``b``.  The admissible class is pinned down by
six conditions (named A1-A6 throughout the validator and reports):

A1  non-negativity,
A2  symmetry ``m(a, b; r) = m(b, a; r)``,
A3  monotonicity ``(a-b) m(a,b;r) >= (c-d) m(c,d;r)`` for ``a>=c>=d>=b``,
A4  spatial dependence through ``r = |x - y|`` only (structural here),
A5  a radial majorant ``m_R(r)`` with finite first-moment integral
    ``K_R = int (1 ^ |y|) m_R(|y|) dy``,
A6  continuity in ``(a, b)`` and local Lipschitz continuity away from the
    diagonal ``a = b``.

Concrete families are built from a scalar nonlinearity and a radial Levy
density (decoupled form ``F(a, b) * mu(r)``), plus the variable-order family
``r^(-N - Psi(|a-b|; r))`` which cannot be decoupled.  Non-negative linear
combinations stay inside the class (it is a convex cone).

Regularization composes a kernel with a ramp in ``|a - b|`` and a spatial
cutoff at radius ``epsilon``.  The result is bounded row-wise by
``epsilon^-1 K_R`` (condition B1) and Lipschitz in the field arguments (B2),
which is what the fixed-point time stepper needs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .lattice import GridSpec, offset_distances

__all__ = [
    "ScalarFunction",
    "LevyDensity",
    "JumpKernel",
    "RegularizedKernel",
    "QuadratureDivergenceError",
    "power_odd",
    "power_abs",
    "phi_power",
    "table_function",
    "custom_function",
    "power_law_density",
    "compact_bump_density",
    "make_fractional_heat",
    "make_porous_medium",
    "make_convex_diffusion",
    "make_p_laplacian",
    "make_doubly_nonlinear",
    "make_variable_order",
    "make_zero_kernel",
    "cone_combine",
    "smooth_ramp",
    "regularize",
    "levy_constant",
    "regular_bound_M",
]

# Relative half-width of the band around a = b where decoupled difference
# quotients switch to their analytic limit (avoids catastrophic cancellation).
DIAGONAL_REL_TOL = 1e-8


class QuadratureDivergenceError(ValueError):
    """Raised when the Levy-constant quadrature fails to converge."""


# ---------------------------------------------------------------------------
# scalar nonlinearities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarFunction:
    """A 1-d nonlinearity with optional derivative and ratio-limit data.

    ``deriv`` is needed when the function is used as the ``f`` of a
    difference-quotient kernel (diagonal value ``f'(a)``);
    ``ratio_limit0 = lim_{z->0} phi(z)/z`` is needed when it is used as the
    odd nonlinearity ``phi`` acting on differences.
    """

    kind: str
    param: float | None = None
    func: Callable | None = field(default=None, repr=False)
    deriv: Callable | None = field(default=None, repr=False)
    ratio_limit0: float | None = None
    table: tuple[tuple[float, float], ...] | None = None

    def __call__(self, z):
        return self.func(np.asarray(z, dtype=float))

    @property
    def has_deriv(self) -> bool:
        return self.deriv is not None


def power_odd(m: float) -> ScalarFunction:
    """``a -> a |a|^(m-1)``: odd, non-decreasing, C^1 for m >= 1."""
    if m < 1:
        raise ValueError(f"power_odd requires m >= 1, got {m}")
    m = float(m)
    return ScalarFunction(
        kind="power_odd",
        param=m,
        func=lambda a: a * np.abs(a) ** (m - 1.0),
        deriv=lambda a: m * np.abs(a) ** (m - 1.0),
        ratio_limit0=1.0 if m == 1.0 else 0.0,
    )


def power_abs(m: float) -> ScalarFunction:
    """``a -> |a|^m``: convex and non-negative for m >= 1."""
    if m < 1:
        raise ValueError(f"power_abs requires m >= 1, got {m}")
    m = float(m)
    return ScalarFunction(
        kind="power_abs",
        param=m,
        func=lambda a: np.abs(a) ** m,
        deriv=lambda a: m * np.sign(a) * np.abs(a) ** (m - 1.0),
    )


def phi_power(p: float) -> ScalarFunction:
    """``z -> z |z|^(p-2)``: the odd power nonlinearity, admissible for p >= 2.

    For p < 2 the ratio ``phi(z)/z = |z|^(p-2)`` blows up at 0 and the
    resulting kernel violates the continuity part of A6; the constructor
    rejects it.
    """
    if p < 2:
        raise ValueError(f"phi_power requires p >= 2, got {p} (ratio phi(z)/z unbounded at 0)")
    p = float(p)
    return ScalarFunction(
        kind="phi_power",
        param=p,
        func=lambda z: z * np.abs(z) ** (p - 2.0),
        deriv=lambda z: (p - 1.0) * np.abs(z) ** (p - 2.0),
        ratio_limit0=1.0 if p == 2.0 else 0.0,
    )


def table_function(points) -> ScalarFunction:
    """Piecewise-linear interpolant through ``(x, y)`` breakpoints.

    The derivative is the slope of the containing segment (right-continuous
    at the nodes, clamped constant outside the table range).  No shape
    constraints are imposed; feeding a non-monotone table to a monotone
    kernel family is the standard way to exercise the validator.
    """
    pts = tuple(sorted((float(x), float(y)) for x, y in points))
    if len(pts) < 2:
        raise ValueError("table needs at least two breakpoints")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if np.any(np.diff(xs) <= 0):
        raise ValueError("table breakpoints must have distinct x values")
    slopes = np.diff(ys) / np.diff(xs)

    def f(z):
        return np.interp(np.asarray(z, dtype=float), xs, ys)

    def df(z):
        z = np.asarray(z, dtype=float)
        idx = np.clip(np.searchsorted(xs, z, side="right") - 1, 0, len(slopes) - 1)
        out = slopes[idx]
        return np.where((z < xs[0]) | (z > xs[-1]), 0.0, out)

    return ScalarFunction(kind="table", func=f, deriv=df, table=pts)


def custom_function(func, deriv=None, ratio_limit0=None) -> ScalarFunction:
    """Wrap an arbitrary vectorized callable; no constraints are checked."""
    return ScalarFunction(kind="custom", func=func, deriv=deriv, ratio_limit0=ratio_limit0)


# ---------------------------------------------------------------------------
# radial Levy densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevyDensity:
    """Radial density ``mu(r)`` with a finite first moment near 0."""

    kind: str
    dim: int
    amplitude: float = 1.0
    alpha: float | None = None
    r0: float | None = None

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "power_law":
            return self.amplitude * r ** (-(self.dim + self.alpha))
        # compact_bump
        return self.amplitude * (r <= self.r0).astype(float)

    @property
    def support_radius(self) -> float | None:
        return self.r0 if self.kind == "compact_bump" else None


def power_law_density(alpha: float, dim: int, amplitude: float = 1.0) -> LevyDensity:
    """``mu(r) = C r^(-dim-alpha)``; requires ``alpha`` strictly inside (0, 1).

    ``alpha >= 1`` makes the first-moment integral near 0 divergent, so the
    constructor rejects rather than warns.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"power-law order alpha must lie in (0, 1), got {alpha}")
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    if dim not in (1, 2):
        raise ValueError(f"unsupported dimension {dim}")
    return LevyDensity(kind="power_law", dim=int(dim), amplitude=float(amplitude), alpha=float(alpha))


def compact_bump_density(r0: float, dim: int, amplitude: float = 1.0) -> LevyDensity:
    """``mu(r) = C`` for ``r <= r0``, zero beyond; trivially integrable."""
    if r0 <= 0:
        raise ValueError("support radius r0 must be positive")
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    if dim not in (1, 2):
        raise ValueError(f"unsupported dimension {dim}")
    return LevyDensity(kind="compact_bump", dim=int(dim), amplitude=float(amplitude), r0=float(r0))


# ---------------------------------------------------------------------------
# jump kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpKernel:
    """Evaluator ``m(a, b; r)`` together with its radial majorant.

    ``eval`` and ``majorant`` are pure, reentrant and fully vectorized over
    broadcastable array arguments; the operator module calls them from hot
    loops.  ``dim`` is the spatial dimension baked into the radial part
    (``None`` for dimension-free kernels such as the zero kernel).
    """

    name: str
    dim: int | None
    eval_fn: Callable = field(repr=False)
    majorant_fn: Callable = field(repr=False)
    params: dict = field(default_factory=dict)
    support_radius: float | None = None

    def eval(self, a, b, r):
        return self.eval_fn(np.asarray(a, dtype=float), np.asarray(b, dtype=float), np.asarray(r, dtype=float))

    def majorant(self, R: float, r):
        return self.majorant_fn(float(R), np.asarray(r, dtype=float))


def _diagonal_mask(a, b):
    return np.abs(a - b) < DIAGONAL_REL_TOL * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


def _difference_quotient(f: ScalarFunction, a, b):
    """``(f(a) - f(b)) / (a - b)`` with the analytic limit ``f'(a)`` on the diagonal."""
    small = _diagonal_mask(a, b)
    denom = np.where(small, 1.0, a - b)
    quot = (f(a) - f(b)) / denom
    return np.where(small, f.deriv(a), quot)


def make_fractional_heat(alpha: float, amplitude: float = 1.0, dim: int = 1) -> JumpKernel:
    """Constant-in-(a, b) power-law kernel ``C r^(-dim-alpha)``.

    This is the linear model case; the induced evolution is the linear
    fractional heat flow, which makes it the reference kernel for oracle
    comparisons.
    """
    mu = power_law_density(alpha, dim, amplitude)

    def ev(a, b, r):
        shape = np.broadcast_shapes(np.shape(a), np.shape(b), np.shape(r))
        return np.broadcast_to(mu(r), shape) if shape else mu(r)

    return JumpKernel(
        name="fractional_heat",
        dim=dim,
        eval_fn=ev,
        majorant_fn=lambda R, r: mu(r),
        params={"alpha": float(alpha), "amplitude": float(amplitude)},
    )


def _f_sup_deriv(f: ScalarFunction, R: float) -> float:
    """Upper bound for ``sup_{|a|,|b|<=R} (f(a)-f(b))/(a-b)``."""
    if f.kind == "power_odd":
        return f.param * R ** (f.param - 1.0)
    # generic monotone f: estimate sup f' on a dense grid (documented estimate)
    grid = np.linspace(-R, R, 4097)
    return float(np.max(f.deriv(grid)))


def make_porous_medium(f: ScalarFunction, mu: LevyDensity) -> JumpKernel:
    """Difference-quotient kernel ``[(f(a)-f(b))/(a-b)] mu(r)``.

    ``f`` must be non-decreasing and differentiable; the diagonal value is
    the analytic limit ``f'(a)``.  With ``f(a) = a|a|^(m-1)`` and a power-law
    density this is the fractional porous-medium nonlinearity.
    """
    if not f.has_deriv:
        raise ValueError(f"porous-medium kernel needs a scalar function with a derivative rule; {f.kind!r} has none")

    def ev(a, b, r):
        return _difference_quotient(f, a, b) * mu(r)

    def maj(R, r):
        return _f_sup_deriv(f, R) * mu(r)

    return JumpKernel(
        name="porous_medium",
        dim=mu.dim,
        eval_fn=ev,
        majorant_fn=maj,
        params={"f": f, "mu": mu},
        support_radius=mu.support_radius,
    )


def make_convex_diffusion(f: ScalarFunction, mu: LevyDensity) -> JumpKernel:
    """Sum-form kernel ``[f(a) + f(b)] mu(r)`` for convex non-negative ``f``."""
    if f.kind == "power_odd":
        raise ValueError("convex-diffusion kernel needs a convex non-negative f; odd powers are signed")

    def ev(a, b, r):
        return (f(a) + f(b)) * mu(r)

    def maj(R, r):
        fsup = float(max(f(np.asarray(R)), f(np.asarray(-R))))
        return 2.0 * fsup * mu(r)

    return JumpKernel(
        name="convex_diffusion",
        dim=mu.dim,
        eval_fn=ev,
        majorant_fn=maj,
        params={"f": f, "mu": mu},
        support_radius=mu.support_radius,
    )


def make_p_laplacian(phi: ScalarFunction, mu: LevyDensity) -> JumpKernel:
    """Kernel ``[phi(a-b)/(a-b)] mu(r)`` for odd non-decreasing ``phi``.

    Requires a finite limit of ``phi(z)/z`` at 0 (for the built-in power
    ``phi`` this means p >= 2; p = 2 reduces to the linear kernel).
    """
    if phi.ratio_limit0 is None:
        raise ValueError("p-laplacian kernel needs the limit of phi(z)/z at 0 (ratio_limit0)")
    lim0 = float(phi.ratio_limit0)

    def ev(a, b, r):
        z = a - b
        small = _diagonal_mask(a, b)
        denom = np.where(small, 1.0, z)
        quot = phi(z) / denom
        return np.where(small, lim0, quot) * mu(r)

    if phi.kind == "phi_power":
        p = phi.param

        def fsup(R):
            return max((2.0 * R) ** (p - 2.0), lim0)

    else:
        def fsup(R):
            zs = np.linspace(-2.0 * R, 2.0 * R, 4097)
            zs = zs[np.abs(zs) > 1e-12]
            return max(float(np.max(np.abs(phi(zs) / zs))), lim0)

    def maj(R, r):
        return fsup(R) * mu(r)

    return JumpKernel(
        name="p_laplacian",
        dim=mu.dim,
        eval_fn=ev,
        majorant_fn=maj,
        params={"phi": phi, "mu": mu},
        support_radius=mu.support_radius,
    )


def make_doubly_nonlinear(f: ScalarFunction, phi: ScalarFunction, mu: LevyDensity) -> JumpKernel:
    """Composed kernel ``[phi(f(a)-f(b))/(a-b)] mu(r)``.

    Reduces to the porous-medium form for ``phi = identity`` and to the
    p-laplacian form for ``f = identity``.  Diagonal value is the chain
    limit ``ratio_limit0(phi) * f'(a)``.
    """
    if not f.has_deriv:
        raise ValueError("doubly-nonlinear kernel needs f with a derivative rule")
    if phi.ratio_limit0 is None:
        raise ValueError("doubly-nonlinear kernel needs the limit of phi(z)/z at 0")
    lim0 = float(phi.ratio_limit0)

    def ev(a, b, r):
        small = _diagonal_mask(a, b)
        denom = np.where(small, 1.0, a - b)
        quot = phi(f(a) - f(b)) / denom
        return np.where(small, lim0 * f.deriv(a), quot) * mu(r)

    def maj(R, r):
        fs = _f_sup_deriv(f, R)
        fmax = float(np.max(np.abs(f(np.array([-R, 0.0, R])))))
        if phi.kind == "phi_power":
            ratio_sup = max((2.0 * fmax) ** (phi.param - 2.0), lim0)
        else:
            zs = np.linspace(-2.0 * fmax, 2.0 * fmax, 4097)
            zs = zs[np.abs(zs) > 1e-12]
            ratio_sup = max(float(np.max(np.abs(phi(zs) / zs))), lim0) if zs.size else lim0
        return ratio_sup * fs * mu(r)

    return JumpKernel(
        name="doubly_nonlinear",
        dim=mu.dim,
        eval_fn=ev,
        majorant_fn=maj,
        params={"f": f, "phi": phi, "mu": mu},
        support_radius=mu.support_radius,
    )


def make_variable_order(psi1, psi2, theta, A1: float, A2: float, dim: int = 1) -> JumpKernel:
    """Entangled kernel ``r^(-dim - Psi(|a-b|; r))`` with variable order.

    ``Psi(s; r) = psi1(s)`` for ``r < 1``, ``psi2(s)`` for ``r >= 1``, plus
    ``theta(r)``; ``psi1`` non-decreasing, ``psi2`` non-increasing, and the
    total order must stay inside ``[A1, A2]`` with ``0 < A1 <= A2 < 1``.
    The majorant carries a logarithmic correction:
    ``(r^(-dim-A2) 1_{r<1} + r^(-dim-A1) 1_{r>=1}) * max(1, |log r|)``.
    """
    if not (0.0 < A1 <= A2 < 1.0):
        raise ValueError(f"order bounds must satisfy 0 < A1 <= A2 < 1, got A1={A1}, A2={A2}")
    if dim not in (1, 2):
        raise ValueError(f"unsupported dimension {dim}")

    def ev(a, b, r):
        s = np.abs(a - b)
        r = np.asarray(r, dtype=float)
        order = np.where(r < 1.0, psi1(s), psi2(s)) + theta(r)
        return r ** (-(dim + order))

    def maj(R, r):
        r = np.asarray(r, dtype=float)
        core = np.where(r < 1.0, r ** (-(dim + A2)), r ** (-(dim + A1)))
        with np.errstate(divide="ignore"):
            logr = np.abs(np.log(r))
        return core * np.maximum(1.0, logr)

    return JumpKernel(
        name="variable_order",
        dim=dim,
        eval_fn=ev,
        majorant_fn=maj,
        params={"A1": float(A1), "A2": float(A2), "psi1": psi1, "psi2": psi2, "theta": theta},
    )


def make_zero_kernel(dim: int | None = None) -> JumpKernel:
    """The trivial kernel ``m = 0``; the induced flow is ``u(t) = u0``."""

    def ev(a, b, r):
        return np.zeros(np.broadcast_shapes(np.shape(a), np.shape(b), np.shape(r)))

    def maj(R, r):
        return np.zeros(np.shape(r))

    return JumpKernel(name="zero", dim=dim, eval_fn=ev, majorant_fn=maj, support_radius=0.0)


def cone_combine(alpha: float, k1: JumpKernel, beta: float, k2: JumpKernel) -> JumpKernel:
    """Non-negative combination ``alpha*k1 + beta*k2`` (the class is a cone)."""
    if alpha < 0 or beta < 0:
        raise ValueError("cone coefficients must be non-negative")
    if k1.dim is not None and k2.dim is not None and k1.dim != k2.dim:
        raise ValueError(f"cannot combine kernels of dimensions {k1.dim} and {k2.dim}")
    dim = k1.dim if k1.dim is not None else k2.dim
    if k1.support_radius is None or k2.support_radius is None:
        support = None
    else:
        support = max(k1.support_radius, k2.support_radius)

    def ev(a, b, r):
        return alpha * k1.eval_fn(a, b, r) + beta * k2.eval_fn(a, b, r)

    def maj(R, r):
        return alpha * k1.majorant_fn(R, r) + beta * k2.majorant_fn(R, r)

    return JumpKernel(
        name=f"cone({alpha}*{k1.name}+{beta}*{k2.name})",
        dim=dim,
        eval_fn=ev,
        majorant_fn=maj,
        params={"alpha": float(alpha), "beta": float(beta), "k1": k1, "k2": k2},
        support_radius=support,
    )


# ---------------------------------------------------------------------------
# regularization
# ---------------------------------------------------------------------------


def smooth_ramp(epsilon: float, x):
    """Quintic smoothstep ramp: 0 for ``x <= eps/2``, 1 for ``x >= eps``.

    C^2 at the knots, monotone in between, with value 1/2 at ``3 eps / 4``.
    """
    if not (0.0 < epsilon <= 1.0):
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    x = np.asarray(x, dtype=float)
    t = np.clip((x - epsilon / 2.0) / (epsilon / 2.0), 0.0, 1.0)
    out = t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RegularizedKernel:
    """Base kernel times ``ramp(|a-b|)`` and the spatial cutoff ``r >= eps``.

    The modified kernel vanishes for ``r < eps`` or ``|a-b| <= eps/2``,
    agrees with the base kernel for ``r >= eps`` and ``|a-b| >= eps``, and
    never exceeds it.  Symmetry and monotonicity are inherited because the
    ramp is a non-decreasing function of ``|a-b|``.
    """

    base: JumpKernel
    epsilon: float

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    @property
    def dim(self) -> int | None:
        return self.base.dim

    def eval(self, a, b, r):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        r = np.asarray(r, dtype=float)
        ramp = smooth_ramp(self.epsilon, np.abs(a - b))
        gate = np.asarray(ramp) * (r >= self.epsilon)
        active = gate > 0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            raw = self.base.eval_fn(a, b, r)
        out = np.where(active, np.asarray(raw) * gate, 0.0)
        return out if out.ndim else float(out)

    def majorant(self, R: float, r):
        r = np.asarray(r, dtype=float)
        return self.base.majorant_fn(float(R), r) * (r >= self.epsilon)


def regularize(kernel: JumpKernel, epsilon: float) -> RegularizedKernel:
    """Compose a kernel with the ramp/cutoff pair at scale ``epsilon``."""
    return RegularizedKernel(base=kernel, epsilon=float(epsilon))


# ---------------------------------------------------------------------------
# Levy constant and row-sum bounds
# ---------------------------------------------------------------------------


def _sphere_factor(dim: int):
    if dim == 1:
        return lambda r: 2.0
    return lambda r: 2.0 * math.pi * r


def _checked_quad(f, lo, hi, what: str) -> float:
    if hi <= lo:
        return 0.0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        value, abserr = integrate.quad(f, lo, hi, limit=200)
    messages = [str(w.message) for w in caught if issubclass(w.category, integrate.IntegrationWarning)]
    if messages or not math.isfinite(value) or value < -1e-12:
        raise QuadratureDivergenceError(
            f"{what} quadrature on [{lo}, {hi}] did not converge"
            + (f": {messages[0]}" if messages else f" (value {value})")
        )
    if abserr > max(1e-8, 1e-5 * abs(value)):
        raise QuadratureDivergenceError(
            f"{what} quadrature on [{lo}, {hi}] has unreliable error estimate {abserr:.3e} for value {value:.6e}"
        )
    return float(value)


def levy_constant(kernel, R: float, r_max: float = math.inf) -> tuple[float, float]:
    """First-moment integral ``K_R`` of the majorant, truncated at ``r_max``.

    Returns ``(K_R, tail)`` where ``tail`` estimates the part of the full
    integral dropped beyond ``r_max`` (``inf`` if it diverges there).  The
    radial reduction uses the exact sphere-area factor (2 in 1-d,
    ``2 pi r`` in 2-d) and the integrable singularity at 0 is handled by the
    adaptive rule; a genuinely divergent integrand (e.g. a power-law order
    smuggled past the constructors) raises
    :class:`QuadratureDivergenceError`.
    """
    dim = kernel.dim if kernel.dim is not None else 1
    surf = _sphere_factor(dim)

    def integrand(r):
        return min(1.0, r) * float(kernel.majorant(R, r)) * surf(r)

    support = getattr(kernel, "support_radius", None)
    if support is None:
        support = getattr(getattr(kernel, "base", None), "support_radius", None)
    upper = r_max if support is None else min(r_max, support)
    if upper <= 0:
        return 0.0, 0.0

    value = _checked_quad(integrand, 0.0, min(1.0, upper), "Levy constant")
    if upper > 1.0:
        value += _checked_quad(integrand, 1.0, upper, "Levy constant")

    tail = 0.0
    if math.isfinite(r_max):
        tail_upper = math.inf if support is None else support
        if tail_upper > r_max:
            try:
                tail = _checked_quad(integrand, r_max, tail_upper, "Levy tail")
            except QuadratureDivergenceError:
                tail = math.inf
    return value, tail


def regular_bound_M(regkernel: RegularizedKernel, R: float, grid: GridSpec | None = None) -> float:
    """Certified upper bound for the row sums of the assembled kernel.

    Combines the analytic bound ``eps^-1 K_R`` with, when a grid is given,
    the direct lattice sum of the majorant over offsets with ``r >= eps``
    (whichever is smaller).  Every actual row sum with field values in
    ``[-R, R]`` is dominated by both.
    """
    eps = regkernel.epsilon
    try:
        k_r, _ = levy_constant(regkernel.base, R)
        analytic = k_r / eps
    except QuadratureDivergenceError:
        analytic = math.inf
    if grid is None:
        return analytic
    dists = offset_distances(grid)
    keep = dists >= eps
    keep[0] = False
    maj = np.asarray(regkernel.base.majorant(R, dists[keep]), dtype=float)
    lattice_sum = float(math.fsum(maj) * grid.cell_volume)
    return min(analytic, lattice_sum)
