import math

import numpy as np
import pytest

from jumpdiff.kernels import (
    QuadratureDivergenceError,
    compact_bump_density,
    cone_combine,
    custom_function,
    levy_constant,
    make_convex_diffusion,
    make_doubly_nonlinear,
    make_fractional_heat,
    make_p_laplacian,
    make_porous_medium,
    make_variable_order,
    make_zero_kernel,
    phi_power,
    power_abs,
    power_law_density,
    power_odd,
    regular_bound_M,
    regularize,
    smooth_ramp,
    table_function,
)
from jumpdiff.lattice import make_grid, offset_distances

MU1 = compact_bump_density(1e9, dim=1)  # mu == 1 on every relevant distance


def sample_quadruples(rng, R, n):
    q = np.sort(rng.uniform(-R, R, size=(n, 4)), axis=1)[:, ::-1]
    return q[:, 0], q[:, 1], q[:, 2], q[:, 3]


class TestFractionalHeat:
    def test_power_values(self):
        k = make_fractional_heat(0.5, 1.0, dim=1)
        assert k.eval(3.0, -2.0, 1.0) == 1.0
        # r^(-N-alpha) at r = 4: 4^(-1.5) = 1/8
        assert k.eval(0.0, 0.0, 4.0) == pytest.approx(0.125, rel=1e-15)

    def test_independent_of_field_values(self):
        k = make_fractional_heat(0.7, 2.0, dim=2)
        vals = k.eval(np.array([-3.0, 0.0, 5.0]), np.array([1.0, 1.0, 1.0]), 2.0)
        assert np.all(vals == vals[0])

    def test_rejects_alpha_outside_unit_interval(self):
        for alpha in (1.5, 1.0, 0.0, -0.3):
            with pytest.raises(ValueError):
                make_fractional_heat(alpha)


class TestPorousMedium:
    def test_difference_quotient_values(self):
        k = make_porous_medium(power_odd(2.0), MU1)
        assert k.eval(2.0, 1.0, 0.5) == pytest.approx(3.0, rel=1e-15)
        assert k.eval(2.0, 2.0, 0.5) == pytest.approx(4.0, rel=1e-15)  # f'(2) = 2|2|
        assert k.eval(2.0, -1.0, 0.5) == pytest.approx(5.0 / 3.0, rel=1e-15)

    def test_diagonal_limit_no_cancellation(self):
        k = make_porous_medium(power_odd(3.0), MU1)
        a = 1.2345
        assert k.eval(a, a * (1 + 1e-13), 1.0) == pytest.approx(3 * a * a, rel=1e-10)

    def test_rejects_f_without_derivative(self):
        with pytest.raises(ValueError):
            make_porous_medium(custom_function(lambda a: a), MU1)


class TestConvexDiffusion:
    def test_sum_form(self):
        k = make_convex_diffusion(power_abs(2.0), MU1)
        assert k.eval(2.0, 1.0, 1.0) == pytest.approx(5.0, rel=1e-15)
        assert k.eval(0.0, 0.0, 1.0) == 0.0

    def test_symmetric_by_construction(self):
        k = make_convex_diffusion(power_abs(3.0), MU1)
        rng = np.random.default_rng(0)
        a, b = rng.uniform(-2, 2, size=(2, 500))
        assert np.array_equal(k.eval(a, b, 1.0), k.eval(b, a, 1.0))


class TestPLaplacian:
    def test_ratio_values(self):
        k = make_p_laplacian(phi_power(3.0), MU1)
        assert k.eval(3.0, 1.0, 1.0) == pytest.approx(2.0, rel=1e-15)
        assert k.eval(0.7, 0.7, 1.0) == 0.0  # limit for p > 2

    def test_p_two_reduces_to_linear(self):
        k = make_p_laplacian(phi_power(2.0), MU1)
        rng = np.random.default_rng(1)
        a, b = rng.uniform(-5, 5, size=(2, 200))
        assert np.allclose(k.eval(a, b, 1.0), 1.0, rtol=0, atol=0)

    def test_rejects_p_below_two(self):
        with pytest.raises(ValueError):
            phi_power(1.5)


class TestDoublyNonlinear:
    def test_reduces_to_p_laplacian_with_identity_f(self):
        rng = np.random.default_rng(2)
        dn = make_doubly_nonlinear(power_odd(1.0), phi_power(3.0), MU1)
        pl = make_p_laplacian(phi_power(3.0), MU1)
        a, b = rng.uniform(-2, 2, size=(2, 300))
        assert np.allclose(dn.eval(a, b, 1.0), pl.eval(a, b, 1.0), rtol=1e-14)

    def test_reduces_to_porous_medium_with_identity_phi(self):
        rng = np.random.default_rng(3)
        dn = make_doubly_nonlinear(power_odd(2.0), phi_power(2.0), MU1)
        pm = make_porous_medium(power_odd(2.0), MU1)
        a, b = rng.uniform(-2, 2, size=(2, 300))
        assert np.allclose(dn.eval(a, b, 1.0), pm.eval(a, b, 1.0), rtol=1e-14)

    def test_direct_evaluation_oracle(self):
        # phi(f(2) - f(1)) / (2 - 1) with f = a|a|, phi = z|z|: phi(3) = 9
        dn = make_doubly_nonlinear(power_odd(2.0), phi_power(3.0), MU1)
        assert dn.eval(2.0, 1.0, 1.0) == pytest.approx(9.0, rel=1e-15)


class TestVariableOrder:
    @staticmethod
    def _kernel():
        psi1 = lambda s: 0.25 - 0.25 * np.exp(-np.asarray(s, dtype=float))
        psi2 = lambda s: np.zeros_like(np.asarray(s, dtype=float))
        theta = lambda z: np.full_like(np.asarray(z, dtype=float), 0.25)
        return make_variable_order(psi1, psi2, theta, 0.25, 0.5, dim=1)

    def test_direct_power_oracle(self):
        k = self._kernel()
        # on the diagonal the order is theta = 1/4, so value = 0.5^(-1.25)
        assert k.eval(1.0, 1.0, 0.5) == pytest.approx(0.5 ** (-1.25), rel=1e-15)
        assert k.eval(1.0, 1.0, 0.5) == pytest.approx(2.3784, rel=1e-4)

    def test_unit_distance_is_one(self):
        k = self._kernel()
        for a, b in [(0.0, 0.0), (1.0, -1.0), (0.3, 0.9)]:
            assert k.eval(a, b, 1.0) == 1.0

    def test_majorant_log_factor(self):
        k = self._kernel()
        e = math.e
        assert k.majorant(1.0, e) == pytest.approx(e ** (-1.25) * 1.0, rel=1e-12)
        assert k.majorant(1.0, 0.5) == pytest.approx(0.5 ** (-1.5) * max(1.0, abs(math.log(0.5))), rel=1e-12)

    def test_rejects_bad_bounds(self):
        f = lambda s: np.zeros_like(np.asarray(s, dtype=float))
        for a1, a2 in [(0.0, 0.5), (0.3, 1.0), (0.6, 0.4)]:
            with pytest.raises(ValueError):
                make_variable_order(f, f, f, a1, a2)


class TestConeCombine:
    def test_degenerate_coefficients(self):
        k1 = make_fractional_heat(0.5, 1.0)
        k2 = make_porous_medium(power_odd(2.0), power_law_density(0.3, 1))
        rng = np.random.default_rng(4)
        a, b = rng.uniform(-1, 1, size=(2, 100))
        r = 10.0 ** rng.uniform(-2, 1, size=100)
        only_first = cone_combine(1.0, k1, 0.0, k2)
        assert np.allclose(only_first.eval(a, b, r), k1.eval(a, b, r), rtol=0, atol=0)
        nothing = cone_combine(0.0, k1, 0.0, k2)
        assert np.all(nothing.eval(a, b, r) == 0.0)

    def test_rejects_negative_coefficients(self):
        k = make_fractional_heat(0.5)
        with pytest.raises(ValueError):
            cone_combine(-1.0, k, 1.0, k)

    def test_monotonicity_preserved(self):
        k1 = make_porous_medium(power_odd(2.0), MU1)
        k2 = make_p_laplacian(phi_power(3.0), MU1)
        combo = cone_combine(0.7, k1, 1.3, k2)
        rng = np.random.default_rng(5)
        a, c, d, b = sample_quadruples(rng, 2.0, 2000)
        r = 10.0 ** rng.uniform(-1, 1, size=2000)
        outer = (a - b) * combo.eval(a, b, r)
        inner = (c - d) * combo.eval(c, d, r)
        scale = max(1.0, float(np.max(np.abs(outer))))
        assert np.all(inner <= outer + 1e-12 * scale)


class TestZeroKernel:
    def test_everything_vanishes(self):
        k = make_zero_kernel()
        assert np.all(k.eval(np.linspace(-1, 1, 7), 0.5, 2.0) == 0.0)
        value, tail = levy_constant(k, 5.0)
        assert value == 0.0 and tail == 0.0


class TestLevyConstant:
    def test_fractional_heat_analytic_oracle(self):
        # 2 * (int_0^1 r^(-1/2) dr + int_1^inf r^(-3/2) dr) = 2 * (2 + 2) = 8
        k = make_fractional_heat(0.5, 1.0, dim=1)
        value, tail = levy_constant(k, 1.0, r_max=math.inf)
        assert value == pytest.approx(8.0, rel=1e-3)
        assert tail == 0.0

    def test_truncation_tail_reported(self):
        k = make_fractional_heat(0.5, 1.0, dim=1)
        value, tail = levy_constant(k, 1.0, r_max=100.0)
        # dropped mass: 2 * int_100^inf r^(-3/2) = 4 / 10
        assert tail == pytest.approx(0.4, rel=1e-6)
        assert value + tail == pytest.approx(8.0, rel=1e-3)

    def test_cone_additivity(self):
        k1 = make_fractional_heat(0.5, 1.0, dim=1)
        k2 = make_fractional_heat(0.8, 2.0, dim=1)
        combo = cone_combine(2.0, k1, 3.0, k2)
        v, _ = levy_constant(combo, 1.0)
        v1, _ = levy_constant(k1, 1.0)
        v2, _ = levy_constant(k2, 1.0)
        assert v == pytest.approx(2 * v1 + 3 * v2, rel=1e-9)

    def test_reports_divergence_for_smuggled_order(self):
        from jumpdiff.kernels import JumpKernel

        bad = JumpKernel(
            name="bad",
            dim=1,
            eval_fn=lambda a, b, r: r ** -2.2,
            majorant_fn=lambda R, r: np.asarray(r, dtype=float) ** -2.2,
        )
        with pytest.raises(QuadratureDivergenceError):
            levy_constant(bad, 1.0)

    def test_2d_sphere_factor(self):
        # 2 pi * (int_0^1 r^(-0.5) r dr ... ) for alpha = 0.5, N = 2:
        # integrand (1^r) r^(-2.5) * 2 pi r: inner: 2pi int_0^1 r^(-0.5) = 4pi;
        # outer: 2pi int_1^inf r^(-1.5) = 4pi; total 8pi.
        k = make_fractional_heat(0.5, 1.0, dim=2)
        value, _ = levy_constant(k, 1.0)
        assert value == pytest.approx(8 * math.pi, rel=1e-3)


class TestSmoothRamp:
    def test_knot_values(self):
        for eps in (1.0, 0.25, 0.01):
            assert smooth_ramp(eps, eps / 2) == 0.0
            assert smooth_ramp(eps, eps) == 1.0
            assert smooth_ramp(eps, 0.75 * eps) == pytest.approx(0.5, rel=1e-15)
            assert smooth_ramp(eps, 0.0) == 0.0
            assert smooth_ramp(eps, 10 * eps) == 1.0

    def test_monotone(self):
        xs = np.linspace(0, 1.2, 500)
        ys = smooth_ramp(1.0, xs)
        assert np.all(np.diff(ys) >= 0)

    def test_rejects_bad_epsilon(self):
        for eps in (0.0, -1.0, 1.5):
            with pytest.raises(ValueError):
                smooth_ramp(eps, 0.5)


class TestRegularize:
    def test_spatial_cutoff(self):
        reg = regularize(make_fractional_heat(0.5), 0.5)
        assert reg.eval(10.0, -10.0, 0.4) == 0.0
        assert reg.eval(10.0, -10.0, 0.5) > 0.0

    def test_dead_band_in_value_difference(self):
        reg = regularize(make_porous_medium(power_odd(2.0), MU1), 0.5)
        assert reg.eval(1.0, 1.2, 1.0) == 0.0  # |a-b| = 0.2 < eps/2
        base = make_porous_medium(power_odd(2.0), MU1)
        assert reg.eval(1.0, 2.0, 1.0) == base.eval(1.0, 2.0, 1.0)  # saturated ramp

    def test_never_exceeds_base_and_inherits_axioms(self):
        base = make_porous_medium(power_odd(2.0), MU1)
        reg = regularize(base, 0.3)
        rng = np.random.default_rng(6)
        a, b = rng.uniform(-2, 2, size=(2, 3000))
        r = 10.0 ** rng.uniform(-1, 1, size=3000)
        ev_reg = reg.eval(a, b, r)
        ev_base = base.eval(a, b, r)
        assert np.all(ev_reg >= 0.0)
        assert np.all(ev_reg <= ev_base + 1e-15)
        assert np.array_equal(ev_reg, reg.eval(b, a, r))
        aa, cc, dd, bb = sample_quadruples(rng, 2.0, 3000)
        rr = 10.0 ** rng.uniform(-1, 1, size=3000)
        outer = (aa - bb) * reg.eval(aa, bb, rr)
        inner = (cc - dd) * reg.eval(cc, dd, rr)
        scale = max(1.0, float(np.max(np.abs(outer))))
        assert np.all(inner <= outer + 1e-12 * scale)

    def test_rejects_epsilon_outside_unit_interval(self):
        with pytest.raises(ValueError):
            regularize(make_fractional_heat(0.5), 1.5)


class TestRegularBoundM:
    def test_zero_kernel(self):
        g = make_grid(1, 8, 8.0)
        assert regular_bound_M(regularize(make_zero_kernel(1), 1.0), 1.0, g) == 0.0

    def test_lattice_sum_oracle(self):
        # M = 8, L = 8, h = 1, eps = 1: minimal-image distances per offset are
        # {1,2,3,4,3,2,1}; the bound is the smaller of the direct sum of
        # r^(-1.5) over those and eps^(-1) K_R.
        g = make_grid(1, 8, 8.0)
        k = make_fractional_heat(0.5, 1.0, dim=1)
        reg = regularize(k, 1.0)
        dists = offset_distances(g)[1:]
        direct = sum(float(d) ** -1.5 for d in dists) * g.spacing
        analytic = levy_constant(k, 1.0)[0] / 1.0
        assert regular_bound_M(reg, 1.0, g) == pytest.approx(min(direct, analytic), rel=1e-9)

    def test_without_grid_uses_analytic_bound(self):
        k = make_fractional_heat(0.5, 1.0, dim=1)
        reg = regularize(k, 0.5)
        assert regular_bound_M(reg, 1.0) == pytest.approx(8.0 / 0.5, rel=1e-3)


class TestTableFunction:
    def test_interpolation_and_slopes(self):
        f = table_function([(-1.0, -1.0), (0.0, 0.0), (1.0, 2.0)])
        assert f(0.5) == pytest.approx(1.0)
        assert f.deriv(0.5) == pytest.approx(2.0)
        assert f.deriv(-0.5) == pytest.approx(1.0)

    def test_rejects_degenerate_tables(self):
        with pytest.raises(ValueError):
            table_function([(0.0, 1.0)])
        with pytest.raises(ValueError):
            table_function([(0.0, 1.0), (0.0, 2.0)])
