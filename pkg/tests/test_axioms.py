import numpy as np
import pytest

from jumpdiff.axioms import check_axioms, check_regular, replay_violation
from jumpdiff.kernels import (
    compact_bump_density,
    custom_function,
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
    regularize,
)
from jumpdiff.lattice import make_grid


def zoo_kernels(dim=1, alpha=0.5):
    mu = power_law_density(alpha, dim)
    psi1 = lambda s: 0.25 - 0.25 * np.exp(-np.asarray(s, dtype=float))
    psi2 = lambda s: np.zeros_like(np.asarray(s, dtype=float))
    theta = lambda z: np.full_like(np.asarray(z, dtype=float), 0.25)
    return [
        make_fractional_heat(alpha, 1.0, dim),
        make_porous_medium(power_odd(2.0), mu),
        make_convex_diffusion(power_abs(2.0), mu),
        make_p_laplacian(phi_power(3.0), mu),
        make_doubly_nonlinear(power_odd(2.0), phi_power(3.0), mu),
        make_variable_order(psi1, psi2, theta, 0.25, 0.5, dim),
    ]


def non_monotone_violator():
    """f(a) = -a smuggled past the monotonicity requirement."""
    f = custom_function(lambda a: -np.asarray(a, dtype=float),
                        deriv=lambda a: -np.ones_like(np.asarray(a, dtype=float)))
    return make_porous_medium(f, compact_bump_density(1e9, dim=1))


def subquadratic_phi_violator():
    """phi(z) = z |z|^(-1/2) (p = 1.5): the ratio phi(z)/z blows up at 0."""
    p = 1.5
    phi = custom_function(
        lambda z: np.asarray(z, dtype=float) * np.abs(z) ** (p - 2.0),
        ratio_limit0=0.0,
    )
    return make_p_laplacian(phi, compact_bump_density(1e9, dim=1))


def by_axiom(reports):
    return {r.axiom: r for r in reports}


class TestZooPasses:
    @pytest.mark.parametrize("idx", range(6))
    def test_zoo_kernel_passes_all_axioms(self, idx):
        k = zoo_kernels()[idx]
        reports = by_axiom(check_axioms(k, R=1.0, epsilon=0.1, sample_budget=2000, seed=0))
        failed = [a for a, r in reports.items() if r.verdict != "pass"]
        assert not failed, f"{k.name}: unexpected verdicts {failed}"


class TestPlantedViolators:
    def test_non_monotone_f_fails_a1_with_witness(self):
        k = non_monotone_violator()
        reports = by_axiom(check_axioms(k, R=1.0, epsilon=0.1, sample_budget=2000, seed=0))
        r = reports["A1"]
        assert r.verdict == "fail"
        assert replay_violation(k, r) > r.tolerance

    def test_subquadratic_phi_fails_a6_with_witness(self):
        k = subquadratic_phi_violator()
        reports = by_axiom(check_axioms(k, R=1.0, epsilon=0.1, sample_budget=2000, seed=0))
        r = reports["A6"]
        assert r.verdict == "fail"
        assert replay_violation(k, r) > 1.0  # ratio far above any bounded constant


class TestDeterminismAndNesting:
    def test_same_seed_same_reports(self):
        k = zoo_kernels()[1]
        r1 = check_axioms(k, R=1.0, epsilon=0.1, sample_budget=1500, seed=9)
        r2 = check_axioms(k, R=1.0, epsilon=0.1, sample_budget=1500, seed=9)
        assert r1 == r2

    def test_worst_violation_monotone_in_budget(self):
        k = non_monotone_violator()
        worsts = []
        for budget in (1000, 2000, 4000):
            reports = by_axiom(check_axioms(k, R=1.0, epsilon=0.1, sample_budget=budget, seed=3))
            worsts.append(reports["A1"].worst_violation)
        assert worsts[0] <= worsts[1] <= worsts[2]

    def test_rejects_tiny_budget(self):
        with pytest.raises(ValueError):
            check_axioms(make_zero_kernel(1), R=1.0, epsilon=0.1, sample_budget=10, seed=0)


class TestCheckRegular:
    def test_zero_kernel_bound_zero_pass(self):
        g = make_grid(1, 16, 4.0)
        reports = by_axiom(check_regular(regularize(make_zero_kernel(1), 0.25), g, R=1.0, seed=0))
        assert reports["B1"].verdict == "pass"
        assert reports["B1"].estimate == 0.0
        assert reports["B2"].verdict == "pass"

    def test_fractional_heat_rows_below_certified_bound(self):
        g = make_grid(1, 32, 4.0)
        eps = g.spacing
        reg = regularize(make_fractional_heat(0.5, 1.0, dim=1), eps)
        reports = by_axiom(check_regular(reg, g, R=1.0, seed=1))
        assert reports["B1"].verdict == "pass"
        assert reports["B2"].verdict == "pass"
        assert np.isfinite(reports["B2"].estimate)

    def test_bare_singular_kernel_fails_b1_under_refinement(self):
        g = make_grid(1, 16, 4.0)
        k = make_fractional_heat(0.5, 1.0, dim=1)
        reports = by_axiom(check_regular(k, g, R=1.0, seed=2))
        r = reports["B1"]
        assert r.verdict == "fail"
        assert replay_violation(k, r) >= r.tolerance

    def test_bare_integrable_kernel_passes_b1(self):
        g = make_grid(1, 16, 4.0)
        k = make_p_laplacian(phi_power(2.0), compact_bump_density(1.0, dim=1))
        reports = by_axiom(check_regular(k, g, R=1.0, seed=2))
        assert reports["B1"].verdict == "pass"
