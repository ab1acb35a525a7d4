import math

import numpy as np
import pytest

from hardylab.analytic import (
    Criticality,
    CrossSection,
    classify_coupling,
    cone_spectrum,
    critical_log_profile,
    cross_section_eigenpair,
    euler_residual,
    exponents,
    hardy_constant,
    separated_solution,
    solution_cone_dimension,
    truncated_cone_mu,
    wider_cone_comparison,
)
from hardylab.errors import DomainError, SupercriticalCouplingError


def finite_difference_dirichlet(theta: float, n: int = 400) -> float:
    h = theta / n
    main = np.full(n - 1, 2.0 / h**2)
    off = np.full(n - 2, -1.0 / h**2)
    return float(np.linalg.eigvalsh(np.diag(main) + np.diag(off, 1) + np.diag(off, -1))[0])


class TestCrossSection:
    def test_arc_quarter_plane(self):
        lam, v_D = cross_section_eigenpair(CrossSection.arc(math.pi / 2))
        assert lam == pytest.approx(4.0)
        assert v_D(math.pi / 4) == pytest.approx(1.0)
        assert v_D(0.0) == pytest.approx(0.0, abs=1e-15)
        assert v_D(math.pi / 2) == pytest.approx(0.0, abs=1e-15)

    def test_arc_matches_finite_differences(self):
        theta = 2.0
        lam, _ = cross_section_eigenpair(CrossSection.arc(theta))
        assert lam == pytest.approx(finite_difference_dirichlet(theta), rel=1e-4)

    def test_arc_sampler_vanishes_outside(self):
        _, v_D = cross_section_eigenpair(CrossSection.arc(1.0))
        assert np.all(v_D(np.array([-0.1, 1.5])) == 0.0)

    def test_hemisphere_cap(self):
        lam, v_D = cross_section_eigenpair(CrossSection.cap(math.pi / 2))
        assert lam == pytest.approx(2.0, abs=1e-8)
        angles = np.array([0.0, math.pi / 6, math.pi / 4, math.pi / 3])
        np.testing.assert_allclose(v_D(angles), np.cos(angles), atol=1e-4)
        assert v_D(math.pi / 2) == pytest.approx(0.0, abs=1e-12)

    def test_narrow_cap_is_larger(self):
        lam_narrow, _ = cross_section_eigenpair(CrossSection.cap(math.pi / 4))
        assert lam_narrow > 2.0

    def test_explicit_passthrough(self):
        spec = cone_spectrum(CrossSection.explicit(7.3, 5))
        assert spec.lambda_D == 7.3
        assert spec.N == 5
        assert not spec.has_sampler

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dimension": 2, "kind": "cap", "theta0": 1.0},
            {"dimension": 3, "kind": "arc", "theta": 1.0},
            {"dimension": 2, "kind": "arc", "theta": 2 * math.pi},
            {"dimension": 3, "kind": "cap", "theta0": math.pi},
            {"dimension": 4, "kind": "explicit", "lambda_D": 0.0},
        ],
    )
    def test_invalid_cross_sections(self, kwargs):
        with pytest.raises(ValueError):
            CrossSection(**kwargs)


class TestHardyConstant:
    def test_planar(self):
        assert hardy_constant(2, 4.0).mu_C == 4.0

    def test_three_dimensional(self):
        assert hardy_constant(3, 2.0).mu_C == pytest.approx(2.25)

    def test_full_space_limit(self):
        assert hardy_constant(3, 1e-12).mu_C == pytest.approx(0.25)

    def test_rejects_bad_input(self):
        with pytest.raises(DomainError):
            hardy_constant(1, 1.0)
        with pytest.raises(DomainError):
            hardy_constant(3, -1.0)


class TestExponents:
    def test_double_root_at_critical_coupling(self):
        spec = hardy_constant(5, 3.0)
        pair = exponents(5, 3.0, spec.mu_C)
        assert pair.alpha_plus == pytest.approx(-1.5)
        assert pair.alpha_minus == pytest.approx(-1.5)
        assert pair.discriminant == pytest.approx(0.0, abs=1e-12)

    def test_harmonic_half_plane(self):
        pair = exponents(2, 1.0, 0.0)
        assert pair.alpha_plus == pytest.approx(1.0)
        assert pair.alpha_minus == pytest.approx(-1.0)

    def test_three_dimensional_roots(self):
        pair = exponents(3, 2.0, 2.0)
        assert pair.alpha_plus == pytest.approx(0.0, abs=1e-15)
        assert pair.alpha_minus == pytest.approx(-1.0)

    @pytest.mark.parametrize("N,lam,mu", [(2, 4.0, 1.0), (3, 2.0, -3.0), (4, 0.5, 1.2), (6, 10.0, 0.0)])
    def test_vieta_identities(self, N, lam, mu):
        pair = exponents(N, lam, mu)
        assert pair.alpha_plus >= pair.alpha_minus
        assert pair.alpha_plus + pair.alpha_minus == pytest.approx(-(N - 2), abs=1e-12)
        assert pair.alpha_plus * pair.alpha_minus == pytest.approx(mu - lam, abs=1e-12)

    def test_supercritical(self):
        with pytest.raises(SupercriticalCouplingError, match="supercritical coupling"):
            exponents(2, 4.0, 4.5)


class TestProfiles:
    def test_linear_profile(self):
        profile = separated_solution(hardy_constant(2, 1.0), 0.0, 1.0, 0.0)
        r = np.array([0.5, 1.0, 3.0])
        np.testing.assert_allclose(profile(r), r)

    def test_negative_coefficient_rejected(self):
        with pytest.raises(DomainError):
            separated_solution(hardy_constant(2, 1.0), 0.0, -1.0, 0.0)

    @pytest.mark.parametrize("mu", [0.0, 1.5, 2.2])
    def test_separated_solution_solves_euler_equation(self, mu):
        spec = hardy_constant(3, 2.0)
        profile = separated_solution(spec, mu, 1.0, 2.0)
        r = 1.7
        assert abs(euler_residual(profile, spec, mu, r)) < 1e-5 * abs(profile(r)) / r**2

    def test_log_companion_solves_critical_equation(self):
        spec = hardy_constant(4, 1.0)
        profile = critical_log_profile(spec)
        r = 2.5
        assert profile.log_flag
        assert abs(euler_residual(profile, spec, spec.mu_C, r)) < 1e-5 * abs(profile(r)) / r**2

    @pytest.mark.parametrize("mu", [0.0, 1.5, 2.2])
    def test_euler_residual_at_random_radii(self, mu):
        spec = hardy_constant(3, 2.0)
        profile = separated_solution(spec, mu, 1.0, 2.0)
        radii = 10.0 ** np.random.default_rng(5).uniform(-3.0, 3.0, 100)
        for r in radii:
            assert abs(euler_residual(profile, spec, mu, r)) < 1e-5 * profile(r) / r**2

    def test_log_companion_at_random_radii(self):
        spec = hardy_constant(2, 4.0)
        profile = critical_log_profile(spec, 1.0, 0.5)
        radii = 10.0 ** np.random.default_rng(6).uniform(-3.0, 3.0, 100)
        for r in radii:
            scale = r**profile.exponents.alpha_plus * (1.0 + abs(math.log(r))) / r**2
            assert abs(euler_residual(profile, spec, spec.mu_C, r)) < 1e-5 * scale

    def test_positive_profile(self):
        profile = separated_solution(hardy_constant(2, 4.0), 2.0, 0.3, 0.7)
        assert np.all(profile(np.logspace(-3, 3, 50)) > 0.0)


class TestTruncatedCone:
    def test_eigenvalue(self):
        spec = cone_spectrum(CrossSection.arc(math.pi / 2))
        exact = truncated_cone_mu(spec, 0.1, 10.0)
        assert exact.mu_trunc == pytest.approx(4.0 + (math.pi / math.log(100.0)) ** 2)

    def test_eigenfunction_vanishes_on_boundary(self):
        spec = cone_spectrum(CrossSection.arc(math.pi / 2))
        u = truncated_cone_mu(spec, 0.1, 10.0).u_exact
        assert u(0.1, math.pi / 4) == pytest.approx(0.0, abs=1e-14)
        assert u(10.0, math.pi / 4) == pytest.approx(0.0, abs=1e-14)
        assert u(1.0, 0.0) == pytest.approx(0.0, abs=1e-14)
        assert u(1.0, math.pi / 4) == pytest.approx(1.0)

    def test_explicit_has_no_eigenfunction(self):
        u = truncated_cone_mu(cone_spectrum(CrossSection.explicit(3.0, 3)), 1.0, 2.0).u_exact
        with pytest.raises(DomainError):
            u(1.5, 0.0)

    def test_bad_window(self):
        with pytest.raises(DomainError):
            truncated_cone_mu(hardy_constant(2, 1.0), 2.0, 1.0)


class TestCriticality:
    def test_trichotomy(self):
        spec = hardy_constant(3, 2.0)
        assert classify_coupling(spec, 1.0) is Criticality.SUBCRITICAL
        assert classify_coupling(spec, 2.25) is Criticality.CRITICAL
        assert classify_coupling(spec, 3.0) is Criticality.SUPERCRITICAL

    def test_solution_cone_dimension(self):
        spec = hardy_constant(2, 4.0)
        assert solution_cone_dimension(spec, 1.0) == 2
        assert solution_cone_dimension(spec, 4.0) == 1
        assert solution_cone_dimension(spec, 5.0) == 0

    def test_wider_cone_lowers_the_constant(self):
        spec, spec1 = wider_cone_comparison(CrossSection.arc(math.pi / 2), CrossSection.arc(3 * math.pi / 4))
        assert spec1.mu_C == pytest.approx((4 / 3) ** 2)
        assert spec1.mu_C < spec.mu_C

    def test_wider_cone_must_contain(self):
        with pytest.raises(DomainError):
            wider_cone_comparison(CrossSection.arc(1.0), CrossSection.arc(0.5))
        with pytest.raises(DomainError):
            wider_cone_comparison(CrossSection.arc(1.0), CrossSection.cap(0.5))
