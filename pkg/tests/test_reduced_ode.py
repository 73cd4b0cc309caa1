import numpy as np
import pytest

from cdrsim import expr as ex
from cdrsim.families import FIG1, FIG2, custom_system, instantiate
from cdrsim.quadrature import DivergentIntegralError, fp_type_profile
from cdrsim.reduced_ode import (ExponentMismatchError, YTriple, certify, conserved_form_residual,
                                continuity_report, first_integral_residual, particle_number,
                                residual, sample_points, system_residual, truncation_extent)
from cdrsim.scaling import ZY_VARS, ProfileSet, derive_exponents


def catalog_systems():
    return [
        instantiate("example1", {"c": 1.0}, 0.5, 1.0),
        instantiate("example2", FIG1["params"], FIG1["alpha"], FIG1["mu"]),
        instantiate("example3", {"k": 1.0}, 0.5, 1.0),
        instantiate("example4_nonlinear", FIG2["params"], FIG2["alpha"], FIG2["mu"]),
    ]


@pytest.fixture(scope="module")
def systems():
    return catalog_systems()


def gaussian_fp_profiles(alpha):
    names = ("alpha", "mu")
    return ProfileSet(sigma=ex.parse("1"), tau=ex.parse("0"), rho=ex.parse("0", ZY_VARS),
                      rho_bar=ex.parse("0", ZY_VARS, names))


def test_residual_example1_point():
    s = instantiate("example1", {"c": 1.0}, 0.5, 1.0)
    z = 1.3
    yt = YTriple(s.y(z), s.y.derivative(z, 1), s.y.derivative(z, 2))
    assert abs(residual(s.profiles, s.exponents, yt, z, s.params)) <= 1e-12


def test_residual_example2_point():
    s = instantiate("example2", FIG1["params"], FIG1["alpha"], FIG1["mu"])
    assert abs(system_residual(s, 2.0)) <= 1e-12


def test_residual_example1_with_fd_oracle():
    s = instantiate("example1", {"c": 1.0}, 0.5, 1.0)
    assert abs(system_residual(s, 1.3, finite_difference=True)) <= 1e-5


def test_residual_zero_field():
    p = ProfileSet(sigma=ex.parse("1"), tau=ex.parse("z"), rho=ex.parse("0", ZY_VARS))
    e = derive_exponents(0.5, 1.0)
    assert residual(p, e, YTriple(0.0, 0.0, 0.0), 0.4) == 0.0


def test_residual_rejects_non_finite_sigma():
    p = ProfileSet(sigma=ex.parse("1/z"), tau=ex.parse("0"), rho=ex.parse("0", ZY_VARS))
    with pytest.raises(ValueError):
        residual(p, derive_exponents(0, 0), YTriple(1, 0, 0), 0.0)


def test_catalog_symbolic_and_fd_residuals(systems):
    for s in systems:
        z = sample_points(s, 100)
        assert np.max(np.abs(system_residual(s, z))) <= 1e-8, s.name
        assert np.max(np.abs(system_residual(s, z, finite_difference=True))) <= 1e-5, s.name


def test_sample_points_are_interior(systems):
    for s in systems:
        z = sample_points(s, 50)
        assert len(z) == 50
        if s.domain.lower == 0:
            assert z.min() > 0


def test_certify_flags_tampered_rho():
    good = custom_system("beta*z", "(alpha - beta*a)*z + beta", "(alpha + mu)*z*exp(-a*z)",
                         "z*exp(-a*z)", {"a": 2, "beta": 0.3}, 0.5, 1.0, "half_line")
    assert certify(good).passed
    bad = custom_system("beta*z", "(alpha - beta*a)*z + beta", "(alpha + mu + 0.1)*z*exp(-a*z)",
                        "z*exp(-a*z)", {"a": 2, "beta": 0.3}, 0.5, 1.0, "half_line",
                        certify_now=False)
    rep = certify(bad)
    assert not rep.passed
    assert rep.residual_max > 1e-3


def test_certify_flags_vanishing_sigma():
    s = custom_system("z", "0", "0", "1", {}, 0.0, 0.0, certify_now=False)
    assert not certify(s, window=(-1.0, 1.0), points=3).sigma_nonzero


def test_conserved_form_requires_mu_minus_alpha():
    p = gaussian_fp_profiles(1.0)
    z = np.linspace(-6, 6, 64)
    with pytest.raises(ExponentMismatchError):
        conserved_form_residual(p, derive_exponents(1.0, 0.5), z, np.exp(-z ** 2 / 2))


def _fp_gaussian_conserved_residual(n):
    y = fp_type_profile("1", "0", "0", 1.0)
    z = np.linspace(-6, 6, n)
    return conserved_form_residual(gaussian_fp_profiles(1.0), derive_exponents(1.0, -1.0),
                                   z, y(z))


def test_conserved_form_fp_profile_fine_grid():
    assert _fp_gaussian_conserved_residual(1024) <= 1e-8


def test_conserved_form_fourth_order():
    coarse = _fp_gaussian_conserved_residual(257)
    fine = _fp_gaussian_conserved_residual(513)
    assert 12 < coarse / fine < 20


@pytest.mark.xfail(strict=True, reason="fourth-order stencil error on 512 points is ~1.5e-7; "
                                       "1e-8 needs about 1024 points")
def test_conserved_form_fp_profile_512_points():
    assert _fp_gaussian_conserved_residual(512) <= 1e-8


def test_first_integral_examples():
    p = gaussian_fp_profiles(1.0)
    e = derive_exponents(1.0, -1.0)
    z = np.linspace(-3, 3, 25)
    y = np.exp(-z ** 2 / 2)
    yt = YTriple(y, -z * y, (z ** 2 - 1) * y)
    assert np.max(np.abs(first_integral_residual(p, e, yt, z))) <= 1e-15
    np.testing.assert_allclose(first_integral_residual(p, e, yt, z, constant=5.0), -5.0,
                               atol=1e-15)


def test_first_integral_requires_rho_bar():
    p = ProfileSet(sigma=ex.parse("1"), tau=ex.parse("0"), rho=ex.parse("0", ZY_VARS))
    with pytest.raises(ValueError):
        first_integral_residual(p, derive_exponents(1, -1), YTriple(1, 0, 0), 0.0)


def test_continuity_example2():
    s = instantiate("example2", FIG1["params"], FIG1["alpha"], FIG1["mu"])
    rep = continuity_report(s)
    assert rep.integral_y == pytest.approx(0.25, abs=1e-10)
    assert rep.integral_rho == pytest.approx(0.375, abs=1e-10)
    assert rep.lhs == pytest.approx(0.375, abs=1e-10)
    assert abs(rep.boundary_flux) <= 1e-12
    assert rep.delta_alpha_z_y == 0.0 or abs(rep.delta_alpha_z_y) <= 1e-12
    assert rep.satisfied
    assert rep.n_of_t(4.0) == pytest.approx(2.0, rel=1e-10)


def test_continuity_example4_divergent_but_satisfied():
    s = instantiate("example4_nonlinear", FIG2["params"], FIG2["alpha"], FIG2["mu"])
    rep = continuity_report(s)
    assert rep.divergent and rep.satisfied
    assert rep.delta_alpha_z_y == 0.0
    assert rep.to_dict()["integral_y"] == "divergent"
    with pytest.raises(DivergentIntegralError):
        particle_number(s, 1.0)


def test_continuity_compact_bump():
    bump = "((1 - z^2 + abs(1 - z^2))/2)^4"
    s = custom_system("1", "0", "0", bump, {}, 0.5, -0.5, certify_now=False)
    rep = continuity_report(s)
    assert rep.integral_y > 0
    assert rep.integral_rho == 0.0 and rep.lhs == 0.0
    assert rep.boundary_flux == 0.0 and rep.delta_alpha_z_y == 0.0


def test_catalog_continuity(systems):
    for s in systems:
        assert continuity_report(s, tol=1e-6).satisfied, s.name


def test_particle_number_scaling(systems):
    for s in systems[:3]:
        base = particle_number(s, 1.0)
        for t in (2.0, 3.0):
            ratio = particle_number(s, t) / t ** (s.alpha + s.mu)
            assert ratio == pytest.approx(base, rel=1e-9)


def test_particle_number_example2():
    s = instantiate("example2", FIG1["params"], FIG1["alpha"], FIG1["mu"])
    assert particle_number(s, 1.0) == pytest.approx(0.25, rel=1e-10)
    assert particle_number(s, 4.0) == pytest.approx(2.0, rel=1e-10)


def test_particle_number_rate(systems):
    h = 1e-4
    for s in systems[:3]:
        fd = (particle_number(s, 2 + h) - particle_number(s, 2 - h)) / (2 * h)
        k = s.alpha + s.mu
        exact = k * 2.0 ** (k - 1) * particle_number(s, 1.0)
        assert fd == pytest.approx(exact, rel=1e-5)


def test_conserving_particle_number_constant():
    s = instantiate("example1", {"c": 1.0}, 0.5, -0.5)
    n = [particle_number(s, t) for t in (1.0, 2.0, 3.0)]
    assert max(n) - min(n) <= 1e-9 * abs(n[0])


def test_truncation_extent(systems):
    ext = truncation_extent(systems[1])
    assert ext.lo == 0.0 and not ext.divergent
    assert abs(systems[1].y(ext.hi / 1.2)) < 1e-14
    assert truncation_extent(systems[3]).divergent
