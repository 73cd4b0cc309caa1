import math

import numpy as np
import pytest

from cdrsim.families import FIG1, FIG2, instantiate
from cdrsim.scaling import (ScalingError, derive_exponents, physical_fields, reconstruct_W,
                            scaling_symmetry_check, similarity_variable)


@pytest.fixture(scope="module")
def fig1():
    return instantiate("example2", FIG1["params"], FIG1["alpha"], FIG1["mu"])


@pytest.fixture(scope="module")
def fig2():
    return instantiate("example4_nonlinear", FIG2["params"], FIG2["alpha"], FIG2["mu"])


@pytest.fixture(scope="module")
def all_families():
    return [
        instantiate("example1", {"c": 1.0}, 0.5, 1.0),
        instantiate("example2", FIG1["params"], FIG1["alpha"], FIG1["mu"]),
        instantiate("example3", {"k": 1.0}, 0.5, 1.0),
        instantiate("example4_nonlinear", FIG2["params"], FIG2["alpha"], FIG2["mu"]),
    ]


@pytest.mark.parametrize("alpha, mu, expected", [
    (0.5, 1.0, (-0.5, 0.0, 0.0)),
    (0.0, 1.3, (-1.0, -1.0, 0.3)),
    (0.0, 0.0, (-1.0, -1.0, -1.0)),
])
def test_derive_exponents(alpha, mu, expected):
    e = derive_exponents(alpha, mu)
    assert (e.gamma, e.delta, e.rho_exp) == pytest.approx(expected, abs=1e-15)


def test_derive_exponents_rejects_non_finite():
    with pytest.raises(ScalingError):
        derive_exponents(math.nan, 1.0)
    with pytest.raises(ScalingError):
        derive_exponents(0.5, math.inf)


@pytest.mark.parametrize("b", [-3.0, 0.5, 2.0, 7.0])
def test_exponent_ratio_relations(b):
    alpha = 0.37
    a = alpha * b
    e = derive_exponents(alpha, 1.1)
    assert b * e.gamma == pytest.approx(a - b)
    assert b * e.delta == pytest.approx(2 * a - b)


def test_similarity_variable():
    assert similarity_variable(1, 1, 0.5) == 1.0
    assert similarity_variable(4, 4, 0.5) == 2.0
    assert similarity_variable(7, 5, 0.0) == 7.0
    with pytest.raises(ScalingError):
        similarity_variable(1.0, 0.0, 0.5)


def test_reconstruct_w(fig1, fig2):
    assert reconstruct_W(fig1, 1.0, 1.0) == pytest.approx(math.exp(-2), rel=1e-15)
    assert reconstruct_W(fig1, 0.0, 3.7) == 0.0
    assert reconstruct_W(fig2, 0.0, 1.0) == pytest.approx(1 / 3, rel=1e-15)
    with pytest.raises(ScalingError):
        reconstruct_W(fig1, -1.0, 1.0)
    with pytest.raises(ScalingError):
        reconstruct_W(fig1, 1.0, -1.0)


def test_reconstruct_at_unit_time_is_y(fig1):
    x = np.linspace(0, 5, 11)
    np.testing.assert_array_equal(reconstruct_W(fig1, x, 1.0), fig1.y(x))


def test_example2_closed_form_in_x(fig1):
    rng = np.random.default_rng(3)
    x, t = rng.uniform(0, 5, 50), rng.uniform(0.5, 4, 50)
    a, al, mu = 2.0, 0.5, 1.0
    w = x * t ** (mu - al) * np.exp(-a * x / t ** al)
    np.testing.assert_allclose(reconstruct_W(fig1, x, t), w, rtol=1e-13, atol=1e-300)
    r = (al + mu) * x * t ** (mu - al - 1) * np.exp(-a * x / t ** al)
    np.testing.assert_allclose(physical_fields(fig1, x, t)[2], r, rtol=1e-12, atol=1e-300)


def test_physical_fields(fig1, fig2):
    c, d, r = physical_fields(fig1, 1.0, 1.0)
    assert c == pytest.approx(0.2, abs=1e-15)
    assert d == pytest.approx(0.3, abs=1e-15)
    assert r == pytest.approx(1.5 * math.exp(-2), rel=1e-14)
    c, d, _ = physical_fields(fig2, 3.0, 2.0)
    assert (c, d) == pytest.approx((1.2, 0.5), abs=1e-15)


def test_example1_diffusion_is_power_of_t():
    s = instantiate("example1", {"c": 1.0}, 0.3, 0.2)
    for t in (0.5, 1.0, 2.0, 3.0):
        assert physical_fields(s, 0.7, t)[1] == pytest.approx(t ** (2 * 0.3 - 1), rel=1e-15)


def test_symmetry_check_example(fig1):
    pts = [(x, t) for x in (0.1, 1.0, 3.0) for t in (0.5, 1.0, 2.5)]
    rep = scaling_symmetry_check(fig1, 2.0, 1.0, 2.0, pts)
    assert rep.max_relative_deviation <= 1e-12
    assert rep.samples == 9


def test_symmetry_identity_scale_is_exact(all_families):
    pts = [(0.5, 1.0), (2.0, 3.0)]
    for s in all_families:
        b = 1.3
        assert scaling_symmetry_check(s, 1.0, s.alpha * b, b, pts).max_relative_deviation == 0.0


def test_symmetry_rejects_bad_ratio(fig1):
    with pytest.raises(ScalingError):
        scaling_symmetry_check(fig1, 2.0, 1.0, 1.0, [(1.0, 1.0)])
    with pytest.raises(ScalingError):
        scaling_symmetry_check(fig1, 2.0, 0.0, 0.0, [(1.0, 1.0)])


def test_symmetry_random_triples(all_families):
    rng = np.random.default_rng(11)
    for s in all_families:
        lo = 0.0 if s.domain.lower == 0 else -4.0
        for _ in range(100):
            x, t = rng.uniform(lo, 4.0), rng.uniform(0.5, 3.0)
            eps, b = rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)
            rep = scaling_symmetry_check(s, eps, s.alpha * b, b, [(x, t)])
            assert rep.max_relative_deviation <= 1e-10, (s.name, x, t, eps, b)
