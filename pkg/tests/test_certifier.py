import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as si

from active_scalar_lab.certifier import (NmpConstants, QuadratureConfig, certify, check_obedience,
                                         default_grid, dissipation_functional, exact_c_alpha,
                                         flow_majorant_beta, flow_majorant_sqg, log_grid,
                                         parameter_sweep, parse_flow)
from active_scalar_lab.errors import (DivergenceError, DomainError, PreconditionError)
from active_scalar_lab.moduli import (BetaCritical, BurgersCritical, CustomPiecewise, Linear,
                                      PowerLaw, SqgCritical)
from active_scalar_lab.spectral import Field, PeriodicGrid


def d_reference(alpha, w, xi):
    """Second-difference form of the dissipation functional, by scipy quad."""
    def f1(e):
        return (w(xi + 2 * e) + w(xi - 2 * e) - 2 * w(xi)) / e ** (1 + 2 * alpha)

    def f2(e):
        return (w(2 * e + xi) - w(2 * e - xi) - 2 * w(xi)) / e ** (1 + 2 * alpha)

    pts = []
    for b in w.breakpoints():
        pts += [(b - xi) / 2, (xi - b) / 2, (b + xi) / 2]
    p1 = [p for p in pts if 0 < p < xi / 2] or None
    p2 = [p for p in pts if xi / 2 < p < 1e3 * xi] or None
    kw = dict(limit=500, epsabs=1e-14, epsrel=1e-11)
    a = si.quad(f1, 0, xi / 2, points=p1, **kw)[0]
    b = si.quad(f2, xi / 2, 1e3 * xi, points=p2, **kw)[0]
    # the far tail decays only like log(e)/e^2, so integrate it in log e
    c = si.quad(lambda s: f2(np.exp(s)) * np.exp(s), np.log(1e3 * xi), np.log(xi) + 60, **kw)[0]
    return a + b + c


# {{{ dissipation functional

@pytest.mark.parametrize("alpha", [0.25, 0.5])
@pytest.mark.parametrize("xi", [0.1, 1.0, 10.0])
def test_linear_modulus_has_no_dissipation(alpha, xi):
    assert abs(dissipation_functional(alpha, Linear(), xi)) < 1e-8


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("w", [SqgCritical(0.01, 0.02), BurgersCritical(40.0), PowerLaw(0.5),
                               BetaCritical(0.4, 0.01, 0.005)], ids=repr)
@pytest.mark.parametrize("f", [1e-3, 0.3, 1.7, 1e2])
def test_matches_second_difference_quadrature(w, f):
    xi = w.length_scale * f
    d = dissipation_functional(0.5, w, xi)
    assert d == pytest.approx(d_reference(0.5, w, xi), rel=1e-7)


def test_powerlaw_homogeneity_ratio():
    w = PowerLaw(0.5)
    r = dissipation_functional(0.5, w, 2.0) / dissipation_functional(0.5, w, 0.5)
    assert r == pytest.approx(0.5, rel=1e-8)


@pytest.mark.parametrize("beta,alpha", [(0.5, 0.5), (0.3, 0.25), (0.7, 0.4)])
def test_powerlaw_homogeneity_over_a_decade(beta, alpha):
    w = PowerLaw(beta)
    xs = np.geomspace(0.3, 3.0, 7)
    vals = [dissipation_functional(alpha, w, x) / x ** (beta - 2 * alpha) for x in xs]
    assert max(vals) / min(vals) - 1 < 1e-5


def test_sqrt_modulus_closed_form():
    # with c_alpha = 1, D(1) for sqrt at alpha = 1/2 equals -pi
    assert dissipation_functional(0.5, PowerLaw(0.5), 1.0) == pytest.approx(-math.pi, rel=1e-8)


@pytest.mark.parametrize("B", [0.5, 3.0])
def test_scaling_identity(B):
    w = SqgCritical(0.1, 0.2)
    for xi in (0.05, 0.3, 4.0):
        lhs = dissipation_functional(0.5, w.scaled(B), xi)
        rhs = B * dissipation_functional(0.5, w, B * xi)
        assert lhs == pytest.approx(rhs, rel=1e-6)


def test_non_concave_rejected():
    w = CustomPiecewise((1.0,), [lambda x: x, lambda x: x * x], [lambda x: 1 + 0 * x, lambda x: 2 * x])
    with pytest.raises(PreconditionError):
        dissipation_functional(0.5, w, 1.0)


def test_argument_domain():
    with pytest.raises(DomainError):
        dissipation_functional(1.0, Linear(), 1.0)
    with pytest.raises(DomainError):
        dissipation_functional(0.5, Linear(), 0.0)
    with pytest.raises(DomainError):
        QuadratureConfig(tail_cut=5)
    with pytest.raises(DomainError):
        NmpConstants(c_alpha=0.0)


def test_linear_in_c_alpha():
    w = BurgersCritical(50.0)
    d1 = dissipation_functional(0.5, w, 3.0)
    d3 = dissipation_functional(0.5, w, 3.0, c=NmpConstants(c_alpha=3.0))
    assert d3 == pytest.approx(3 * d1, rel=1e-14)


def test_kernel_constant():
    assert exact_c_alpha(0.5) == pytest.approx(1 / math.pi)


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4, 0.7, 0.9])
def test_kernel_constant_matches_symbol(alpha):
    # C * int (1 - cos y) |y|^(-1-2a) dy must equal the symbol |k|^(2a) at k = 1
    s = 1 + 2 * alpha
    # on [0, 1] integrate the cosine series term by term
    near = sum((-1) ** (k + 1) / (math.factorial(2 * k) * (2 * k - 2 * alpha)) for k in range(1, 15))
    far = 1 / (2 * alpha) - si.quad(lambda y: y ** -s, 1, np.inf, weight="cos", wvar=1.0)[0]
    assert 2 * exact_c_alpha(alpha) * (near + far) == pytest.approx(1.0, rel=1e-9)
    ref = 4 ** alpha * math.gamma(0.5 + alpha) / (math.sqrt(math.pi) * abs(math.gamma(-alpha)))
    assert exact_c_alpha(alpha) == pytest.approx(ref, rel=1e-13)


@settings(max_examples=60, deadline=None)
@given(i=st.integers(0, 3), logxi=st.floats(-6, 4), alpha=st.sampled_from([0.2, 0.5, 0.8]))
def test_dissipation_nonpositive(i, logxi, alpha):
    w = [BurgersCritical(50.0), SqgCritical(0.1, 0.2), PowerLaw(0.6), BetaCritical(0.3, 0.1, 0.03)][i]
    xi = w.length_scale * 10.0 ** logxi
    assert dissipation_functional(alpha, w, xi) <= 0.0

# }}}

# {{{ flow majorants


def test_beta_majorant_linear_closed_form():
    assert flow_majorant_beta(Linear(), 0.5, 1.0) == pytest.approx(4.0, rel=1e-10)
    assert flow_majorant_beta(Linear(), 0.5, 1.0, c=NmpConstants(A=2.5)) == pytest.approx(10.0, rel=1e-10)
    # general xi: (1/b + 1/(1-b)) xi^b
    assert flow_majorant_beta(Linear(), 0.3, 2.0) == pytest.approx((1 / 0.3 + 1 / 0.7) * 2 ** 0.3, rel=1e-10)


def test_beta_majorant_monotone_and_vanishing():
    w = SqgCritical(0.1, 0.2)
    assert flow_majorant_beta(w, 0.5, 0.01) <= flow_majorant_beta(w, 0.5, 0.1)
    vals = [flow_majorant_beta(w, 0.5, x) for x in (1e-3, 1e-6, 1e-9)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-3


def test_beta_majorant_diverges():
    with pytest.raises(DivergenceError):
        flow_majorant_beta(Linear(), 1.0, 1.0)
    # the order-2 operator of the Euler endpoint diverges for every unbounded modulus
    with pytest.raises(DivergenceError):
        flow_majorant_beta(BurgersCritical(50.0), 2.0, 1.0)


def test_sqg_majorant_values():
    w = SqgCritical(0.1, 0.2)
    assert flow_majorant_sqg(w, 0.1) == pytest.approx(4 * w.eval(0.1))
    assert flow_majorant_sqg(w, 0.1 * math.e) == pytest.approx(5 * w.eval(0.1 * math.e))
    assert flow_majorant_sqg(w, 0.1, NmpConstants(A=3.0)) == pytest.approx(12 * w.eval(0.1))
    with pytest.raises(DomainError):
        flow_majorant_sqg(BurgersCritical(50.0), 1.0)


def test_sqg_majorant_dominates_singular_integral():
    w = SqgCritical(0.1, 0.2)
    xs = np.geomspace(1e-3, 10.0, 41)
    raw = np.array([flow_majorant_beta(w, 1.0, x) for x in xs])
    assert np.all(flow_majorant_sqg(w, xs) >= raw)

# }}}

# {{{ certificates


def test_parse_flow():
    assert parse_flow("burgers") == ("burgers", None)
    assert parse_flow("beta(0.6)") == ("beta", 0.6)
    with pytest.raises(DomainError):
        parse_flow("euler")


def test_burgers_certificate_passes():
    rep = certify(BurgersCritical(50.0), 0.5, "burgers", c=NmpConstants(margin=1e-6), flow_multiplier=2.0)
    assert rep.passed
    assert rep.worst_total < -1e-6
    assert rep.xi_grid[0] == pytest.approx(1e-6 * BurgersCritical(50.0).xi0)
    assert np.all(rep.diss_term <= 0)


def test_certificate_json():
    w = SqgCritical(0.1, 0.2)
    rep = certify(w, 0.5, "sqg-log", grid=log_grid(1e-3, 1e2, 10))
    data = json.loads(rep.to_json())
    for key in ("constants", "grid", "flow_values", "diss", "total", "worst_xi", "pass"):
        assert key in data
    assert data["pass"] == rep.passed
    assert len(data["total"]) == rep.xi_grid.size


def test_weak_dissipation_fails():
    rep = certify(PowerLaw(0.5), 0.05, "burgers", c=NmpConstants(c_alpha=1e-3),
                  grid=np.geomspace(1e-3, 1e3, 61))
    assert not rep.passed
    assert rep.worst_total > 0


def test_divergent_flow_marks_all_points():
    rep = certify(BurgersCritical(50.0), 0.5, "beta(1.0)", grid=np.geomspace(1.0, 10.0, 5))
    assert not rep.passed
    assert rep.indeterminate == [0, 1, 2, 3, 4]


def test_certify_rejects_small_multiplier():
    with pytest.raises(DomainError):
        certify(BurgersCritical(50.0), 0.5, flow_multiplier=0.5)


@pytest.mark.parametrize("factor", [1.5, 4.0])
def test_pass_is_monotone_in_c_alpha(factor):
    w = SqgCritical(0.1, 0.2)
    grid = default_grid(w, 20)
    base = certify(w, 0.5, "sqg-log", grid=grid, c=NmpConstants(margin=1e-6))
    assert base.passed
    more = certify(w, 0.5, "sqg-log", grid=grid, c=NmpConstants(c_alpha=factor, margin=1e-6))
    assert more.passed and more.worst_total < base.worst_total


def test_sweep_single_point_range():
    res = parameter_sweep(BurgersCritical, 0.5, "burgers", search=(50.0, 50.0), flow_multiplier=2.0,
                          per_decade=20)
    assert res.found and res.parameter == 50.0


def test_sweep_exhausted():
    res = parameter_sweep(BurgersCritical, 0.5, "burgers", search=(14.0, 25.0), n_scan=3, per_decade=20)
    assert not res.found and math.isnan(res.parameter)


def test_sweep_finds_burgers_boundary():
    res = parameter_sweep(BurgersCritical, 0.5, "burgers", c=NmpConstants(margin=1e-6),
                          search=(13.0, 1000.0), flow_multiplier=2.0, n_scan=7, rel_resolution=1e-2,
                          per_decade=50)
    assert res.found and res.bracketed
    assert 25.0 < res.parameter < 60.0
    assert res.report.passed

# }}}

# {{{ obedience


def test_obedience_examples():
    grid = PeriodicGrid(1, 256)
    sin = Field.from_function(grid, np.sin)
    assert check_obedience(sin, Linear()).max_ratio < 1
    rep = check_obedience(Field.from_function(grid, lambda x: 2 * np.sin(x)), Linear())
    assert rep.max_ratio > 1
    i, j = rep.arg_pair
    # |2 cos x| peaks at 0 and at the wrap point pi
    d = [min(abs(x), math.pi - abs(x)) for x in (grid.x[i], grid.x[j])]
    assert min(d) < 0.05
    const = Field(grid, np.full(256, 3.0))
    assert check_obedience(const, BurgersCritical(50.0)).max_ratio == 0.0


def test_obedience_uses_periodic_distance():
    grid = PeriodicGrid(1, 64)
    v = np.zeros(64)
    v[0], v[-1] = 1.0, -1.0   # neighbours across the wrap
    rep = check_obedience(Field(grid, v), Linear())
    assert rep.max_ratio == pytest.approx(2.0 / grid.spacing)


def test_obedience_malformed_modulus():
    w = CustomPiecewise((1.0,), [lambda x: 0 * x, lambda x: x - 1], [lambda x: 0 * x, lambda x: 1 + 0 * x])
    with pytest.raises(PreconditionError):
        check_obedience(Field.from_function(PeriodicGrid(1, 64), np.sin), w)


def test_obedience_2d_is_seeded():
    grid = PeriodicGrid(2, 32)
    f = Field.from_function(grid, lambda x, y: np.sin(x) * np.cos(2 * y))
    a = check_obedience(f, Linear(), n_random=5000, seed=3)
    b = check_obedience(f, Linear(), n_random=5000, seed=3)
    assert a == b
    assert "seed 3" in a.method
    assert 1.0 < a.max_ratio < 2.0 + 1e-12


@settings(max_examples=40, deadline=None)
@given(coef=st.lists(st.floats(-1, 1), min_size=4, max_size=4), safety=st.floats(1.05, 4.0))
def test_lipschitz_bound_implies_obedience(coef, safety):
    grid = PeriodicGrid(1, 128)
    th = Field.from_function(grid, lambda x: sum(c * np.sin((k + 1) * x + k) for k, c in enumerate(coef)))
    from active_scalar_lab.spectral import gradient_max
    g = gradient_max(th)
    if g < 1e-6:
        return
    rep = check_obedience(th, Linear().scaled(safety * g))
    assert rep.max_ratio < 1.0

# }}}
