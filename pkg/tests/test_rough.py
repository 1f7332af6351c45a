import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from active_scalar_lab.errors import ConstructionError, DomainError
from active_scalar_lab.moduli import BurgersCritical, CustomPiecewise, Linear
from active_scalar_lab.rough import (decay_experiment, linf_ceiling, linf_closed_form, linf_rk4,
                                     reference_decay, schedule_G, schedule_build, spike_data,
                                     timedep_certify)
from active_scalar_lab.spectral import Field, PeriodicGrid


# {{{ L-infinity ODE

def test_rk4_matches_closed_form():
    t, m = linf_rk4(3.0, 2, 1.0, 0.5, 0.7, 1000)
    assert m[-1] == pytest.approx(linf_closed_form(3.0, 2, 1.0, 0.5, 0.7), abs=1e-8)
    assert np.max(np.abs(m - linf_closed_form(3.0, 2, 1.0, 0.5, t))) < 1e-8


@settings(max_examples=50, deadline=None)
@given(M0=st.floats(0.01, 1e4), p=st.floats(1.1, 8.0), C1=st.floats(0.1, 10.0),
       C2=st.floats(0.01, 5.0), t=st.floats(1e-3, 10.0))
def test_solution_below_ceiling(M0, p, C1, C2, t):
    assert linf_closed_form(M0, p, C1, C2, t) <= linf_ceiling(p, C1, C2, t) * (1 + 1e-12)


def test_ceiling_is_data_independent_limit():
    # as M0 -> inf the solution approaches the ceiling
    assert linf_closed_form(1e12, 2, 1.0, 0.5, 0.3) == pytest.approx(linf_ceiling(2, 1.0, 0.5, 0.3), rel=1e-5)

# }}}

# {{{ schedules


def test_linear_schedule_is_exact():
    s = schedule_build(2, 1.0, Linear())
    assert np.all(s.G == 1.0)
    assert np.max(np.abs(s.F * s.t - 1)) < 1e-10
    rep = timedep_certify(s, check_stationary=False, rel_tol=0.0)
    assert rep.passed and rep.n_checked > 0


def test_burgers_schedule_shape():
    s = schedule_build(2, 1.0, BurgersCritical(50.0))
    # at small t the level exceeds every value omega reaches in double precision: G = 0, F = inf
    fin = np.isfinite(s.F)
    assert fin[-1] and np.all(fin[np.argmax(fin):])
    assert np.all(s.G[~fin] == 0.0)
    assert np.all(np.diff(s.F[fin]) < 0)
    Ft = s.F[fin] * s.t[fin]
    # F t tends to a constant at large t, where the log branch of omega flattens G
    assert abs(Ft[-1] / Ft[-2] - 1) < abs(Ft[1] / Ft[0] - 1)
    assert s.to_csv(["h"]).startswith("# h\nt,G,F\n")


def test_schedule_integral_matches_quad():
    w = BurgersCritical(50.0)
    s = schedule_build(2, 1.0, w, t_grid=np.array([0.1, 1.0]))
    G = lambda t: float(schedule_G(w, 2.0, 2, t)[0])
    for t, F in zip(s.t, s.F):
        ref = quad(G, 0, t, points=[t * 1e-6, t * 1e-3], limit=400, epsrel=1e-11)[0]
        assert 1 / F == pytest.approx(ref, rel=1e-8)


def test_schedule_certifies_and_perturbation_fails():
    s = schedule_build(2, 1.0, BurgersCritical(50.0))
    rep = timedep_certify(s)
    assert rep.passed and rep.stationary.passed
    bad = timedep_certify(s.perturbed(0.5), check_stationary=False)
    assert not bad.passed and bad.worst_margin < 0


def test_schedule_errors():
    with pytest.raises(DomainError):
        schedule_build(1.0, 1.0)
    with pytest.raises(DomainError):
        schedule_build(2, 1.0, t_grid=[1.0, 0.5])
    bounded = CustomPiecewise((1.0,), [lambda x: x - 0.5 * x * x, lambda x: 0.5 + 0 * x],
                              [lambda x: 1 - x, lambda x: 0 * x], sup=0.5)
    with pytest.raises(ConstructionError):
        schedule_build(2, 1.0, bounded)
    with pytest.raises(DomainError):
        timedep_certify(None)

# }}}

# {{{ decay experiment


def test_spike_data_normalised():
    g = PeriodicGrid(1, 1024)
    for p in (1.5, 2.0, 4.0):
        f = spike_data(g, p, 8 * g.spacing)
        assert f.norm(p) == pytest.approx(1.0, rel=1e-12)
        assert abs(f.mean()) < 1e-14
    with pytest.raises(DomainError):
        spike_data(g, 2.0, 2 * g.spacing)


def test_constant_data_not_applicable():
    g = PeriodicGrid(1, 256)
    rep = decay_experiment(Field(g, np.full(256, 0.3)), 2.0, C_check=0.5)
    assert not rep.applicable and math.isnan(rep.sup_scaled)


def test_widths_share_the_ceiling():
    a = reference_decay(2.0, n=1024, width_cells=4, C_check=0.5)
    b = reference_decay(2.0, n=1024, width_cells=16, C_check=0.5)
    assert a.passed and b.passed and not a.truncated
    # the sharper spike starts far higher but lands under the same level
    assert a.extra["M0"] > 1.5 * b.extra["M0"]
    assert max(a.sup_scaled, b.sup_scaled) <= 0.5
    assert a.to_csv().startswith("t,M,M_scaled\n")

# }}}
