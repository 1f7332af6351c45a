import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from active_scalar_lab.blowup import (Barrier, BlowupConfig, OdeState, barrier_check, barrier_eval,
                                      blowup_experiment, build_initial_data, compare_ode_recursion,
                                      conservation_identity, conservation_monitor, kappa_threshold,
                                      ode_integrate, recursion, recursion_step)
from active_scalar_lab.errors import (ConstructionError, DomainError, RecursionBreakdown)
from active_scalar_lab.spectral import Field, PeriodicGrid, Probes, SolverConfig, evolve


# {{{ barrier

def test_barrier_values():
    b = Barrier(2.0, 1.0, 0.5, 4.0)
    assert barrier_eval(b, 0.25) == 0.5
    assert barrier_eval(b, 2.0) == 1.0
    assert barrier_eval(b, 3.75) == 0.5
    assert barrier_eval(b, 4.0) == 0.0
    with pytest.raises(DomainError):
        barrier_eval(b, 4.5)
    with pytest.raises(DomainError):
        barrier_eval(b, -0.1)


def test_barrier_continuous_at_corners():
    b = Barrier(3.0, 1.2, 0.7, 5.0)
    for c in (b.delta, b.L - b.a):
        lo, hi = barrier_eval(b, c * (1 - 1e-12)), barrier_eval(b, c * (1 + 1e-12))
        assert abs(lo - hi) < 1e-10


def test_barrier_construction_rules():
    with pytest.raises(ConstructionError):
        Barrier(0.0, 1.0, 0.5, 4.0)
    with pytest.raises(ConstructionError):
        Barrier(0.1, 1.0, 0.5, 4.0)   # ramp runs into the edge
    c = Barrier(2.0, 1.0, 0.5, 4.0).conditions(theta_inf=2.0, alpha=0.25)
    assert c == {"ramp_within_edge": True, "edge_small": True, "sup_bound": True}


def test_barrier_check_margin():
    b = Barrier(2.0, 1.0, 0.5, 4.0)
    g = PeriodicGrid(1, 256, 4.0)
    x = g.x
    phi = np.sign(x) * barrier_eval(b, np.abs(x))
    phi[0] = 0.0
    assert barrier_check(Field(g, phi), b).margin == 0.0
    # lifting the plateau keeps the margin at 0 (attained at x = 0 and x = L)
    lifted = np.where(np.abs(phi) == 1.0, np.sign(phi) * 1.1, phi)
    rep = barrier_check(Field(g, lifted), b)
    assert rep.margin == 0.0 and rep.passed
    low = Field(g, 0.9 * phi)
    rep = barrier_check(low, b)
    assert rep.margin == pytest.approx(-0.1) and not rep.passed
    assert 0.5 <= rep.worst_x <= 3.5


def test_barrier_check_needs_odd_field():
    b = Barrier(2.0, 1.0, 0.5, 4.0)
    g = PeriodicGrid(1, 64, 4.0)
    with pytest.raises(DomainError):
        barrier_check(Field.from_function(g, lambda x: np.cos(x)), b)
    with pytest.raises(DomainError):
        barrier_check(Field.from_function(PeriodicGrid(1, 64), np.sin), b)

# }}}

# {{{ recursion and ODE


def test_threshold_arithmetic():
    assert kappa_threshold(0.25, 1.0) == pytest.approx(36.0)
    cfg = BlowupConfig(grid_n=1024)
    assert cfg.kappa0 == pytest.approx(36.0)
    assert cfg.a0 == pytest.approx(1 / 36)
    assert cfg.L == pytest.approx(16 / 36)
    assert cfg.T == pytest.approx(1.5 / 36)
    with pytest.raises(DomainError):
        BlowupConfig(kappa0=10.0)
    with pytest.raises(DomainError):
        BlowupConfig(alpha=0.5)


def test_recursion_step_example():
    cfg = BlowupConfig(h=0.01, c_alpha=1.0, kappa0=36.0)
    k, H, a = recursion_step(1.0, 1.0, 0.1, cfg)
    assert k == pytest.approx(1.0, abs=1e-14)
    assert H == pytest.approx(0.99, abs=1e-14)
    assert a == pytest.approx(0.1 + 0.01 * cfg.theta_inf)


def test_recursion_without_dissipation():
    cfg = BlowupConfig(h=1e-3, c_alpha=0.0, kappa0=5.0)
    ks, Hs, _ = recursion(cfg, 3)
    k = 5.0
    for n in range(1, 4):
        k = k / (1 - k * 1e-3)
        assert ks[n] == pytest.approx(k, rel=1e-14)
    assert np.all(Hs == 1.0)


def test_recursion_breakdown():
    cfg = BlowupConfig(h=0.01, c_alpha=0.0, kappa0=30.0)
    with pytest.raises(RecursionBreakdown):
        recursion_step(100.0, 1.0, 0.1, cfg)
    ks, _, _ = recursion(cfg, 100)
    assert 1 < ks.size < 101 and ks[-2] * cfg.h < 1 <= ks[-1] * cfg.h


def test_riccati_case():
    o = ode_integrate(OdeState(36.0, 1.0, 0.0, 0.0), 0.25, 1e-5, 0.8 / 36, cap=math.inf)
    exact = 36.0 / (1 - 36.0 * o.t)
    assert np.max(np.abs(o.kappa / exact - 1)) < 1e-9
    hit = ode_integrate(OdeState(36.0, 1.0, 0.0, 0.0), 0.25, 1e-5, 1.0, cap=1e4).hit_time
    assert hit == pytest.approx((1 - 36 / 1e4) / 36, rel=1e-6)


def test_ode_lower_bound():
    k0 = 36.0
    o = ode_integrate(OdeState(k0, 1.0, 0.0, 1.0), 0.25, 1e-5, 0.04, cap=1e6)
    lower = 1.0 / (1.0 / k0 - 2.0 * o.t / 3.0)
    assert np.all(o.kappa >= lower * (1 - 1e-9))
    dk = np.gradient(o.kappa, o.t)
    assert np.all(dk[1:-1] >= (2.0 / 3.0) * o.kappa[1:-1] ** 2 * (1 - 1e-6))
    # blow-up before 3 / (2 kappa0)
    assert o.hit_time < 1.5 / k0


def test_conservation_identity_value():
    assert conservation_identity(1.0, 1.0, 0.25, 1.0) == pytest.approx(-0.5)


@pytest.mark.parametrize("Qf,applicable", [(1.0, True), (2.0, True), (0.5, False)])
def test_conservation_monitor(Qf, applicable):
    k0 = 36.0
    H0 = (Qf * 2 / k0 ** 0.5) ** 2
    tr = ode_integrate(OdeState(k0, H0, 0.0, 1.0), 0.25, 1e-5, 0.02, cap=1e5)
    r = conservation_monitor(tr, 0.25, 1.0)
    assert r.applicable == applicable
    assert r.identity_ok
    if applicable:
        assert r.monotone and r.Q[-1] >= r.Q[0] * (1 - 1e-12)


@settings(max_examples=25, deadline=None)
@given(k0=st.floats(36.0, 200.0), Qf=st.floats(1.0, 3.0))
def test_q_nondecreasing_above_threshold(k0, Qf):
    H0 = (Qf * 2 / k0 ** 0.5) ** 2
    tr = ode_integrate(OdeState(k0, H0, 0.0, 1.0), 0.25, 2e-5, 0.5 / k0, cap=1e6)
    assert conservation_monitor(tr, 0.25, 1.0).monotone


def test_recursion_converges_first_order():
    cfg = BlowupConfig(grid_n=1024)
    hit = ode_integrate(OdeState(36, 1, 0, 1), 0.25, 1e-5, cfg.T, cap=1e6).hit_time
    tab = compare_ode_recursion(cfg, [2e-4, 1e-4, 5e-5], 0.8 * hit)
    assert not any(tab.truncated)
    assert all(0.9 < p < 1.1 for p in tab.orders)


def test_recursion_exact_without_dissipation():
    cfg = BlowupConfig(c_alpha=0.0, kappa0=36.0, grid_n=1024)
    tab = compare_ode_recursion(cfg, [1e-4], 0.8 / 36)
    # the recursion is then the exact Riccati flow
    assert tab.kappa_err[0] < 1e-9 * 36 / 0.2

# }}}

# {{{ initial data and runs


def test_initial_data():
    cfg = BlowupConfig(grid_n=4096)
    g = PeriodicGrid(1, 4096, cfg.L)
    th = build_initial_data(cfg, g)
    v = th.values
    assert np.max(np.abs(v + v[(-np.arange(4096)) % 4096])) == 0.0
    assert barrier_check(th, Barrier(cfg.kappa0, cfg.H0, cfg.a0, cfg.L)).passed
    assert th.norm(math.inf) <= 2 * cfg.H0
    with pytest.raises(ConstructionError):
        build_initial_data(cfg, g, margin=0.0, smoothing=0.05)
    with pytest.raises(DomainError):
        build_initial_data(cfg, PeriodicGrid(1, 4096))


def test_short_run_keeps_barrier():
    cfg = BlowupConfig(grid_n=4096)
    r = blowup_experiment(cfg, max_checkpoints=30)
    assert r.verdict["barrier_ok"]
    assert r.verdict["checkpoints"] == 31
    assert not r.verdict["success"]   # stopped long before the flag
    ks = [row[2] for row in r.rows]
    assert ks == sorted(ks)


def test_critical_control_stays_smooth():
    cfg = BlowupConfig(grid_n=4096)
    th = build_initial_data(cfg, PeriodicGrid(1, 4096, cfg.L))
    rec = evolve(th, SolverConfig(alpha=0.5, dt=1e-4), cfg.T, Probes(every=50))
    gm = rec.column("grad_max")
    assert not rec.blowup_flag and gm.max() < 3 * gm[0]

# }}}
