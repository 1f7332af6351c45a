"""L^p rough data: the L-infinity decay ODE, the schedules G and F, the
time-dependent modulus check and the decay experiment."""
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConstructionError, DomainError
from .moduli import BurgersCritical
from .quadrature import integrate
from .spectral import Field, PeriodicGrid, Probes, SolverConfig, evolve

# {{{ L-infinity decay ODE


def linf_closed_form(M0, p, C1, C2, t):
    """Exact solution of M' = -C1 M^(p/2+1) + C2 M (with M(0) = M0 > 0)."""
    q = 0.5 * p
    e = np.exp(q * C2 * np.asarray(t, dtype=float))
    return (e / (M0 ** -q + (C1 / C2) * (e - 1.0))) ** (1.0 / q)


def linf_ceiling(p, C1, C2, t):
    """Data-independent bound (C2 / (C1 (1 - exp(-p C2 t / 2))))^(2/p)."""
    q = 0.5 * p
    return (C2 / (C1 * (1.0 - np.exp(-q * C2 * np.asarray(t, dtype=float))))) ** (1.0 / q)


def linf_rk4(M0, p, C1, C2, T, n_steps):
    q = 0.5 * p

    def rhs(m):
        return -C1 * m ** (q + 1.0) + C2 * m

    h = T / n_steps
    m = float(M0)
    ts, ms = [0.0], [m]
    for k in range(n_steps):
        k1 = rhs(m)
        k2 = rhs(m + 0.5 * h * k1)
        k3 = rhs(m + 0.5 * h * k2)
        k4 = rhs(m + h * k3)
        m += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        ts.append((k + 1) * h)
        ms.append(m)
    return np.array(ts), np.array(ms)

# }}}

# {{{ schedules


@dataclass
class RoughDataSchedule:
    p: float
    C_inf: float
    omega: object
    C_G: float
    t: np.ndarray
    G: np.ndarray
    F: np.ndarray
    # F is stored as f_scale / int_0^t G; f_scale != 1 only for perturbation studies
    f_scale: float = 1.0

    def level(self, t, C=None):
        C = self.C_G if C is None else C
        return C * np.asarray(t, dtype=float) ** (-2.0 / self.p)

    def perturbed(self, factor):
        """Same G, F multiplied by ``factor``."""
        return RoughDataSchedule(self.p, self.C_inf, self.omega, self.C_G, self.t, self.G,
                                 self.F * factor, self.f_scale * factor)

    def rate(self):
        """-F'/F^2 = (1/F)' on the grid."""
        return self.G / self.f_scale

    def to_csv(self, header_lines=()):
        out = [f"# {h}" for h in header_lines] + ["t,G,F"]
        out += [f"{a:.12e},{b:.12e},{c:.12e}" for a, b, c in zip(self.t, self.G, self.F)]
        return "\n".join(out) + "\n"


def schedule_G(omega, C, p, t):
    """G(t) = y / omega^{-1}(y) with y = C t^(-2/p); zero where the inverse overflows."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    y = C * t ** (-2.0 / p)
    x = np.atleast_1d(omega.inverse(y))
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(np.isfinite(x) & (x > 0), y / np.where(x > 0, x, 1.0), 0.0)
    return g


def schedule_build(p, C_inf, omega=None, t_grid=None, C_G=None, lower=1e-12):
    """Tabulate G and F = 1 / int_0^t G on ``t_grid``.

    ``C_G`` defaults to 2 C_inf so that G is the infimum of omega(x)/x over
    the whole set {omega(x) <= 2 C_inf t^(-2/p)} on which the check runs.
    The piece of the integral below ``lower * t_grid[0]`` is dropped and must
    be negligible.  F is infinite where the integral underflows to 0.
    """
    if not 1.0 < p < math.inf:
        raise DomainError("p must lie in (1, inf)")
    omega = omega if omega is not None else BurgersCritical(50.0)
    if math.isfinite(omega.sup()):
        raise ConstructionError("the base modulus must be unbounded so that its inverse is total")
    t_grid = np.geomspace(1e-3, 1e4, 141) if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
        raise DomainError("t_grid must be positive and increasing")
    C_G = 2.0 * C_inf if C_G is None else C_G

    def G(s):
        return schedule_G(omega, C_G, p, s.ravel()).reshape(s.shape)

    t0 = t_grid[0]
    a = lower * t0
    head, _ = integrate(G, np.geomspace(a, t0, 60))
    # G is nondecreasing in t (omega(x)/x decreases in x), so a G(a) bounds the dropped piece
    cut = a * float(schedule_G(omega, C_G, p, a)[0])
    if not math.isfinite(head) or cut > 1e-8 * head:
        raise ConstructionError("G is not integrable at 0 to the required accuracy")
    acc = [head]
    for lo, hi in zip(t_grid[:-1], t_grid[1:]):
        v, _ = integrate(G, np.geomspace(lo, hi, 9))
        acc.append(acc[-1] + v)
    I = np.array(acc)
    with np.errstate(divide="ignore"):
        F = np.where(I > 0, 1.0 / np.where(I > 0, I, 1.0), np.inf)
    return RoughDataSchedule(p, C_inf, omega, C_G, t_grid, schedule_G(omega, C_G, p, t_grid), F)


@dataclass
class TimedepReport:
    passed: bool
    n_checked: int
    worst_margin: float
    worst_t: float
    worst_xi: float
    stationary: object = None


def timedep_certify(s, alpha=0.5, flow="burgers", xi_grid=None, rel_tol=1e-12,
                    check_stationary=True, c_alpha=1.0):
    """Check -F'/F^2 <= omega(F xi) / (F xi) wherever omega(F xi) <= 2 C_inf t^(-2/p).

    The comparison is done in x = F xi.  Besides ``xi_grid`` (scaled by F at
    each t) the top of the admissible set is always included, which is where
    the inequality is tight for the constructed schedule.
    """
    if s is None or s.F is None:
        raise DomainError("schedule not built")
    stationary = None
    if check_stationary:
        from .certifier import NmpConstants, certify
        stationary = certify(s.omega, alpha, flow, c=NmpConstants(c_alpha=c_alpha),
                             flow_multiplier=2.0)
        if not stationary.passed:
            return TimedepReport(False, 0, -math.inf, math.nan, math.nan, stationary)
    xi_grid = np.geomspace(1e-10, 1e6, 321) if xi_grid is None else np.asarray(xi_grid, float)
    lhs = s.rate()
    ymax = s.level(s.t, 2.0 * s.C_inf)
    x_top = np.atleast_1d(s.omega.inverse(ymax))
    worst = (math.inf, math.nan, math.nan)
    ok, count = True, 0
    for i, t in enumerate(s.t):
        F = s.F[i]
        if not math.isfinite(F):
            # omega_F is a step: nothing to check at this time
            continue
        x = np.append(F * xi_grid, x_top[i])
        w = s.omega.eval(x)
        keep = (w <= ymax[i]) & (x > 0)
        x, w = x[keep], w[keep]
        rhs = w / x
        margin = rhs - lhs[i]
        count += x.size
        bad = margin < -rel_tol * np.maximum(np.abs(rhs), np.abs(lhs[i]))
        if np.any(bad):
            ok = False
        j = int(np.argmin(margin))
        if margin[j] < worst[0]:
            worst = (float(margin[j]), float(t), float(x[j] / F))
    return TimedepReport(ok, count, worst[0], worst[1], worst[2], stationary)

# }}}

# {{{ decay experiment


def spike_data(grid, p, width, smooth=True):
    """Mean-free, L^p-normalised spike |x|^(-1/(p+1)) capped at |x| = width.

    With ``smooth`` the cap is mollified by a Gaussian filter of the same width.
    """
    if width < 4.0 * grid.spacing * (1 - 1e-12):
        raise DomainError("spike width must cover at least 4 grid cells")
    x = grid.x
    v = np.maximum(np.abs(x), width) ** (-1.0 / (p + 1.0))
    f = Field(grid, v)
    if smooth:
        k = grid.kabs()
        f = Field.from_spectrum(grid, f.spectrum * np.exp(-0.5 * (k * width) ** 2))
    v = f.values - f.mean()
    nrm = Field(grid, v).norm(p)
    return Field(grid, v / nrm)


@dataclass
class DecayReport:
    p: float
    t: np.ndarray
    M: np.ndarray
    scaled: np.ndarray
    window: tuple
    sup_scaled: float
    C_check: float
    passed: bool
    applicable: bool = True
    truncated: bool = False
    extra: dict = dc_field(default_factory=dict)

    columns = ("t", "M", "M_scaled")

    def to_csv(self, header_lines=()):
        out = [f"# {h}" for h in header_lines] + [",".join(self.columns)]
        out += [f"{a:.12e},{b:.12e},{c:.12e}" for a, b, c in zip(self.t, self.M, self.scaled)]
        return "\n".join(out) + "\n"


def decay_experiment(theta0, p, cfg=None, T=1.0, t_min=0.05, C_check=math.inf, every=1,
                     tail_threshold=1e-6):
    """Evolve rough data and compare sup_{t in [t_min, T]} M(t) t^(2/p) with C_check."""
    if cfg is None:
        cfg = SolverConfig(alpha=0.5, velocity="burgers", dt=1e-3, scheme="if_rk4")
    v = theta0.values
    if float(np.max(v) - np.min(v)) <= 1e-14 * max(1.0, float(np.max(np.abs(v)))):
        # constant data: only the zero mode, nothing decays
        ts = np.array([0.0, T])
        M = np.full(2, float(np.max(np.abs(v))))
        return DecayReport(p, ts, M, M * ts ** (2.0 / p), (t_min, T), math.nan, C_check, True,
                           applicable=False)
    probes = Probes(lp=(math.inf,), grad=False, every=every, grad_factor=math.inf,
                    tail_threshold=tail_threshold)
    rec = evolve(theta0, cfg, T, probes)
    ts = rec.column("t")
    M = rec.column("Linf")
    ok = rec.column("resolved_flag").astype(bool)
    ts, M = ts[ok], M[ok]
    scaled = M * ts ** (2.0 / p)
    win = (ts >= t_min - 1e-12) & (ts <= T + 1e-12)
    sup = float(np.max(scaled[win])) if win.any() else math.nan
    passed = bool(win.any() and sup <= C_check and not rec.blowup_flag)
    return DecayReport(p, ts, M, scaled, (t_min, T), sup, C_check, passed,
                       truncated=bool(rec.blowup_flag), extra={"steps": rec.steps, "M0": float(M[0])})


def reference_decay(p, n=2048, width_cells=4, T=1.0, t_min=0.05, C_check=math.inf, L=math.pi,
                    tail_threshold=1e-6):
    """Critical Burgers run from the reference spike of the given width (in cells)."""
    grid = PeriodicGrid(1, n, L)
    theta0 = spike_data(grid, p, width_cells * grid.spacing)
    return decay_experiment(theta0, p, T=T, t_min=t_min, C_check=C_check,
                            tail_threshold=tail_threshold)

# }}}
