"""Blow-up construction for supercritical fractional Burgers.

A piecewise linear barrier phi(kappa, H, a, .) bounds an odd periodic solution
from below on [0, L]; its parameters follow a discrete recursion that is
compared with the ODE system

    kappa' = kappa^2 - C kappa^(1+2a) H^(-2a),   H' = -C kappa^(2a) H^(1-2a).
"""
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (CflError, ConstructionError, DomainError, RecursionBreakdown)
from .spectral import Field, PeriodicGrid, SolverConfig, derivative, gradient_max, step, tail_fraction
from .splitting import burgers_characteristic_step, diffusion_step

# {{{ barrier


@dataclass(frozen=True)
class Barrier:
    kappa: float
    H: float
    a: float
    L: float

    def __post_init__(self):
        if not (self.kappa > 0 and self.H > 0 and self.a > 0 and self.L > 0):
            raise ConstructionError("barrier parameters must be positive")
        if self.delta > self.L - self.a:
            raise ConstructionError("ramp and edge overlap: need H/kappa <= L - a")

    @property
    def delta(self):
        return self.H / self.kappa

    def conditions(self, theta_inf=None, alpha=None):
        """The step conditions H/kappa <= a, L >= 4a (and the L^-2a bound when given)."""
        out = {"ramp_within_edge": self.delta <= self.a, "edge_small": self.L >= 4.0 * self.a}
        if theta_inf is not None and alpha is not None:
            out["sup_bound"] = self.L ** (-2 * alpha) * theta_inf <= 4 * self.H * self.a ** (-2 * alpha)
        return out


def barrier_eval(b, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > b.L * (1 + 1e-14)):
        raise DomainError("barrier is defined on [0, L]")
    out = np.where(x <= b.delta, b.kappa * x,
                   np.where(x <= b.L - b.a, b.H, b.H / b.a * (b.L - x)))
    return float(out) if out.ndim == 0 else out


@dataclass
class BarrierMargin:
    margin: float
    worst_x: float
    passed: bool
    parity_residual: float


def _mirror_index(n):
    return (-np.arange(n)) % n


def barrier_check(theta, b, slack=0.0):
    """min over grid x in [0, L] of theta(x) - phi(x).

    ``theta`` lives on [-L, L) with the barrier's L and must be odd.
    """
    grid = theta.grid
    if grid.dim != 1 or abs(grid.L - b.L) > 1e-12 * b.L:
        raise DomainError("field grid does not match the barrier period")
    v = theta.values
    scale = max(float(np.max(np.abs(v))), 1e-300)
    # x_j = -L + j dx, and -x_j sits at index (n - j) mod n
    parity = float(np.max(np.abs(v + v[_mirror_index(grid.n)]))) / scale
    if parity > 1e-8:
        raise DomainError(f"field is not odd (relative residual {parity:.2e})")
    half = grid.n // 2
    x = grid.x[half:]
    x = np.append(x, grid.L)
    vals = np.append(v[half:], v[0])
    diff = vals - barrier_eval(b, np.clip(x, 0.0, b.L))
    j = int(np.argmin(diff))
    m = float(diff[j])
    return BarrierMargin(m, float(x[j]), m >= -slack, parity)

# }}}

# {{{ recursion and ODE system


@dataclass
class BlowupConfig:
    alpha: float = 0.25
    c_alpha: float = 1.0
    c_split: float = 0.0
    h: float = 1e-4
    kappa0: float = None
    H0: float = 1.0
    a0: float = None
    L: float = None
    T: float = None
    theta_inf: float = 2.0
    grid_n: int = 16384
    solver: str = "spectral"
    margin: float = 0.5
    smoothing: float = None
    grad_factor: float = 10.0
    flag_grad_factor: float = 50.0
    tail_threshold: float = 1e-4
    cfl_safety: float = 0.5
    kappa_cap: float = 1e6
    barrier_slack: float = 1e-10

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise DomainError("alpha must lie in (0, 1/2)")
        if self.c_alpha < 0 or self.c_split < 0 or not self.h > 0:
            raise DomainError("c_alpha, c_split must be >= 0 and h > 0")
        k_min = kappa_threshold(self.alpha, self.c_alpha)
        if self.kappa0 is None:
            self.kappa0 = k_min
        elif self.kappa0 < k_min * (1 - 1e-12):
            raise DomainError(f"kappa0 must be at least {k_min}")
        if self.a0 is None:
            self.a0 = 1.0 / self.kappa0
        if self.L is None:
            self.L = 16.0 * self.a0
        elif self.L < 16.0 * self.a0 * (1 - 1e-12):
            raise DomainError("L must be at least 16 a0")
        if self.T is None:
            self.T = 1.5 / self.kappa0
        if self.solver not in ("spectral", "splitting"):
            raise DomainError("solver must be spectral or splitting")


def kappa_threshold(alpha, c_alpha):
    """(3C/(1-2a))^(1/(1-2a)), the initial slope that makes Q start at 3C/(1-2a)."""
    if c_alpha == 0:
        return 0.0
    return (3.0 * c_alpha / (1.0 - 2.0 * alpha)) ** (1.0 / (1.0 - 2.0 * alpha))


def recursion_step(kappa, H, a, cfg):
    h = cfg.h
    if kappa * h >= 1.0:
        raise RecursionBreakdown(f"kappa * h = {kappa * h:.3g} >= 1")
    damp = 1.0 - cfg.c_alpha * kappa ** (2 * cfg.alpha) * H ** (-2 * cfg.alpha) * h
    k_new = kappa * damp / (1.0 - kappa * h) - cfg.c_split * h * h
    H_new = H * damp - cfg.c_split * h * h
    return k_new, H_new, a + h * cfg.theta_inf


def recursion(cfg, n_steps):
    """kappa_n, H_n, a_n for n = 0..n_steps (shorter if the recursion breaks down)."""
    ks, Hs, As = [cfg.kappa0], [cfg.H0], [cfg.a0]
    for _ in range(n_steps):
        try:
            k, H, a = recursion_step(ks[-1], Hs[-1], As[-1], cfg)
        except RecursionBreakdown:
            break
        if not (k > 0 and H > 0):
            break
        ks.append(k)
        Hs.append(H)
        As.append(a)
    return np.array(ks), np.array(Hs), np.array(As)


@dataclass
class OdeState:
    kappa: float
    H: float
    t: float = 0.0
    C_alpha: float = 1.0

    def __post_init__(self):
        if not (self.kappa > 0 and self.H > 0):
            raise DomainError("kappa and H must be positive")


@dataclass
class OdeTrajectory:
    t: np.ndarray
    kappa: np.ndarray
    H: np.ndarray
    hit_time: float = math.nan
    degenerate: bool = False
    alpha: float = 0.25
    C_alpha: float = 1.0


def _rhs(y, alpha, C):
    k, H = y
    d = C * k ** (2 * alpha) * H ** (-2 * alpha)
    return np.array([k * k - k * d, -d * H])


def _rk4(y, h, alpha, C):
    k1 = _rhs(y, alpha, C)
    k2 = _rhs(y + 0.5 * h * k1, alpha, C)
    k3 = _rhs(y + 0.5 * h * k2, alpha, C)
    k4 = _rhs(y + h * k3, alpha, C)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def ode_integrate(s0, alpha, h_ode, T, cap=1e6):
    """Fixed-step RK4 until T or until kappa reaches ``cap``.

    The step that crosses the cap is bisected to locate the hit time.
    """
    C = s0.C_alpha
    ts, ks, Hs = [s0.t], [s0.kappa], [s0.H]
    y = np.array([s0.kappa, s0.H])
    t = s0.t
    hit = math.nan
    degenerate = False
    n_steps = int(round((T - t) / h_ode))
    for i in range(n_steps):
        h = min(h_ode, T - t) if i == n_steps - 1 else h_ode
        y_new = _rk4(y, h, alpha, C)
        if not np.all(np.isfinite(y_new)) or y_new[0] >= cap:
            lo, hi = 0.0, h
            while hi - lo > 1e-15 * max(1.0, t):
                mid = 0.5 * (lo + hi)
                ym = _rk4(y, mid, alpha, C)
                if np.all(np.isfinite(ym)) and ym[0] < cap:
                    lo = mid
                else:
                    hi = mid
            hit = t + 0.5 * (lo + hi)
            break
        if y_new[1] <= 0:
            degenerate = True
            break
        y, t = y_new, t + h
        ts.append(t)
        ks.append(y[0])
        Hs.append(y[1])
    return OdeTrajectory(np.array(ts), np.array(ks), np.array(Hs), hit, degenerate, alpha, C)


@dataclass
class ConservationReport:
    applicable: bool
    monotone: bool
    worst_decrease: float
    identity_error: float
    identity_tol: float
    identity_ok: bool
    Q: np.ndarray = dc_field(repr=False, default=None)


def conservation_identity(kappa, H, alpha, C):
    """(1-2a) kappa (Q - C/(1-2a)) with Q = H^(2a) kappa^(1-2a)."""
    Q = H ** (2 * alpha) * kappa ** (1 - 2 * alpha)
    return (1 - 2 * alpha) * kappa * (Q - C / (1 - 2 * alpha))


def conservation_monitor(traj, alpha, C_alpha):
    k, H, t = traj.kappa, traj.H, traj.t
    Q = H ** (2 * alpha) * k ** (1 - 2 * alpha)
    thresh = C_alpha / (1 - 2 * alpha)
    applicable = bool(Q[0] >= thresh * (1 - 1e-12))
    drops = (Q[:-1] - Q[1:]) / Q[:-1]
    worst = float(drops.max()) if drops.size else 0.0
    monotone = (not applicable) or worst <= 1e-9
    err, tol = 0.0, 0.0
    if t.size >= 5:
        h = float(t[1] - t[0])
        fd = (Q[2:] - Q[:-2]) / (2 * h)
        exact = conservation_identity(k[1:-1], H[1:-1], alpha, C_alpha)
        err = float(np.max(np.abs(fd - exact)))
        # central differences err by h^2/6 Q'''; estimate Q''' from the data
        d3 = np.abs(np.diff(Q, 3)) / h ** 3
        tol = 2.0 * h * h / 6.0 * float(d3.max()) + 1e-12 * float(np.max(np.abs(exact)) + 1.0)
    return ConservationReport(applicable, bool(monotone), worst, err, tol, err <= tol, Q)


@dataclass
class ComparisonTable:
    h: list
    kappa_err: list
    H_err: list
    steps: list
    orders: list
    truncated: list


def compare_ode_recursion(cfg, h_list, horizon, ref_factor=64):
    """Max errors of the recursion against a fine RK4 solution at t = n h."""
    errs_k, errs_H, steps, trunc = [], [], [], []
    for h in h_list:
        n = int(math.floor(horizon / h + 1e-9))
        sub = BlowupConfig(**{**cfg.__dict__, "h": h})
        ks, Hs, _ = recursion(sub, n)
        trunc.append(ks.size < n + 1)
        m = ks.size - 1
        if cfg.c_alpha == 0:
            tt = h * np.arange(m + 1)
            k_ref = cfg.kappa0 / (1.0 - cfg.kappa0 * tt)
            H_ref = np.full(m + 1, cfg.H0)
        else:
            fine = ode_integrate(OdeState(cfg.kappa0, cfg.H0, 0.0, cfg.c_alpha), cfg.alpha,
                                 h / ref_factor, m * h, cap=math.inf)
            k_ref = fine.kappa[::ref_factor][:m + 1]
            H_ref = fine.H[::ref_factor][:m + 1]
        errs_k.append(float(np.max(np.abs(ks[:m + 1] - k_ref))))
        errs_H.append(float(np.max(np.abs(Hs[:m + 1] - H_ref))))
        steps.append(m)
    orders = []
    for i in range(len(h_list) - 1):
        r = h_list[i] / h_list[i + 1]
        e0, e1 = errs_k[i], errs_k[i + 1]
        orders.append(math.log(e0 / e1) / math.log(r) if e0 > 0 and e1 > 0 else math.nan)
    return ComparisonTable(list(h_list), errs_k, errs_H, steps, orders, trunc)

# }}}

# {{{ initial data and the experiment


def build_initial_data(cfg, grid, margin=None, smoothing=None):
    """Low-pass filtered odd extension of phi(kappa0 (1+m), H0 (1+m), a0, .).

    The filter is a Gaussian multiplier exp(-(k s)^2 / 2).  The result must
    dominate phi(kappa0, H0, a0, .) on the grid and stay below 2 H0 in sup
    norm, otherwise a ConstructionError suggests a larger margin.
    """
    m = cfg.margin if margin is None else margin
    if grid.dim != 1 or abs(grid.L - cfg.L) > 1e-12 * cfg.L:
        raise DomainError("grid must be 1D with half-period cfg.L")
    delta0 = cfg.H0 / cfg.kappa0
    if delta0 < 16 * grid.spacing:
        raise ConstructionError("grid does not resolve H0/kappa0 with 16 points")
    s = smoothing if smoothing is not None else (cfg.smoothing or 4.0 * grid.spacing)
    big = Barrier(cfg.kappa0 * (1 + m), cfg.H0 * (1 + m), cfg.a0, cfg.L)
    x = grid.x
    raw = np.sign(x) * barrier_eval(big, np.abs(x))
    raw[0] = 0.0
    f = Field(grid, raw)
    k = grid.kabs()
    smooth = Field.from_spectrum(grid, f.spectrum * np.exp(-0.5 * (k * s) ** 2))
    # restore exact oddness lost to round-off
    v = smooth.values
    v = 0.5 * (v - v[_mirror_index(grid.n)])
    theta0 = Field(grid, v)
    chk = barrier_check(theta0, Barrier(cfg.kappa0, cfg.H0, cfg.a0, cfg.L))
    if not chk.passed or theta0.norm(math.inf) > 2 * cfg.H0:
        need = m + max(0.0, -chk.margin) / cfg.H0 + 0.05
        raise ConstructionError(f"initial data does not dominate the barrier (margin {chk.margin:.3g});"
                                f" try margin >= {need:.3g} or less smoothing")
    return theta0


def hs_seminorm(theta, s):
    k = theta.grid.kabs()
    c = np.abs(theta.spectrum) ** 2
    w = np.where((np.arange(k.size) == 0) | (np.arange(k.size) == k.size - 1), 1.0, 2.0)
    return float(math.sqrt(np.sum(w * c * k ** (2 * s)) / theta.grid.n ** 2 * 2 * theta.grid.L))


@dataclass
class BlowupResult:
    columns: list
    rows: list
    verdict: dict
    final: Field = None

    def to_csv(self, header_lines=()):
        from .spectral import _fmt
        out = [f"# {line}" for line in header_lines]
        out.append(",".join(self.columns))
        out += [",".join(_fmt(v) for v in r) for r in self.rows]
        return "\n".join(out) + "\n"


def blowup_experiment(cfg, solver=None, theta0=None, max_checkpoints=None):
    """Run the PDE from barrier-dominating data and track the barrier recursion.

    At every multiple of cfg.h the field is checked against
    Barrier(kappa_n, H_n, a_n).  The run stops at the blow-up flag (gradient
    above flag_grad_factor times its initial value, or spectral tail fraction
    above tail_threshold), at T, or when the recursion breaks down.
    """
    solver = solver or cfg.solver
    grid = PeriodicGrid(1, cfg.grid_n, cfg.L)
    theta = theta0 if theta0 is not None else build_initial_data(cfg, grid)
    theta_inf = theta.norm(math.inf)
    rcfg = BlowupConfig(**{**cfg.__dict__, "theta_inf": theta_inf})
    scfg = SolverConfig(alpha=cfg.alpha, velocity="burgers", dt=cfg.h, scheme="if_rk4",
                        cfl_safety=cfg.cfl_safety)
    g0 = gradient_max(theta)
    kappa, H, a = cfg.kappa0, cfg.H0, cfg.a0
    columns = ["t", "grad_max", "kappa_n", "H_n", "a_n", "barrier_margin", "conditions_ok",
               "parity", "theta0_pin", "tail", "hs1", "hs1_5"]
    rows = []
    barrier_ok = True
    first_violation = math.nan
    flag_time, flag_reason = math.nan, ""
    breakdown_time = math.nan
    n_max = int(math.floor(cfg.T / cfg.h + 1e-9))
    if max_checkpoints is not None:
        n_max = min(n_max, max_checkpoints)
    t = 0.0
    dt = cfg.h
    n = 0
    while True:
        b = Barrier(kappa, H, a, cfg.L)
        chk = barrier_check(theta, b, cfg.barrier_slack * theta_inf)
        cond = b.conditions()
        gm = gradient_max(theta)
        tf = tail_fraction(theta)
        pin = abs(float(theta.values[grid.n // 2])) / max(theta.norm(math.inf), 1e-300)
        rows.append([t, gm, kappa, H, a, chk.margin, all(cond.values()), chk.parity_residual,
                     pin, tf, hs_seminorm(theta, 1.0), hs_seminorm(theta, 1.5)])
        if not chk.passed and barrier_ok:
            barrier_ok = False
            first_violation = t
        if gm > cfg.flag_grad_factor * g0:
            flag_time, flag_reason = t, "gradient"
        elif tf > cfg.tail_threshold:
            flag_time, flag_reason = t, "resolution"
        if flag_reason or n >= n_max:
            break
        try:
            kappa, H, a = recursion_step(kappa, H, a, rcfg)
        except RecursionBreakdown:
            breakdown_time = t
            break
        if not (kappa > 0 and H > 0):
            breakdown_time = t
            break
        # advance the PDE by one checkpoint interval
        if solver == "splitting":
            theta = diffusion_step(burgers_characteristic_step(theta, cfg.h), cfg.alpha, cfg.h)
        else:
            target = (n + 1) * cfg.h
            while t < target * (1 - 1e-13):
                hstep = min(dt, target - t)
                try:
                    theta = step(theta, scfg, hstep)
                except CflError as exc:
                    dt = 0.9 * exc.suggested_dt
                    continue
                t += hstep
        n += 1
        t = n * cfg.h
    grads = np.array([r[1] for r in rows])
    ode = ode_integrate(OdeState(cfg.kappa0, cfg.H0, 0.0, cfg.c_alpha), cfg.alpha,
                        min(cfg.h, cfg.T / 2000), cfg.T, cap=cfg.kappa_cap)
    growth = float(grads.max() / g0)
    flagged = not math.isnan(flag_time) and flag_time < cfg.T
    verdict = {
        "barrier_ok": bool(barrier_ok),
        "first_violation_time": first_violation,
        "blowup_flag": bool(flagged),
        "blowup_flag_time": flag_time,
        "flag_reason": flag_reason,
        "kappa_ode_hit_time": ode.hit_time,
        "recursion_breakdown_time": breakdown_time,
        "T": cfg.T,
        "gradient_growth": growth,
        "success": bool(barrier_ok and flagged and growth >= cfg.grad_factor),
        "theta_inf": theta_inf,
        "checkpoints": len(rows),
    }
    return BlowupResult(columns, rows, verdict, theta)

# }}}
