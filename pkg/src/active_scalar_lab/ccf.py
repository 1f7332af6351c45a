"""Diagnostics for the CCF model theta_t = (H theta) theta_x - (-Lap)^alpha theta.

Line Hilbert transforms by principal-value quadrature, the J functional, the
weighted nonlinear inequality harness and monitors for runs.
"""
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.special import dawsn

from . import kernels
from .errors import DivergenceError, DomainError
from .quadrature import graded_edges, integrate, panel_nodes
from .spectral import (Field, PeriodicGrid, Probes, SolverConfig, derivative, evolve,
                       fractional_laplacian)

# {{{ line functions


@dataclass
class LineFunction:
    """Even bounded function on the line with f(0) = 0, nondecreasing on (0, inf).

    ``f`` and ``df`` act on arrays of x >= 0 (evenness supplies the rest).
    ``hilbert`` is an optional closed form used only as a reference.
    """
    name: str
    f: object
    df: object
    sup: float
    hilbert: object = None
    breakpoints: tuple = ()
    R: float = 1e3

    def __call__(self, x):
        return self.f(np.abs(np.asarray(x, dtype=float)))

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * self.df(np.abs(x))

    def check(self, n=2001):
        xs = np.geomspace(1e-6, self.R, n)
        return bool(abs(float(self(0.0))) < 1e-14 and np.all(self.df(xs) >= -1e-14))


def rational_family(c):
    """x^2 / (c + x^2), with H f = -sqrt(c) x / (c + x^2)."""
    return LineFunction(f"rational_c{c:g}", lambda x: x * x / (c + x * x),
                        lambda x: 2 * c * x / (c + x * x) ** 2, 1.0,
                        lambda x: -math.sqrt(c) * x / (c + x * x))


def gaussian_family(s=1.0):
    """1 - exp(-(x/s)^2), with H f = -(2/sqrt(pi)) dawson(x/s)."""
    return LineFunction(f"gauss_s{s:g}", lambda x: -np.expm1(-(x / s) ** 2),
                        lambda x: 2 * x / s ** 2 * np.exp(-(x / s) ** 2), 1.0,
                        lambda x: -2.0 / math.sqrt(math.pi) * dawsn(x / s))


def rational2_family():
    """1 - (1 + x^2)^-2, with H f = -x (x^2 + 3) / (2 (1 + x^2)^2)."""
    return LineFunction("rational_sq", lambda x: 1.0 - 1.0 / (1 + x * x) ** 2,
                        lambda x: 4 * x / (1 + x * x) ** 3, 1.0,
                        lambda x: -x * (x * x + 3) / (2 * (1 + x * x) ** 2))


def ramp_family():
    """min(x, 1): the Hoelder-bound fixture (not C^1 at 1)."""
    return LineFunction("ramp", lambda x: np.minimum(x, 1.0),
                        lambda x: (x < 1.0) * 1.0, 1.0, None, (1.0,))


def default_family():
    return [rational_family(0.1), rational_family(1.0), rational_family(10.0),
            gaussian_family(1.0), gaussian_family(2.0), rational2_family()]


# }}}

# {{{ Hilbert transform on the line

_T_EDGES = np.unique(np.concatenate([graded_edges(0.0, 0.5, depth=30, right=False),
                                     graded_edges(0.5, 1.0, depth=40, left=False)]))


def hilbert_line(f, x, tol=1e-8):
    """(1/pi) PV int f(y) / (x - y) dy for an even LineFunction.

    Uses Hf(x) = (1/pi) int_0^inf (f(x - s) - f(x + s)) / s ds and the map
    s = t / (1 - t) onto [0, 1).  Returns a float for scalar x.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    extra = [b for b in f.breakpoints]
    for i, xv in enumerate(xs):
        if xv == 0.0:
            out[i] = 0.0
            continue
        # kinks of s -> f(|x - s|) sit at s = |x| and s = |x| +- breakpoints
        pts = {abs(xv)} | {abs(abs(xv) + sgn * b) for b in extra for sgn in (-1, 1)}
        ts = sorted(p / (1 + p) for p in pts if p > 0)
        edges = np.unique(np.concatenate([_T_EDGES] + [
            graded_edges(max(t - 0.05, 0.0), min(t + 0.05, 1.0), depth=30) for t in ts]))

        def g(t):
            s = t / (1.0 - t)
            return (f(xv - s) - f(xv + s)) / s / (1.0 - t) ** 2

        v, err = integrate(g, edges)
        if not np.isfinite(v):
            raise DivergenceError("Hilbert transform integral diverges")
        out[i] = v / math.pi
    return float(out[0]) if np.ndim(x) == 0 else out

# }}}

# {{{ J functional


@dataclass
class JConfig:
    delta: float = 0.1
    x_center: float = 0.0
    truncation: float = None
    extra_power: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise DomainError("delta must lie in (0, 1)")


def _j_line(f, cfg):
    """J for a callable: int_0^R (f(c) - f(c + x)) / x^(1 + d) dx on a graded mesh."""
    R = cfg.truncation if cfg.truncation is not None else 1.0
    s = 1.0 + cfg.delta + cfg.extra_power
    c = cfg.x_center
    f0 = float(np.asarray(f(np.array([c])))[0])
    edges = graded_edges(0.0, R, depth=50, right=False)

    def g(x):
        return (f0 - f(c + x)) / x ** s

    v, _ = integrate(g, edges[1:])
    # innermost panel: the numerator is ~ x^2 there
    e0 = edges[1]
    v += (f0 - float(np.asarray(f(np.array([c + e0])))[0])) * e0 ** (1.0 - s) / (3.0 - s)
    return v


def _j_field(theta, cfg):
    grid = theta.grid
    if grid.dim != 1:
        raise DomainError("J is defined for 1D fields")
    R = cfg.truncation if cfg.truncation is not None else grid.L
    s = 1.0 + cfg.delta + cfg.extra_power
    dx = grid.spacing
    c = cfg.x_center
    derivs = [theta.values, derivative(theta).values, derivative(theta, order=2).values]
    # Taylor data at the centre, via the spectral representation
    kx = grid.wavenumbers()[0]
    spec = theta.spectrum
    phase = np.exp(1j * kx * (c + grid.L))
    w = np.where((np.arange(kx.size) == 0) | (np.arange(kx.size) == kx.size - 1), 1.0, 2.0)
    taylor = []
    for m in range(0, 7):
        coef = (1j * kx) ** m * spec * phase * w
        if m % 2 == 1:
            coef = np.where(grid.nyquist_mask(), 0.0, coef)
        taylor.append(float(np.real(coef.sum())) / grid.n)
    # first cell by the Taylor polynomial, integrated exactly
    v = 0.0
    for m in range(1, 7):
        v -= taylor[m] / math.factorial(m) * dx ** (m + 1 - s) / (m + 1 - s)
    # remaining cells: quintic Hermite interpolation, GK on every cell
    n_cells = int(math.ceil((R - dx) / dx))
    edges = dx + dx * np.arange(n_cells + 1)
    edges[-1] = min(edges[-1], R)
    edges = edges[edges <= R + 1e-15]
    if edges.size < 2:
        return v
    x, wk, _ = panel_nodes(edges)
    j0 = (c - grid.x[0]) / dx
    full = np.isclose(np.diff(edges), dx, rtol=0, atol=1e-12 * dx)
    if abs(j0 - round(j0)) < 1e-9 and full.all():
        # aligned uniform cells: the Hermite basis at the GK nodes is shared
        t = (x[0] - edges[0]) / dx
        basis, _ = kernels._hermite_combine(t[:, None], dx, *np.eye(6)[:, None, :])
        idx = (int(round(j0)) + 1 + np.arange(x.shape[0])) % grid.n
        data = np.stack([derivs[0][idx], derivs[0][(idx + 1) % grid.n],
                         derivs[1][idx], derivs[1][(idx + 1) % grid.n],
                         derivs[2][idx], derivs[2][(idx + 1) % grid.n]])
        vals = (basis @ data).T
    else:
        vals, _ = kernels.hermite_eval_numpy(c + x.ravel(), grid.x[0], dx, derivs[0], derivs[1], derivs[2])
        vals = vals.reshape(x.shape)
    v += float(np.sum((taylor[0] - vals) / x ** s * wk))
    return v


def j_functional(theta, cfg=None):
    """J = int_0^R (theta(c) - theta(c + x)) / x^(1 + delta [+ extra_power]) dx.

    Accepts a 1D Field (R defaults to L) or a callable / LineFunction
    (R defaults to 1).
    """
    cfg = cfg or JConfig()
    if isinstance(theta, Field):
        return _j_field(theta, cfg)
    return _j_line(theta, cfg)

# }}}

# {{{ inequality harness


def _local_exponent(f, eps=1e-8):
    a, b = float(f(np.array([eps]))[0]), float(f(np.array([eps / 2]))[0])
    if a <= 0 or b <= 0:
        return math.inf
    return math.log2(a / b)


@dataclass
class NonlinRow:
    function_id: str
    p: float
    sigma: float
    lhs: float
    rhs: float
    ratio: float
    divergent: bool = False


def mainnonlin_check(f, p, sigma, hilbert=None):
    """lhs = -int_0^1 Hf f' f^(p-1) / x^sigma, rhs = int_0^1 f^(p+1) / x^(1+sigma).

    Hf comes from hilbert_line unless ``hilbert`` (a callable) is supplied.
    """
    if p < 1 or sigma <= 0:
        raise DomainError("need p >= 1 and sigma > 0")
    m = _local_exponent(f)
    if m * (p + 1) - sigma <= 0:
        return NonlinRow(f.name, p, sigma, math.inf, math.inf, math.nan, True)
    edges = graded_edges(0.0, 1.0, depth=40, right=False)
    hf = hilbert if hilbert is not None else (lambda x: hilbert_line(f, x.ravel()).reshape(x.shape))

    def lhs_int(x):
        return -hf(x) * f.df(x) * f(x) ** (p - 1) / x ** sigma

    def rhs_int(x):
        return f(x) ** (p + 1) / x ** (1 + sigma)

    lhs, _ = integrate(lhs_int, edges)
    rhs, _ = integrate(rhs_int, edges)
    return NonlinRow(f.name, p, sigma, lhs, rhs, lhs / rhs)


def nonlin_table(family=None, ps=(1, 2), sigmas=(0.5, 1.5)):
    family = family or default_family()
    return [mainnonlin_check(f, p, s) for f in family for p in ps for s in sigmas]


def htesteq_representation(f, x):
    """int_0^{2x} log|(y-x)/x| f'(y) dy + int_x^inf (f(y-x) - f(y+x)) / y dy.

    This equals pi * Hf(x) for Hf normalised with the 1/pi factor.
    """
    x = float(x)
    e1 = np.unique(np.concatenate([graded_edges(0.0, x, depth=40, left=False),
                                   graded_edges(x, 2 * x, depth=40, right=False)]))
    first, _ = integrate(lambda y: np.log(np.abs((y - x) / x)) * f.deriv(y), e1)
    # second integral on y = x / u, u in (0, 1]
    e2 = graded_edges(0.0, 1.0, depth=40, right=False)

    def g(u):
        y = x / u
        return (f(y - x) - f(y + x)) / y * x / u ** 2

    second, _ = integrate(g, e2)
    return first + second


@dataclass
class HtestRow:
    function_id: str
    x: float
    representation: float
    hilbert: float
    residual: float
    ok: bool


def htesteq_check(f, x, tol=1e-5):
    rep = htesteq_representation(f, x) / math.pi
    hf = hilbert_line(f, x)
    res = abs(rep - hf)
    return HtestRow(f.name, x, rep, hf, res, res <= tol * (1 + abs(hf)))


@dataclass
class HtcorRow:
    function_id: str
    x: float
    q: float
    hilbert: float
    bound: float
    holds_pi_scaled: bool
    holds_literal: bool


def htcor_check(f, x, q=1.5):
    """Hf(x) against log(q-1) (f(qx) - f(x/q)).

    ``holds_pi_scaled`` tests pi * Hf(x) <= bound (what the representation
    yields); ``holds_literal`` tests Hf(x) <= bound.
    """
    if not 1.0 < q < 2.0:
        raise DomainError("q must lie in (1, 2)")
    hf = hilbert_line(f, x)
    bound = math.log(q - 1.0) * float(f(q * x) - f(x / q))
    return HtcorRow(f.name, x, q, hf, bound, math.pi * hf <= bound + 1e-12,
                    hf <= bound + 1e-12)


def _from_zero(fn, b, depth=40):
    """int_0^b fn for fn ~ c u^g near 0 (g > -1): the innermost panel is done by the power law."""
    edges = graded_edges(0.0, b, depth=depth, right=False)
    v, _ = integrate(fn, edges[1:])
    e0 = edges[1]
    f1, f2 = (float(np.asarray(fn(np.array([e]))).ravel()[0]) for e in (e0, 0.5 * e0))
    if f1 != 0.0 and f2 != 0.0 and f1 * f2 > 0:
        g = math.log2(f1 / f2)
        if g <= -1.0:
            raise DivergenceError("integrand is not integrable at 0")
        v += f1 * e0 / (g + 1.0)
    return v


def _half_line_integral(fn, breaks=()):
    """int_0^inf fn(x) dx: graded mesh on (0, 1] plus x = 1/u on (0, 1]."""
    pts = sorted({0.0, 1.0} | {b for b in breaks if 0 < b < 1})
    near = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if a == 0.0:
            near += _from_zero(fn, b)
        else:
            v, _ = integrate(fn, graded_edges(a, b, depth=40))
            near += v
    far = _from_zero(lambda u: fn(1.0 / u) / u ** 2, 1.0)
    return near + far


@dataclass
class HolderReport:
    function_id: str
    delta: float
    alpha: float
    eps: float
    A: float
    B: float
    lhs22: float
    C1: float
    C2: float
    C2_needed: float
    C_eps: float
    C_eps_needed: float
    best21_ok: bool
    best22_ok: bool


def holder_constants(delta, alpha, eps):
    """Constants produced by the Cauchy-Schwarz argument.

    C1 = (1-d)/2, C2 = (1-d)/d^2 and C_eps = max(1/(4 eps (1-d-4a)), 1/(d+2a)).
    """
    C1 = (1.0 - delta) / 2.0
    C2 = (1.0 - delta) / delta ** 2
    C_eps = max(1.0 / (4.0 * eps * (1.0 - delta - 4.0 * alpha)), 1.0 / (delta + 2.0 * alpha))
    return C1, C2, C_eps


def holder_bounds_check(f, delta, alpha, eps):
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    if not 0.0 < alpha < 0.25:
        raise DomainError("the second bound needs 0 < alpha < 1/4")
    if not delta < 1.0 - 4.0 * alpha:
        raise DomainError("the second bound needs delta < 1 - 4 alpha")
    if not eps > 0:
        raise DomainError("eps must be positive")
    br = f.breakpoints
    A = _half_line_integral(lambda x: f(x) ** 2 / x ** (2 + delta), br)
    B = _half_line_integral(lambda x: np.abs(f(x)) / x ** (1 + delta), br)
    lhs22 = _half_line_integral(lambda x: f(x) / x ** (1 + delta + 2 * alpha), br)
    M = f.sup
    C1, C2, C_eps = holder_constants(delta, alpha, eps)
    C2_needed = max(0.0, (C1 * B * B - A) / (1 + M * M))
    C_eps_needed = max(0.0, (lhs22 - eps * A) / (1 + M))
    return HolderReport(f.name, delta, alpha, eps, A, B, lhs22, C1, C2, C2_needed, C_eps,
                        C_eps_needed, A >= C1 * B * B - C2 * (1 + M * M),
                        lhs22 <= eps * A + C_eps * (1 + M))

# }}}

# {{{ runs


@dataclass
class MonitorReport:
    frames: int
    positive: list
    even: list
    monotone: list
    first_violation: float
    ok_until_flag: bool


def monotonicity_checks(theta):
    """(positive, even, monotone) flags for a periodic field centred at x = 0."""
    grid = theta.grid
    v = theta.values
    n = grid.n
    scale = max(float(np.max(np.abs(v))), 1e-300)
    # x_j = -L + j dx; x = 0 at j = n/2, so reflection is j -> n - j
    mirror = (n - np.arange(n)) % n
    even = float(np.max(np.abs(v - v[mirror]))) <= 1e-8 * scale
    positive = bool(np.min(v) > -1e-8)
    d = derivative(theta).values
    inner = d[n // 2 + 1:]
    monotone = bool(np.max(inner) <= 1e-6 * max(float(np.max(np.abs(d))), 1e-300))
    return positive, even, monotone


def monotonicity_monitor(frames, times=None, resolved=None):
    """Check positivity, evenness and monotone decay on (0, L) for every frame."""
    times = times if times is not None else list(range(len(frames)))
    resolved = resolved if resolved is not None else [True] * len(frames)
    pos, ev, mono = [], [], []
    first = math.nan
    ok = True
    for f, t, r in zip(frames, times, resolved):
        p, e, m = monotonicity_checks(f)
        pos.append(p)
        ev.append(e)
        mono.append(m)
        if not (p and e and m) and math.isnan(first):
            first = t
            if r:
                ok = False
    return MonitorReport(len(frames), pos, ev, mono, first, ok)


@dataclass
class CcfRunResult:
    record: object
    verdict: dict
    frames: list = dc_field(default_factory=list, repr=False)


def initial_profile(kind, amplitude, L, width=1.0, order=5):
    """Even, positive data decaying on (0, L).

    ``cosine``: A (1 + cos(pi x / L)); ``flattop``: A (1 - sin(pi x / 2L)^(2 order));
    ``gaussian``: A exp(-x^2 / 2 width^2).
    """
    if kind == "cosine":
        return lambda x: amplitude * (1.0 + np.cos(math.pi * x / L))
    if kind == "flattop":
        return lambda x: amplitude * (1.0 - np.sin(0.5 * math.pi * x / L) ** (2 * int(order)))
    if kind == "gaussian":
        return lambda x: amplitude * np.exp(-0.5 * (x / width) ** 2)
    raise DomainError(f"unknown profile {kind!r}")


def ccf_experiment(amplitude=100.0, alpha=0.2, delta=0.1, n=16384, L=math.pi, T=0.1, dt=1e-3,
                   every=10, tail_threshold=1e-14, grad_factor=1e9, profile="flattop", order=5,
                   width=1.0, cfl_safety=1.0):
    """Evolve CCF from even bump data and track J, the dissipative J and monitors.

    The default tail threshold is tight on purpose: the monotonicity monitor
    sees grid-scale ripple from the dealiasing cutoff long before an energy
    fraction of 1e-8 would notice it.
    """
    grid = PeriodicGrid(1, n, L)
    theta0 = Field.from_function(grid, initial_profile(profile, amplitude, L, width, order))
    cfg = SolverConfig(alpha=alpha, velocity="ccf", dt=dt, scheme="if_rk4", cfl_safety=cfl_safety)
    jc = JConfig(delta=delta)
    jc2 = JConfig(delta=delta, extra_power=2 * alpha)
    frames = []

    def j1(f, t):
        return j_functional(f, jc)

    def j2(f, t):
        return j_functional(f, jc2)

    def keep(f, t):
        frames.append(f)
        return float(f.values.min())

    probes = Probes(lp=(2, math.inf), grad=True, every=every,
                    extra={"J_delta": j1, "J_delta_2alpha": j2, "min": keep},
                    grad_factor=grad_factor, tail_threshold=tail_threshold)
    rec = evolve(theta0, cfg, T, probes)
    J = rec.column("J_delta")
    t = rec.column("t")
    resolved = rec.column("resolved_flag").astype(bool)
    Jr = J[resolved]
    mon = monotonicity_monitor(frames, list(t), list(resolved))
    verdict = {
        "J0": float(J[0]),
        "J_end": float(Jr[-1]),
        "J_growth": float(Jr[-1] / J[0]),
        "J_nondecreasing": bool(np.all(np.diff(Jr) >= -1e-10 * np.abs(Jr[1:]))),
        "monitors_ok": bool(mon.ok_until_flag),
        "blowup_flag": bool(rec.blowup_flag),
        "flag_time": rec.flag_time,
        "flag_reason": rec.flag_reason,
        "t_end": float(t[resolved][-1]),
        "max_increase": rec.max_increase,
    }
    return CcfRunResult(rec, verdict, frames)

# }}}
