"""Dissipation functional, flow majorants and the modulus certificate.

The dissipation functional of a concave modulus is computed from its
integrated-by-parts form

    D(xi) = (c / alpha) * int_0^inf (w'(xi + 2 eta) - w'(|xi - 2 eta|)) eta^(-2 alpha) d eta,

which avoids the cancellation of second differences at small eta.  The two
boundary terms produced on (0, xi/2] and [xi/2, inf) cancel.  The integrand is
non-positive for concave w, so truncating the tail can only raise D.
"""
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .errors import DivergenceError, DomainError, PreconditionError, QuadratureError
from .moduli import ScaledModulus, SqgCritical
from .quadrature import integrate, mesh_from_points, graded_edges


@dataclass(frozen=True)
class NmpConstants:
    c_alpha: float = 1.0
    A: float = 1.0
    margin: float = 0.0

    def __post_init__(self):
        if not (self.c_alpha > 0 and self.A > 0 and self.margin >= 0):
            raise DomainError("c_alpha and A must be positive, margin non-negative")


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-7
    abs_tol: float = 1e-14
    tail_cut: float = 1e6
    max_subdivisions: int = 40

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.tail_cut < 10:
            raise DomainError("tail_cut must be at least 10")


def exact_c_alpha(alpha):
    """Far-field constant of the 1D fractional heat kernel, Gamma(1+2a) sin(pi a)/pi."""
    return math.gamma(1.0 + 2.0 * alpha) * math.sin(math.pi * alpha) / math.pi


# {{{ dissipation functional

def _eta_points(omega, xi):
    kinks = set()
    for b in omega.breakpoints():
        if b > xi:
            kinks.add(0.5 * (b - xi))
        elif b < xi:
            kinks.add(0.5 * (xi - b))
        kinks.add(0.5 * (b + xi))
    kinks.discard(0.5 * xi)
    return sorted(kinks)


def dissipation_functional(alpha, omega, xi, q=None, c=None, details=False):
    """Dissipation functional of ``omega`` at ``xi`` (conservative: tail dropped).

    The mesh is graded geometrically toward eta = 0 and eta = xi/2, where the
    integrand has algebraic behaviour; the innermost panel at each of those
    points is replaced by its leading-order closed form.
    """
    q = q or QuadratureConfig()
    c = c or NmpConstants()
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    if not xi > 0:
        raise DomainError("xi must be positive")
    if not omega.is_concave():
        raise PreconditionError(f"modulus {omega!r} is not concave")
    two_a = 2.0 * alpha
    half = 0.5 * xi

    def integrand(eta):
        return (omega.slope(xi + 2.0 * eta) - omega.slope(np.abs(xi - 2.0 * eta))) * eta ** -two_a

    R = q.tail_cut * xi
    depth = q.max_subdivisions
    kinks = [k for k in _eta_points(omega, xi) if k < R]
    # xi within rounding of a breakpoint: the kink sits where xi - 2 eta cannot
    # resolve it.  Drop [0, lo] (integrand <= 0, so D only goes up).
    lo = 0.0
    if kinks and kinks[0] < 1e-7 * xi:
        lo = 16.0 * kinks[0] + 1e3 * np.finfo(float).eps * xi
        kinks = [k for k in kinks if k > lo]
    pts = sorted([lo, half, R] + kinks)
    flags = [p in (lo, half) for p in pts]
    parts = [np.array([lo])]
    gaps = np.diff(pts)
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        scale = min(xi, gaps[max(i - 1, 0)], gaps[min(i + 1, len(gaps) - 1)])
        d = max(depth if (flags[i] or flags[i + 1]) else 6,
                int(math.ceil(math.log2(max((b - a) / scale, 1.0)))) + 6)
        e = graded_edges(a, b, d, True, b != R, 2.0)
        parts.append(e[1:])
    edges = np.concatenate(parts)
    # innermost panels next to 0 and xi/2 are handled in closed form
    k_half = int(np.searchsorted(edges, half))
    eps0 = edges[1]
    eps_l = half - edges[k_half - 1]
    eps_r = edges[k_half + 1] - half
    value = 0.0
    err = 0.0
    first = 0 if lo > 0 else 1
    for i0, i1 in ((first, k_half - 1), (k_half + 1, len(edges) - 1)):
        v, e = integrate(integrand, edges[i0:i1 + 1])
        value += v
        err += e
    # near eta = 0 the integrand is a power of eta: eta^(1-2a) for smooth w,
    # eta^(-2a) when xi sits on a kink of w
    if lo == 0.0:
        f1, f2 = integrand(np.array([eps0, 0.5 * eps0]))
        p = math.log2(f1 / f2) if f1 < 0 and f2 < 0 else 1.0 - two_a
        value += f1 * eps0 / (p + 1.0) if p > -1.0 + 1e-9 else -math.inf
    value += half ** -two_a * (float(omega.slope(2.0 * xi)) * (eps_l + eps_r)
                               - 0.5 * (float(omega.eval(2.0 * eps_l)) + float(omega.eval(2.0 * eps_r))))
    slope_inf = omega.slope_at_infinity()

    def tail_bound(R):
        s = float(omega.slope(2.0 * R - xi))
        return max(0.0, R ** -two_a * xi * (s - slope_inf))

    tail = tail_bound(R)
    # extend the truncation radius while the analytic tail dominates the budget
    for _ in range(20):
        budget = max(q.abs_tol, q.rel_tol * abs(value))
        if tail <= 0.5 * budget:
            break
        R_new = R * 1e3
        extra, extra_err = integrate(integrand, graded_edges(R, R_new, depth=12, right=False))
        value += extra
        err += extra_err
        R = R_new
        tail = tail_bound(R)
    value *= c.c_alpha / alpha
    err = (err + tail) * c.c_alpha / alpha
    if math.isinf(value):
        err = 0.0
    if err > max(q.abs_tol, q.rel_tol * abs(value)):
        raise QuadratureError(f"dissipation quadrature at xi={xi} did not converge", value, err)
    if details:
        return value, {"error": err, "tail_bound": tail * c.c_alpha / alpha, "R": R,
                       "dropped_below": lo}
    return value

# }}}

# {{{ flow majorants

def flow_majorant_beta(omega, beta, xi, q=None, c=None):
    """A * (int_0^xi w(e) e^(beta-2) de + xi int_xi^inf w(e) e^(beta-3) de).

    After the substitutions e = xi v and e = xi / u both integrals live on
    [0, 1]:  xi^(beta-1) * (int_0^1 w(xi v) v^(beta-2) dv + int_0^1 w(xi/u) u^(1-beta) du).
    """
    q = q or QuadratureConfig()
    c = c or NmpConstants()
    if not 0.0 < beta <= 2.0:
        raise DomainError("beta must lie in (0, 2]")
    if xi <= 0:
        raise DomainError("xi must be positive")
    g = omega.growth_exponent
    if g >= 2.0 - beta:
        raise DivergenceError(f"tail integral diverges: growth {g} >= 2 - beta = {2.0 - beta}")
    z = omega.zero_exponent
    if z + beta - 1.0 <= 0:
        raise DivergenceError("near-zero integral diverges")
    depth = 60
    kinks = [b / xi for b in omega.breakpoints() if 0 < b < xi]
    e_near = mesh_from_points([0.0] + kinks + [1.0], depth=depth)
    near, err1 = integrate(lambda v: omega.eval(xi * v) * v ** (beta - 2.0), e_near[1:])
    v0 = e_near[1]
    near_rest = float(omega.eval(xi * v0)) * v0 ** (beta - 1.0) / (z + beta - 1.0)
    kinks = [xi / b for b in omega.breakpoints() if b > xi]
    e_far = mesh_from_points([0.0] + kinks + [1.0], depth=depth)
    far, err2 = integrate(lambda u: omega.eval(xi / u) * u ** (1.0 - beta), e_far[1:])
    u0 = e_far[1]
    s0 = xi / u0
    w0 = float(omega.eval(s0))
    g_loc = max(g, s0 * float(omega.slope(s0)) / w0) if w0 > 0 else g
    far_rest = w0 * u0 ** (2.0 - beta) / (2.0 - beta - g_loc)
    value = c.A * xi ** (beta - 1.0) * (near + near_rest + far + far_rest)
    err = c.A * xi ** (beta - 1.0) * (err1 + err2)
    if err > max(q.abs_tol, q.rel_tol * abs(value)):
        raise QuadratureError(f"flow majorant quadrature at xi={xi} did not converge", value, err)
    return value


def flow_majorant_sqg(omega, xi, c=None):
    """A * w(xi) * (4 + |log(xi/delta)|) for the SqgCritical family."""
    c = c or NmpConstants()
    base, B = omega, 1.0
    if isinstance(omega, ScaledModulus):
        base, B = omega.base, omega.B
    if not isinstance(base, SqgCritical):
        raise DomainError("sqg-log majorant needs an SqgCritical modulus")
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise DomainError("xi must be positive")
    delta = base.delta / B
    out = c.A * omega.eval(xi) * (4.0 + np.abs(np.log(xi / delta)))
    return float(out) if out.ndim == 0 else out

# }}}

# {{{ certificate


@dataclass
class CertificateReport:
    xi_grid: np.ndarray
    flow_term: np.ndarray
    diss_term: np.ndarray
    total: np.ndarray
    worst_xi: float
    passed: bool
    constants: NmpConstants
    flow: str = "burgers"
    modulus: str = ""
    alpha: float = 0.5
    flow_multiplier: float = 1.0
    indeterminate: list = field(default_factory=list)

    @property
    def worst_total(self):
        finite = self.total[~np.isnan(self.total)]
        return float(finite.max()) if finite.size else math.nan

    def to_json(self):
        payload = {
            "constants": asdict(self.constants),
            "modulus": self.modulus,
            "alpha": self.alpha,
            "flow": self.flow,
            "flow_multiplier": self.flow_multiplier,
            "grid": [float(v) for v in self.xi_grid],
            "flow_values": [float(v) for v in self.flow_term],
            "diss": [float(v) for v in self.diss_term],
            "total": [float(v) for v in self.total],
            "worst_xi": self.worst_xi,
            "worst_total": self.worst_total,
            "indeterminate": self.indeterminate,
            "pass": self.passed,
        }
        return json.dumps(payload, indent=1, sort_keys=True, allow_nan=True)


def log_grid(lo, hi, per_decade=200):
    n = int(math.ceil(per_decade * math.log10(hi / lo))) + 1
    return np.logspace(math.log10(lo), math.log10(hi), n)


def default_grid(omega, per_decade=200):
    ell = omega.length_scale
    return log_grid(1e-6 * ell, 1e4 * ell, per_decade)


def parse_flow(flow):
    """Normalise a flow selector: 'burgers', 'sqg-log' or ('beta', b) / 'beta(b)'."""
    if isinstance(flow, tuple):
        return flow
    flow = str(flow).strip()
    if flow in ("burgers", "sqg-log"):
        return (flow, None)
    if flow.startswith("beta(") and flow.endswith(")"):
        return ("beta", float(flow[5:-1]))
    raise DomainError(f"unknown flow selector {flow!r}")


def flow_values(omega, flow, grid, c, q):
    kind, beta = parse_flow(flow)
    if kind == "burgers":
        return np.asarray(omega.eval(grid), dtype=float)
    if kind == "sqg-log":
        return np.asarray(flow_majorant_sqg(omega, grid, c), dtype=float)
    # velocity grad-perp (-Lap)^(-beta) theta: singular-integral order 2*beta
    return np.array([flow_majorant_beta(omega, 2.0 * beta, x, q, c) for x in grid])


def certify(omega, alpha, flow="burgers", grid=None, c=None, q=None, flow_multiplier=1.0):
    """Check flow_multiplier * Omega * w'_+ + D < -margin on every grid point."""
    c = c or NmpConstants()
    q = q or QuadratureConfig()
    if flow_multiplier < 1:
        raise DomainError("flow_multiplier must be >= 1")
    grid = default_grid(omega) if grid is None else np.asarray(grid, dtype=float)
    kind, beta = parse_flow(flow)
    label = kind if beta is None else f"beta({beta})"
    n = grid.size
    diss = np.full(n, np.nan)
    flow_term = np.full(n, np.nan)
    bad = []
    if not omega.is_concave():
        bad = list(range(n))
    else:
        slopes = np.asarray(omega.upper_derivative(grid), dtype=float)
        try:
            flow_term = flow_multiplier * flow_values(omega, flow, grid, c, q) * slopes
        except (QuadratureError, DivergenceError):
            bad = list(range(n))
        for i, x in enumerate(grid):
            try:
                diss[i] = dissipation_functional(alpha, omega, float(x), q, c)
            except QuadratureError as exc:
                diss[i] = exc.value
                bad.append(i)
    total = flow_term + diss
    worst = int(np.nanargmax(total)) if np.any(np.isfinite(total)) else 0
    passed = not bad and bool(np.all(total < -c.margin))
    return CertificateReport(grid, flow_term, diss, total, float(grid[worst]), passed, c,
                             label, repr(omega), alpha, flow_multiplier, sorted(set(bad)))


@dataclass
class SweepResult:
    found: bool
    parameter: float
    report: CertificateReport = None
    bracketed: bool = True
    evaluations: list = field(default_factory=list)


def _pass_at(args):
    template, value, alpha, flow, c, q, flow_multiplier, per_decade = args
    try:
        omega = template(value)
    except ValueError:
        return False, None
    rep = certify(omega, alpha, flow, default_grid(omega, per_decade), c, q, flow_multiplier)
    return rep.passed, rep


def parameter_sweep(template, alpha, flow, c=None, search=(1.0, 1e6), direction="min",
                    q=None, flow_multiplier=1.0, n_scan=13, rel_resolution=1e-3,
                    per_decade=200, workers=1):
    """Boundary parameter of the pass region of ``template(p)``.

    A log-spaced scan locates a passing candidate; bisection (in log space)
    then refines the boundary between it and its failing neighbour.
    ``direction='min'`` returns the smallest passing value, 'max' the largest.
    """
    c = c or NmpConstants()
    q = q or QuadratureConfig()
    lo, hi = float(search[0]), float(search[1])
    if lo > hi or lo <= 0:
        raise DomainError("search range must satisfy 0 < lo <= hi")
    common = (alpha, flow, c, q, flow_multiplier, per_decade)
    scan = np.array([lo]) if lo == hi else np.geomspace(lo, hi, n_scan)
    jobs = [(template, float(v)) + common for v in scan]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_pass_at, jobs))
    else:
        results = [_pass_at(j) for j in jobs]
    evals = [(float(v), ok) for v, (ok, _) in zip(scan, results)]
    passing = [i for i, (ok, _) in enumerate(results) if ok]
    if not passing:
        return SweepResult(False, math.nan, None, False, evals)
    order = passing if direction == "min" else passing[::-1]
    i = order[0]
    good, good_rep = float(scan[i]), results[i][1]
    j = i - 1 if direction == "min" else i + 1
    if j < 0 or j >= len(scan):
        return SweepResult(True, good, good_rep, False, evals)
    bad = float(scan[j])
    while abs(math.log(good / bad)) > rel_resolution:
        mid = math.sqrt(good * bad)
        ok, rep = _pass_at((template, mid) + common)
        evals.append((mid, ok))
        if ok:
            good, good_rep = mid, rep
        else:
            bad = mid
    return SweepResult(True, good, good_rep, True, evals)

# }}}

# {{{ obedience


@dataclass
class ObedienceReport:
    max_ratio: float
    arg_pair: tuple
    method: str = "all pairs"


def check_obedience(field, omega, n_random=200000, seed=0):
    """Largest |theta(x) - theta(y)| / w(dist(x, y)) over grid pairs.

    1D fields are scanned exhaustively.  On uniform grids the periodic distance
    only takes n/2 distinct values, so w is tabulated once per shift.
    2D fields are scanned along every row and column plus a seeded random
    subsample of generic pairs.
    """
    grid = field.grid
    n = grid.n
    h = grid.spacing
    shifts = np.arange(1, n // 2 + 1)
    dists = shifts * h
    wtab = np.asarray(omega.eval(dists), dtype=float)
    if np.any(wtab <= 0):
        raise PreconditionError("modulus vanishes at a positive distance")
    inv_w = 1.0 / wtab
    vals = np.ascontiguousarray(field.values, dtype=float)
    if grid.dim == 1:
        ratio, i, m = kernels.obedience_1d(vals, inv_w)
        return ObedienceReport(float(ratio), (int(i), int((i + m) % n)))
    best, pair = 0.0, (0, 0)
    for axis in (0, 1):
        arr = vals if axis == 1 else vals.T
        for r in range(n):
            ratio, i, m = kernels.obedience_1d(np.ascontiguousarray(arr[r]), inv_w)
            if ratio > best:
                j = (i + m) % n
                pair = ((r, i), (r, j)) if axis == 1 else ((i, r), (j, r))
                best = ratio
    rng = np.random.default_rng(seed)
    a = rng.integers(0, n, size=(n_random, 2))
    b = rng.integers(0, n, size=(n_random, 2))
    d = np.abs(a - b)
    d = np.minimum(d, n - d) * h
    dist = np.hypot(d[:, 0], d[:, 1])
    keep = dist > 0
    a, b, dist = a[keep], b[keep], dist[keep]
    num = np.abs(vals[a[:, 0], a[:, 1]] - vals[b[:, 0], b[:, 1]])
    r = num / np.asarray(omega.eval(dist), dtype=float)
    k = int(np.argmax(r)) if r.size else 0
    if r.size and r[k] > best:
        best = float(r[k])
        pair = (tuple(int(v) for v in a[k]), tuple(int(v) for v in b[k]))
    return ObedienceReport(best, pair, f"axis slices + {int(keep.sum())} random pairs (seed {seed})")

# }}}
