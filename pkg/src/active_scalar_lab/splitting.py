"""Time splitting for fractional Burgers: exact transport by characteristics
alternated with exact fractional diffusion, plus the fractional heat kernel.
"""
import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaincc, zeta

from . import kernels
from .errors import DomainError, ShockInStepError
from .quadrature import graded_edges, integrate, panel_nodes
from .spectral import Field, derivative, gradient_max

# {{{ fractional heat kernel


def _cutoff(alpha, tol=1e-17):
    """S with int_S^inf exp(-s^(2 alpha)) ds < tol (upper incomplete gamma)."""
    p = 2.0 * alpha
    scale = math.gamma(1.0 / p) / p
    lo, hi = 0.0, 1.0
    while scale * gammaincc(1.0 / p, hi ** p) > tol:
        lo, hi = hi, 2.0 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if scale * gammaincc(1.0 / p, mid ** p) > tol:
            lo = mid
        else:
            hi = mid
    return hi


@lru_cache(maxsize=8)
def _kernel_mesh(alpha, x_abs):
    xi_max = _cutoff(alpha)
    # panels no longer than pi/|x| resolve the oscillation; otherwise they grow geometrically
    cap = math.pi / x_abs if x_abs > 0 else math.inf
    width = min(1.0, cap)
    head = graded_edges(0.0, width, depth=40, right=False)
    body = [width]
    while body[-1] < xi_max:
        body.append(body[-1] + min(cap, max(width, 0.1 * body[-1])))
    return np.concatenate([head, np.array(body[1:])])


_U_EDGES = graded_edges(0.0, 1.0, depth=40, right=False)
_U_EDGES = np.concatenate([_U_EDGES, np.linspace(1.0, 48.0, 48)[1:]])


def _kernel_rotated(alpha, xs):
    """Phi for alpha <= 1/2 after rotating the contour onto the imaginary axis.

    Phi(x) = (1/(pi x)) int_0^inf exp(-u - (u/x)^(2a) cos(pi a)) sin((u/x)^(2a) sin(pi a)) du
    which has no oscillation and decays like exp(-u).
    """
    ca, sa = math.cos(math.pi * alpha), math.sin(math.pi * alpha)
    out = np.empty_like(xs)
    u, wk, _ = panel_nodes(_U_EDGES)
    u, wk = u.ravel(), wk.ravel()
    base = np.exp(-u)
    for lo in range(0, xs.size, 256):
        x = xs[lo:lo + 256, None]
        z = (u[None, :] / x) ** (2.0 * alpha)
        vals = base * np.exp(-z * ca) * np.sin(z * sa)
        out[lo:lo + 256] = (vals @ wk) / (math.pi * x[:, 0])
    return out


def kernel_eval(alpha, x):
    """Phi(x) = (1/pi) int_0^inf cos(x s) exp(-s^(2 alpha)) ds."""
    if not 0.0 < alpha <= 1.0:
        raise DomainError("alpha must lie in (0, 1]")
    xs = np.abs(np.atleast_1d(np.asarray(x, dtype=float))).ravel()
    out = np.empty_like(xs)
    far = (xs >= 1.0) if alpha <= 0.5 else np.zeros(xs.shape, dtype=bool)
    if far.any():
        out[far] = _kernel_rotated(alpha, xs[far])
    for i in np.flatnonzero(~far):
        xv = xs[i]
        # round the oscillation scale so nearby x share a mesh
        key = 0.0 if xv < 1e-3 else float(2.0 ** math.ceil(math.log2(xv)))
        edges = _kernel_mesh(float(alpha), key)
        v, _ = integrate(lambda s: np.cos(xv * s) * np.exp(-s ** (2.0 * alpha)), edges)
        out[i] = v / math.pi
    if np.ndim(x) == 0:
        return float(out[0])
    return out.reshape(np.shape(x))


def kernel_eval_t(alpha, x, t):
    """Phi_t(x) = t^(-1/(2 alpha)) Phi(t^(-1/(2 alpha)) x)."""
    s = t ** (-1.0 / (2.0 * alpha))
    return s * kernel_eval(alpha, s * np.asarray(x, dtype=float))


def far_field_constant(alpha):
    """Limit of Phi(x) |x|^(1+2 alpha) as |x| -> inf (alpha < 1)."""
    return math.gamma(1.0 + 2.0 * alpha) * math.sin(math.pi * alpha) / math.pi


@dataclass
class KernelReport:
    alpha: float
    K: float
    positive: bool
    even_residual: float
    mass: float
    envelope_ok: bool
    worst_x: float


def fit_decay_constant(alpha, x_max=100.0, n=2001):
    """Smallest K with Phi(x) <= K / (1 + |x|^(1+2 alpha)) on [0, x_max].

    A grid scan locates the maximiser of Phi(x)(1+x^(1+2a)); a bounded scalar
    search then refines it.
    """
    s = 1.0 + 2.0 * alpha
    xs = np.concatenate([[0.0], np.geomspace(1e-3, x_max, n - 1)])
    prod = kernel_eval(alpha, xs) * (1.0 + xs ** s)
    i = int(np.argmax(prod))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, xs.size - 1)]
    if hi > lo:
        res = minimize_scalar(lambda x: -kernel_eval(alpha, x) * (1.0 + x ** s),
                              bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
        return max(float(prod[i]), float(-res.fun)), float(res.x)
    return float(prod[i]), float(xs[i])


def kernel_mass(alpha, x_max=1e3):
    """int Phi over the line: quadrature on [-x_max, x_max] plus the far-field tail."""
    edges = np.concatenate([np.linspace(0.0, 10.0, 201), np.geomspace(10.0, x_max, 400)[1:]])
    xs = np.unique(edges)
    x, w = _gl_nodes(xs)
    body = 2.0 * float(np.sum(kernel_eval(alpha, x.ravel()) * w.ravel()))
    # integrate the large-|x| expansion term by term
    tail = 0.0
    for k, ck in enumerate(_far_field_coeffs(alpha), start=1):
        tail += ck * x_max ** (-2.0 * alpha * k) / (2.0 * alpha * k)
    return body + 2.0 * tail


def _far_field_coeffs(alpha, terms=8):
    """c_k in Phi(x) ~ sum_k c_k |x|^(-1-2 a k) for large |x|."""
    return [(-1) ** (k + 1) * math.gamma(2.0 * alpha * k + 1.0) * math.sin(math.pi * alpha * k)
            / (math.pi * math.factorial(k)) for k in range(1, terms + 1)]


def _gl_nodes(edges, m=8):
    t, wt = np.polynomial.legendre.leggauss(m)
    a, b = edges[:-1, None], edges[1:, None]
    return a + 0.5 * (b - a) * (t + 1.0), 0.5 * (b - a) * wt


def kernel_report(alpha, x_max=100.0, n=1000):
    K, _ = fit_decay_constant(alpha, x_max)
    xs = np.linspace(-x_max, x_max, 2 * n + 1)
    vals = kernel_eval(alpha, xs)
    s = 1.0 + 2.0 * alpha
    env = K / (1.0 + np.abs(xs) ** s)
    excess = vals - env
    j = int(np.argmax(excess))
    return KernelReport(alpha, K, bool(np.all(vals > 0)),
                        float(np.max(np.abs(vals - vals[::-1]))), kernel_mass(alpha),
                        bool(np.all(excess <= 1e-12 * K)), float(xs[j]))

# }}}

# {{{ splitting steps


def _hermite_data(theta):
    d1 = derivative(theta).values
    d2 = derivative(theta, order=2).values
    return theta.values, d1, d2


def burgers_characteristic_step(theta0, h, tol=1e-12):
    """Exact inviscid step: w(y) = theta0(x) with y = x - h theta0(x)."""
    grid = theta0.grid
    if grid.dim != 1:
        raise DomainError("characteristic step is 1D only")
    f, d1, d2 = _hermite_data(theta0)
    if h * float(np.max(d1)) >= 1.0:
        raise ShockInStepError(f"h * max(theta') = {h * float(np.max(d1)):.3g} >= 1")
    if h == 0:
        return theta0
    y = grid.x
    x, ok = kernels.characteristic_feet(y, grid.x[0], grid.spacing, f, d1, d2, h, tol)
    if not np.all(ok):
        raise ShockInStepError("Newton iteration failed at some grid points")
    w, _ = kernels.hermite_eval_numpy(x, grid.x[0], grid.spacing, f, d1, d2)
    return Field(grid, w)


def diffusion_step(v0, alpha, h):
    """Multiply by exp(-|k|^(2 alpha) h); ``alpha=None`` switches diffusion off."""
    if alpha is None or h == 0:
        return v0
    if not 0.0 < alpha < 1.0 + 1e-15:
        raise DomainError("alpha must lie in (0, 1]")
    kabs = v0.grid.kabs()
    return Field.from_spectrum(v0.grid, v0.spectrum * np.exp(-kabs ** (2.0 * alpha) * h))


def periodized_convolution(v0, alpha, h, images=6):
    """Direct convolution of v0 with the periodized kernel Phi_h.

    Images with |m| <= ``images`` are summed exactly (kernel_eval); the
    remaining ones use the large-|x| expansion sum_k c_k t^k |x|^(-1-2ak),
    each term summed in closed form with the Hurwitz zeta function.  The sum
    is a Riemann sum, so h^(1/(2 alpha)) should span several grid cells.
    """
    grid = v0.grid
    n, dx, P = grid.n, grid.spacing, 2.0 * grid.L
    d = dx * np.arange(n)
    m = np.arange(-images, images + 1)
    pts = (d[:, None] + P * m[None, :]).ravel()
    ker = kernel_eval_t(alpha, pts, h).reshape(n, -1).sum(axis=1)
    q = images + 1
    for k, ck in enumerate(_far_field_coeffs(alpha), start=1):
        s = 1.0 + 2.0 * alpha * k
        ker += ck * h ** k * P ** -s * (zeta(s, q + d / P) + zeta(s, q - d / P))
    # circulant product: out_i = dx sum_j ker[(i - j) mod n] v_j
    out = dx * np.real(np.fft.ifft(np.fft.fft(ker) * np.fft.fft(v0.values)))
    return Field(grid, out)

# }}}

# {{{ split evolution


@dataclass
class SplitTrajectory:
    rows: list = dc_field(default_factory=list)
    final: Field = None
    steps_taken: int = 0
    stopped: str = ""

    columns = ("t", "grad_max", "min", "max")

    def to_csv(self, header_lines=()):
        out = [f"# {line}" for line in header_lines]
        out.append(",".join(self.columns))
        out += [",".join(f"{v:.12e}" for v in r) for r in self.rows]
        return "\n".join(out) + "\n"


def split_evolve(theta0, alpha, h, n_steps, on_step=None):
    """Alternate characteristic and diffusion steps ``n_steps`` times.

    Stops early (recording the reason) when a characteristic step would cross.
    ``on_step(field, n)`` may return False to stop.
    """
    traj = SplitTrajectory()
    theta = theta0

    def record(f, t):
        v = f.values
        traj.rows.append((t, gradient_max(f), float(v.min()), float(v.max())))

    record(theta, 0.0)
    for k in range(1, n_steps + 1):
        try:
            w = burgers_characteristic_step(theta, h)
        except ShockInStepError as exc:
            traj.stopped = str(exc)
            break
        theta = diffusion_step(w, alpha, h)
        traj.steps_taken = k
        record(theta, k * h)
        if on_step is not None and on_step(theta, k) is False:
            break
    traj.final = theta
    return traj

# }}}
