"""Periodic pseudospectral solver for fractional dissipative active scalars.

The evolution equation is

    theta_t = (u . grad) theta - (-Lap)^alpha theta

on [-L, L)^dim, with u given by one of the velocity laws below.  Time stepping
uses an integrating factor: dissipation is applied exactly through
exp(-|k|^(2 alpha) dt) and the advection term explicitly.
"""
import math
import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import CflError, DivergenceError, DomainError

# {{{ grid and fields


class PeriodicGrid:
    """Uniform grid on [-L, L)^dim with n points per axis."""

    def __init__(self, dim, n, half_period=math.pi):
        if dim not in (1, 2):
            raise DomainError("dim must be 1 or 2")
        n = int(n)
        if n < 16 or n & (n - 1):
            raise DomainError("n must be a power of two >= 16")
        if not half_period > 0:
            raise DomainError("half_period must be positive")
        self.dim = dim
        self.n = n
        self.L = float(half_period)
        self.spacing = 2.0 * self.L / n
        self._cache = {}

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def x(self):
        """Coordinates along one axis."""
        return -self.L + self.spacing * np.arange(self.n)

    def coords(self):
        if self.dim == 1:
            return self.x
        return np.meshgrid(self.x, self.x, indexing="ij")

    def wavenumbers(self):
        """Physical wavenumbers in the rfft layout (tuple per axis, broadcastable)."""
        if "k" not in self._cache:
            scale = math.pi / self.L
            kr = scale * np.arange(self.n // 2 + 1)
            if self.dim == 1:
                self._cache["k"] = (kr,)
            else:
                kf = scale * np.fft.fftfreq(self.n, 1.0 / self.n)
                self._cache["k"] = (kf[:, None], kr[None, :])
        return self._cache["k"]

    def kabs(self):
        if "kabs" not in self._cache:
            ks = self.wavenumbers()
            self._cache["kabs"] = np.abs(ks[0]) if self.dim == 1 else np.hypot(*ks)
        return self._cache["kabs"]

    def index_abs(self):
        """Largest integer mode index per coefficient (for band masks)."""
        if "iabs" not in self._cache:
            ir = np.arange(self.n // 2 + 1)
            if self.dim == 1:
                self._cache["iabs"] = ir
            else:
                i0 = np.abs(np.fft.fftfreq(self.n, 1.0 / self.n)).astype(int)
                self._cache["iabs"] = np.maximum(i0[:, None], ir[None, :])
        return self._cache["iabs"]

    def nyquist_mask(self):
        """True on coefficients that carry a Nyquist index on some axis."""
        if "nyq" not in self._cache:
            h = self.n // 2
            ir = np.arange(h + 1) == h
            if self.dim == 1:
                self._cache["nyq"] = ir
            else:
                i0 = np.abs(np.fft.fftfreq(self.n, 1.0 / self.n)).astype(int) == h
                self._cache["nyq"] = i0[:, None] | ir[None, :]
        return self._cache["nyq"]

    def dealias_mask(self):
        if "dealias" not in self._cache:
            self._cache["dealias"] = self.index_abs() <= self.n // 3
        return self._cache["dealias"]

    def forward(self, values):
        return np.fft.rfftn(values, axes=tuple(range(self.dim)))

    def inverse(self, spec):
        return np.fft.irfftn(spec, s=self.shape, axes=tuple(range(self.dim)))

    def __eq__(self, other):
        return (isinstance(other, PeriodicGrid) and self.dim == other.dim
                and self.n == other.n and self.L == other.L)

    def __hash__(self):
        return hash((self.dim, self.n, self.L))

    def __repr__(self):
        return f"PeriodicGrid(dim={self.dim}, n={self.n}, half_period={self.L!r})"


class Field:
    """Real samples on a PeriodicGrid with a lazily computed spectrum."""

    def __init__(self, grid, values, spectrum=None):
        values = np.array(values, dtype=float)
        if values.shape != grid.shape:
            raise DomainError(f"values have shape {values.shape}, grid wants {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise DivergenceError("field contains non-finite values")
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self._spectrum = spectrum

    @classmethod
    def from_function(cls, grid, func):
        if grid.dim == 1:
            return cls(grid, func(grid.x))
        X, Y = grid.coords()
        return cls(grid, func(X, Y))

    @classmethod
    def from_spectrum(cls, grid, spec):
        return cls(grid, grid.inverse(spec), spec)

    @property
    def spectrum(self):
        if self._spectrum is None:
            self._spectrum = self.grid.forward(self.values)
        return self._spectrum

    def norm(self, p):
        v = np.abs(self.values)
        if p == math.inf:
            return float(v.max())
        # normalized by the cell volume so norms approximate the continuum ones
        return float((np.sum(v ** p) * self.grid.spacing ** self.grid.dim) ** (1.0 / p))

    def mean(self):
        return float(self.values.mean())

    def __repr__(self):
        return f"Field({self.grid!r})"


def _apply(f, mult, zero_nyquist=False):
    spec = f.spectrum * mult
    if zero_nyquist:
        spec = np.where(f.grid.nyquist_mask(), 0.0, spec)
    return Field.from_spectrum(f.grid, spec)


def derivative(f, axis=0, order=1):
    k = f.grid.wavenumbers()[axis]
    return _apply(f, (1j * k) ** order, zero_nyquist=order % 2 == 1)


def fractional_laplacian(f, alpha):
    """(-Lap)^alpha via the multiplier |k|^(2 alpha); the zero mode maps to 0."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError("alpha must lie in [0, 1]")
    kabs = f.grid.kabs()
    mult = np.where(kabs > 0, kabs ** (2.0 * alpha), 0.0) if alpha > 0 else (kabs > 0) * 1.0
    return _apply(f, mult)


def hilbert_transform(f):
    """Multiplier -i sgn(k); zero and Nyquist modes map to 0."""
    if f.grid.dim != 1:
        raise DomainError("the Hilbert transform is defined for 1D fields")
    k = f.grid.wavenumbers()[0]
    return _apply(f, -1j * np.sign(k), zero_nyquist=True)


def dump_field(path, f, alpha):
    """Flat binary: '<ASLF', int32 dim, int32 n, f8 L, f8 alpha, then row-major f8 samples."""
    head = b"ASLF" + struct.pack("<iidd", f.grid.dim, f.grid.n, f.grid.L, float(alpha))
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != b"ASLF":
        raise DomainError("not a field dump")
    dim, n, L, alpha = struct.unpack("<iidd", data[4:28])
    grid = PeriodicGrid(dim, n, L)
    vals = np.frombuffer(data[28:], dtype="<f8").reshape(grid.shape)
    return Field(grid, vals), alpha

# }}}

# {{{ velocity laws and stepping


VELOCITIES = ("burgers", "ccf", "sqg", "beta_sqg", "zero")


@dataclass
class SolverConfig:
    alpha: float = 0.5
    velocity: str = "burgers"
    dt: float = 1e-3
    scheme: str = "if_rk4"
    dealias: bool = True
    cfl_safety: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError("alpha must lie in [0, 1]")
        if self.velocity not in VELOCITIES:
            raise DomainError(f"velocity must be one of {VELOCITIES}")
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if self.scheme not in ("if_euler", "if_rk4"):
            raise DomainError("scheme must be if_euler or if_rk4")
        if self.velocity == "beta_sqg" and not 0.5 <= self.beta <= 1.0:
            raise DomainError("beta must lie in [1/2, 1]")

    def check_grid(self, grid):
        two_d = self.velocity in ("sqg", "beta_sqg")
        if two_d and grid.dim != 2:
            raise DomainError(f"{self.velocity} velocity needs a 2D grid")
        if self.velocity in ("burgers", "ccf") and grid.dim != 1:
            raise DomainError(f"{self.velocity} velocity needs a 1D grid")


def _velocity_spec(spec, grid, cfg):
    """Velocity components (spectral) for a scalar spectrum."""
    if cfg.velocity == "burgers":
        return (spec,)
    if cfg.velocity == "zero":
        return tuple(np.zeros_like(spec) for _ in range(grid.dim))
    if cfg.velocity == "ccf":
        k = grid.wavenumbers()[0]
        return (np.where(grid.nyquist_mask(), 0.0, -1j * np.sign(k) * spec),)
    power = 1.0 if cfg.velocity == "sqg" else 2.0 * cfg.beta
    kabs = grid.kabs()
    psi = np.where(kabs > 0, spec / np.where(kabs > 0, kabs, 1.0) ** power, 0.0)
    psi = np.where(grid.nyquist_mask(), 0.0, psi)
    k1, k2 = grid.wavenumbers()
    # grad-perp = (d2, -d1)
    return (1j * k2 * psi, -1j * k1 * psi)


def velocity(theta, cfg):
    """Velocity field of ``theta``: a Field (1D) or a tuple of Fields (2D)."""
    cfg.check_grid(theta.grid)
    comps = _velocity_spec(theta.spectrum, theta.grid, cfg)
    out = tuple(Field.from_spectrum(theta.grid, c) for c in comps)
    return out[0] if theta.grid.dim == 1 else out


def _advection(spec, grid, cfg):
    """Spectrum of u . grad theta, 2/3-dealiased when requested."""
    if cfg.dealias:
        spec = spec * grid.dealias_mask()
    nyq = grid.nyquist_mask()
    ks = grid.wavenumbers()
    us = [grid.inverse(c) for c in _velocity_spec(spec, grid, cfg)]
    prod = 0.0
    for u, k in zip(us, ks):
        prod = prod + u * grid.inverse(np.where(nyq, 0.0, 1j * k * spec))
    out = grid.forward(prod)
    if cfg.dealias:
        out = out * grid.dealias_mask()
    return out, us


def _max_speed(us):
    return float(sum(np.max(np.abs(u)) for u in us))


def cfl_dt(theta, cfg):
    """Largest dt allowed by dt * max|u| <= cfl_safety * spacing."""
    _, us = _advection(theta.spectrum, theta.grid, cfg)
    s = _max_speed(us)
    return math.inf if s == 0 else cfg.cfl_safety * theta.grid.spacing / s


def step(theta, cfg, dt=None):
    """One integrating-factor step (Euler or classical RK4 in the IF variables)."""
    grid = theta.grid
    cfg.check_grid(grid)
    dt = cfg.dt if dt is None else dt
    spec = theta.spectrum
    n0, us = _advection(spec, grid, cfg)
    s = _max_speed(us)
    if dt * s > cfg.cfl_safety * grid.spacing * (1 + 1e-12):
        raise CflError(f"dt={dt} violates the CFL bound", cfg.cfl_safety * grid.spacing / s)
    kabs = grid.kabs()
    lam = kabs ** (2.0 * cfg.alpha) if cfg.alpha > 0 else (kabs > 0) * 1.0
    E = np.exp(-lam * dt)
    if cfg.scheme == "if_euler":
        new = E * (spec + dt * n0)
    else:
        E2 = np.exp(-lam * 0.5 * dt)
        k1 = n0
        k2, _ = _advection(E2 * (spec + 0.5 * dt * k1), grid, cfg)
        k3, _ = _advection(E2 * spec + 0.5 * dt * k2, grid, cfg)
        k4, _ = _advection(E * spec + dt * E2 * k3, grid, cfg)
        new = E * spec + dt / 6.0 * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)
    vals = grid.inverse(new)
    if not np.all(np.isfinite(vals)):
        raise DivergenceError("non-finite values after step", theta)
    return Field(grid, vals, new)

# }}}

# {{{ diagnostics and evolve


def gradient_max(theta):
    if theta.grid.dim == 1:
        return float(np.max(np.abs(derivative(theta).values)))
    g = [derivative(theta, a).values for a in (0, 1)]
    return float(np.max(np.hypot(*g)))


def tail_fraction(theta, band=2.0 / 3.0):
    """Energy fraction in modes above ``band`` times the retained band edge."""
    grid = theta.grid
    e = np.abs(theta.spectrum) ** 2
    idx = grid.index_abs()
    if grid.dim == 1:
        w = np.where((idx == 0) | (idx == grid.n // 2), 1.0, 2.0)
    else:
        ir = np.arange(grid.n // 2 + 1)
        w = np.where((ir == 0) | (ir == grid.n // 2), 1.0, 2.0)[None, :] * np.ones_like(e)
    e = e * w
    e = np.where(idx == 0, 0.0, e)
    total = e.sum()
    if total == 0:
        return 0.0
    edge = grid.n // 3
    return float(e[idx > band * edge].sum() / total)


@dataclass
class ExperimentRecord:
    columns: list
    rows: list = dc_field(default_factory=list)
    final: Field = None
    blowup_flag: bool = False
    flag_time: float = math.nan
    flag_reason: str = ""
    max_increase: float = 0.0
    min_decrease: float = 0.0
    steps: int = 0
    extra: dict = dc_field(default_factory=dict)

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def to_csv(self, header_lines=()):
        out = [f"# {h}" for h in header_lines]
        out.append(",".join(self.columns))
        for r in self.rows:
            out.append(",".join(_fmt(v) for v in r))
        return "\n".join(out) + "\n"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12e}"


@dataclass
class Probes:
    """What evolve records each frame.

    ``extra`` maps column names to callables (field, t) -> float.
    """
    lp: tuple = (2, math.inf)
    grad: bool = True
    omega: object = None
    every: int = 1
    extra: dict = dc_field(default_factory=dict)
    grad_factor: float = 50.0
    tail_threshold: float = 1e-4


def evolve(theta0, cfg, T, probes=None, on_step=None, max_steps=10_000_000):
    """Evolve to time T, recording probes every ``probes.every`` steps.

    dt is cfg.dt, shortened to the CFL bound and to land exactly on T.  The run
    stops early (blowup_flag) when the gradient exceeds grad_factor times its
    initial value or the spectral tail fraction exceeds tail_threshold.
    ``on_step(field, t, n)`` may return False to stop the run.
    """
    from .certifier import check_obedience

    probes = probes or Probes()
    cfg.check_grid(theta0.grid)
    cols = ["t"] + [f"L{'inf' if p == math.inf else _pname(p)}" for p in probes.lp]
    if probes.grad:
        cols.append("grad_max")
    if probes.omega is not None:
        cols.append("obedience")
    cols += list(probes.extra)
    cols.append("resolved_flag")
    rec = ExperimentRecord(cols)
    g0 = gradient_max(theta0)

    def frame(f, t, resolved):
        row = [t] + [f.norm(p) for p in probes.lp]
        if probes.grad:
            row.append(gradient_max(f))
        if probes.omega is not None:
            row.append(check_obedience(f, probes.omega).max_ratio)
        row += [fn(f, t) for fn in probes.extra.values()]
        row.append(bool(resolved))
        rec.rows.append(row)

    theta, t, n = theta0, 0.0, 0
    frame(theta, t, True)
    dt = cfg.dt
    while t < T * (1 - 1e-14) and n < max_steps:
        h = min(dt, T - t)
        try:
            new = step(theta, cfg, h)
        except CflError as exc:
            dt = 0.9 * exc.suggested_dt
            continue
        except DivergenceError as exc:
            raise DivergenceError(f"divergence at t={t}", theta) from exc
        vmax, vmin = theta.values.max(), theta.values.min()
        scale = max(abs(vmax), abs(vmin), 1e-300)
        rec.max_increase = max(rec.max_increase, (new.values.max() - vmax) / scale)
        rec.min_decrease = max(rec.min_decrease, (vmin - new.values.min()) / scale)
        theta, t, n = new, t + h, n + 1
        dt = cfg.dt if dt < cfg.dt and n % 16 == 0 else dt
        gm = gradient_max(theta)
        tf = tail_fraction(theta)
        reason = ""
        if g0 > 0 and gm > probes.grad_factor * g0:
            reason = "gradient"
        elif tf > probes.tail_threshold:
            reason = "resolution"
        stop = on_step is not None and on_step(theta, t, n) is False
        if reason:
            rec.blowup_flag, rec.flag_time, rec.flag_reason = True, t, reason
            frame(theta, t, False)
            break
        if n % probes.every == 0 or t >= T * (1 - 1e-14) or stop:
            frame(theta, t, True)
        if stop:
            break
    rec.final, rec.steps = theta, n
    return rec


def _pname(p):
    return str(int(p)) if float(p).is_integer() else str(p)

# }}}
