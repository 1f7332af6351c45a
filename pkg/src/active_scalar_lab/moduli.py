"""Moduli of continuity.

A modulus is a continuous, increasing, concave function with value 0 at the
origin.  The families here are piecewise closed forms; every family exposes
vectorised values, one-sided slopes, a bisection inverse and the metadata the
quadrature code needs (breakpoints, growth exponents).
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, DomainError, RangeError

FOUR_PI = 4.0 * math.pi


def _as_array(xi):
    arr = np.asarray(xi, dtype=float)
    return arr, arr.ndim == 0


def _check_lengths(arr, strict=False):
    if np.any(np.isnan(arr)):
        raise DomainError("length is NaN")
    if strict and np.any(arr <= 0):
        raise DomainError("one-sided derivative needs xi > 0")
    if np.any(arr < 0):
        raise DomainError("length must be non-negative")


def _out(arr, scalar):
    return float(arr) if scalar else arr


class ModulusSpec:
    """Base class; subclasses implement ``_value`` and ``_slope``."""

    family = "Custom"
    bounded = False
    # omega(xi) = O(xi**growth_exponent) at infinity; 0 means slower than any power.
    growth_exponent = 0.0
    # omega(xi) ~ xi**zero_exponent near the origin.
    zero_exponent = 1.0

    # -- to be provided by subclasses -------------------------------------
    def _value(self, x):
        raise NotImplementedError

    def _slope(self, x, left):
        raise NotImplementedError

    def breakpoints(self):
        return ()

    @property
    def length_scale(self):
        return 1.0

    def slope_at_zero(self):
        return 1.0

    def slope_at_infinity(self):
        return 0.0

    def sup(self):
        return math.inf

    def params(self):
        return {}

    # -- public interface -------------------------------------------------
    def eval(self, xi):
        arr, scalar = _as_array(xi)
        _check_lengths(arr)
        val = np.where(arr == 0.0, 0.0, self._value(np.maximum(arr, 0.0)))
        return _out(val, scalar)

    __call__ = eval

    def eval_derivative(self, xi, side="right"):
        if side not in ("left", "right"):
            raise DomainError("side must be 'left' or 'right'")
        arr, scalar = _as_array(xi)
        _check_lengths(arr, strict=True)
        return _out(self._slope(arr, side == "left"), scalar)

    def upper_derivative(self, xi):
        """Larger of the two one-sided derivatives."""
        left = self.eval_derivative(xi, "left")
        right = self.eval_derivative(xi, "right")
        return np.maximum(left, right) if np.ndim(left) else max(left, right)

    def slope(self, x):
        """Derivative for x >= 0 (right limit at 0); used inside quadratures."""
        x = np.asarray(x, dtype=float)
        pos = np.where(x > 0, x, 1.0)
        return np.where(x > 0, self._slope(pos, False), self.slope_at_zero())

    def inverse(self, y):
        arr, scalar = _as_array(y)
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise DomainError("inverse needs y >= 0")
        flat = _bisect_inverse(self, arr.ravel())
        return _out(flat.reshape(arr.shape), scalar)

    def scaled(self, B):
        return ScaledModulus(self, B)

    def junction_ok(self, slack=1e-12):
        """Left derivative >= right derivative at every breakpoint."""
        for b in self.breakpoints():
            lft = self.eval_derivative(b, "left")
            rgt = self.eval_derivative(b, "right")
            if rgt > lft + slack * max(1.0, abs(lft)):
                return False
        return True

    def is_concave(self):
        """Cheap structural concavity check used as a precondition."""
        cached = getattr(self, "_concave_cache", None)
        if cached is not None:
            return cached
        ell = self.length_scale
        grid = ell * np.logspace(-8, 8, 1601)
        if self.bounded or not math.isinf(self.sup()):
            grid = grid[grid < self._domain_end()]
        rep = check_concavity(self, grid)
        ok = rep.ok and self.junction_ok()
        self._concave_cache = ok
        return ok

    def _domain_end(self):
        return math.inf

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{self.family}({inner})"


def _bisect_inverse(omega, y):
    """Monotone bisection, vectorised over y (geometric while hi/lo > 4)."""
    y = np.asarray(y, dtype=float)
    if np.any(y > omega.sup()):
        raise RangeError(f"y={float(np.max(y))} exceeds sup of the modulus ({omega.sup()})")
    hi = np.maximum(1.0, y)
    out_inf = np.zeros(y.shape, dtype=bool)
    need = (omega.eval(hi) < y) & (y > 0)
    while need.any():
        hi = np.where(need, 2.0 * hi, hi)
        over = need & (hi > 1e300)
        if over.any():
            if not math.isinf(omega.sup()):
                raise RangeError("value not attained below 1e300")
            out_inf |= over
        need = (omega.eval(hi) < y) & (y > 0) & ~out_inf
    lo = np.zeros(y.shape)
    active = (y > 0) & ~out_inf
    while active.any():
        geo = (lo > 0) & (hi > 4.0 * lo)
        mid = np.where(geo, np.sqrt(lo) * np.sqrt(hi), 0.5 * lo + 0.5 * hi)
        stuck = (mid <= lo) | (mid >= hi)
        active &= ~stuck
        below = omega.eval(mid) < y
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)
    pick_lo = (lo > 0) & (np.abs(omega.eval(lo) - y) < np.abs(omega.eval(hi) - y))
    out = np.where(pick_lo, lo, hi)
    out = np.where(y == 0, 0.0, out)
    return np.where(out_inf, np.inf, out)


class Linear(ModulusSpec):
    """omega(xi) = xi; a test fixture, never a certified modulus."""

    family = "Linear"
    growth_exponent = 1.0

    def _value(self, x):
        return np.array(x, dtype=float)

    def _slope(self, x, left):
        return np.ones_like(x, dtype=float)

    def slope_at_infinity(self):
        return 1.0

    def inverse(self, y):
        arr, scalar = _as_array(y)
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise DomainError("inverse needs y >= 0")
        return _out(arr.copy(), scalar)


class PowerLaw(ModulusSpec):
    family = "PowerLaw"

    def __init__(self, beta):
        if not 0.0 < beta < 1.0:
            raise ConstructionError("PowerLaw exponent must lie in (0, 1)")
        self.beta = float(beta)
        self.growth_exponent = self.beta
        self.zero_exponent = self.beta

    def _value(self, x):
        return np.power(x, self.beta)

    def _slope(self, x, left):
        return self.beta * np.power(x, self.beta - 1.0)

    def slope_at_zero(self):
        return math.inf

    def params(self):
        return {"beta": self.beta}


class BurgersCritical(ModulusSpec):
    """xi/(1+K sqrt(xi)) up to xi0 = (K/4pi)^2, then C_K log(xi)."""

    family = "BurgersCritical"

    def __init__(self, K):
        K = float(K)
        if not K > FOUR_PI:
            raise ConstructionError("BurgersCritical needs K > 4*pi so that log(xi0) > 0")
        self.K = K
        self.xi0 = (K / FOUR_PI) ** 2
        s0 = math.sqrt(self.xi0)
        self.C_K = self.xi0 / ((1.0 + K * s0) * math.log(self.xi0))

    def _value(self, x):
        s = np.sqrt(np.minimum(x, self.xi0))
        near = np.minimum(x, self.xi0) / (1.0 + self.K * s)
        far = self.C_K * np.log(np.maximum(x, self.xi0))
        return np.where(x <= self.xi0, near, far)

    def _slope(self, x, left):
        s = np.sqrt(np.minimum(x, self.xi0))
        ks = self.K * s
        near = (1.0 + 0.5 * ks) / (1.0 + ks) ** 2
        far = self.C_K / np.maximum(x, self.xi0)
        first = x <= self.xi0 if left else x < self.xi0
        return np.where(first, near, far)

    def breakpoints(self):
        return (self.xi0,)

    @property
    def length_scale(self):
        return self.xi0

    def params(self):
        return {"K": self.K}


class SqgCritical(ModulusSpec):
    """xi - xi^{3/2} on (0, delta]; slope gamma/(xi(4+log(xi/delta))) beyond."""

    family = "SqgCritical"

    def __init__(self, delta, gamma):
        if not (delta > 0 and gamma > 0):
            raise ConstructionError("SqgCritical needs delta > 0 and gamma > 0")
        if not delta < 4.0 / 9.0:
            raise ConstructionError("SqgCritical needs delta < 4/9 (increasing near branch)")
        self.delta = float(delta)
        self.gamma = float(gamma)
        self.anchor = self.delta - self.delta ** 1.5

    def _value(self, x):
        near = np.minimum(x, self.delta)
        near = near - near ** 1.5
        far_x = np.maximum(x, self.delta)
        far = self.anchor + self.gamma * (np.log(4.0 + np.log(far_x / self.delta)) - math.log(4.0))
        return np.where(x <= self.delta, near, far)

    def _slope(self, x, left):
        near = 1.0 - 1.5 * np.sqrt(np.minimum(x, self.delta))
        far_x = np.maximum(x, self.delta)
        far = self.gamma / (far_x * (4.0 + np.log(far_x / self.delta)))
        first = x <= self.delta if left else x < self.delta
        return np.where(first, near, far)

    def breakpoints(self):
        return (self.delta,)

    @property
    def length_scale(self):
        return self.delta

    def params(self):
        return {"delta": self.delta, "gamma": self.gamma}


class BetaCritical(ModulusSpec):
    """xi - xi^{1+alpha} on (0, delta]; slope gamma/xi beyond."""

    family = "BetaCritical"

    def __init__(self, alpha, delta, gamma):
        if not 0.0 < alpha < 1.0:
            raise ConstructionError("BetaCritical needs alpha in (0, 1)")
        if not (delta > 0 and gamma > 0):
            raise ConstructionError("BetaCritical needs delta > 0 and gamma > 0")
        if not (1.0 + alpha) * delta ** alpha < 1.0:
            raise ConstructionError("BetaCritical near branch must be increasing on (0, delta]")
        self.alpha = float(alpha)
        self.delta = float(delta)
        self.gamma = float(gamma)
        self.anchor = self.delta - self.delta ** (1.0 + self.alpha)

    def _value(self, x):
        near = np.minimum(x, self.delta)
        near = near - near ** (1.0 + self.alpha)
        far = self.anchor + self.gamma * np.log(np.maximum(x, self.delta) / self.delta)
        return np.where(x <= self.delta, near, far)

    def _slope(self, x, left):
        near = 1.0 - (1.0 + self.alpha) * np.minimum(x, self.delta) ** self.alpha
        far = self.gamma / np.maximum(x, self.delta)
        first = x <= self.delta if left else x < self.delta
        return np.where(first, near, far)

    def breakpoints(self):
        return (self.delta,)

    @property
    def length_scale(self):
        return self.delta

    def params(self):
        return {"alpha": self.alpha, "delta": self.delta, "gamma": self.gamma}


class CustomPiecewise(ModulusSpec):
    """Pieces on (0,b1], (b1,b2], ..., (bm, inf) given as vectorised callables.

    ``values[k]`` and ``slopes[k]`` act on piece ``k``.  Continuity at the
    breakpoints is verified at construction.
    """

    family = "CustomPiecewise"

    def __init__(self, breakpoints, values, slopes, sup=math.inf, growth_exponent=0.0,
                 zero_exponent=1.0, slope_at_zero=1.0, slope_at_infinity=0.0):
        bps = tuple(float(b) for b in breakpoints)
        if len(values) != len(bps) + 1 or len(slopes) != len(bps) + 1:
            raise ConstructionError("need one value and one slope callable per piece")
        if any(b <= 0 for b in bps) or any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ConstructionError("breakpoints must be positive and increasing")
        self._bps = bps
        self._values = list(values)
        self._slopes = list(slopes)
        self._sup = float(sup)
        self.bounded = not math.isinf(self._sup)
        self.growth_exponent = growth_exponent
        self.zero_exponent = zero_exponent
        self._s0 = slope_at_zero
        self._sinf = slope_at_infinity
        for k, b in enumerate(bps):
            lv = float(self._values[k](np.array([b]))[0])
            rv = float(self._values[k + 1](np.array([b]))[0])
            if abs(lv - rv) > 1e-12 * max(1.0, abs(lv)):
                raise ConstructionError(f"pieces disagree at breakpoint {b}: {lv} vs {rv}")

    def _pieces(self, x, fns, side):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(self._bps), x, side=side)
        out = np.empty_like(x)
        for k, fn in enumerate(fns):
            mask = idx == k
            if np.any(mask):
                out[mask] = fn(x[mask])
        return out

    def _value(self, x):
        return self._pieces(x, self._values, "left")

    def _slope(self, x, left):
        return self._pieces(x, self._slopes, "left" if left else "right")

    def breakpoints(self):
        return self._bps

    @property
    def length_scale(self):
        return self._bps[0] if self._bps else 1.0

    def slope_at_zero(self):
        return self._s0

    def slope_at_infinity(self):
        return self._sinf

    def sup(self):
        return self._sup


class ScaledModulus(ModulusSpec):
    """omega_B(xi) = omega(B xi)."""

    def __init__(self, base, B):
        if not B > 0:
            raise ConstructionError("scale factor must be positive")
        self.base = base
        self.B = float(B)
        self.family = f"Scaled{base.family}"
        self.growth_exponent = base.growth_exponent
        self.zero_exponent = base.zero_exponent
        self.bounded = base.bounded

    def eval(self, xi):
        arr, _ = _as_array(xi)
        _check_lengths(arr)
        return self.base.eval(self.B * arr)

    __call__ = eval

    def _value(self, x):
        return self.base._value(self.B * x)

    def _slope(self, x, left):
        return self.B * self.base._slope(self.B * x, left)

    def breakpoints(self):
        return tuple(b / self.B for b in self.base.breakpoints())

    @property
    def length_scale(self):
        return self.base.length_scale / self.B

    def slope_at_zero(self):
        return self.B * self.base.slope_at_zero()

    def slope_at_infinity(self):
        return self.B * self.base.slope_at_infinity()

    def sup(self):
        return self.base.sup()

    def inverse(self, y):
        return self.base.inverse(y) / self.B

    def params(self):
        return {"base": self.base, "B": self.B}


class TimeDependentModulus:
    """omega(xi, t) = omega(F(t) xi) for a positive schedule F."""

    def __init__(self, base, schedule):
        self.base = base
        self.schedule = schedule

    def at(self, t):
        return ScaledModulus(self.base, float(self.schedule(t)))

    def eval(self, xi, t):
        return self.at(t).eval(xi)


@dataclass
class ConcavityReport:
    violations: list = field(default_factory=list)
    non_increasing: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations and not self.non_increasing


def check_concavity(omega, grid, slack=1e-12):
    """Second divided differences on consecutive triples of ``grid``.

    A triple (i-1, i, i+1) is reported when the right secant slope exceeds the
    left one by more than the relative slack plus a round-off allowance.
    """
    x = np.asarray(grid, dtype=float)
    if x.size < 3:
        raise DomainError("need at least three grid points")
    if np.any(np.diff(x) <= 0):
        raise DomainError("grid must be increasing")
    v = np.asarray(omega.eval(x), dtype=float)
    dx = np.diff(x)
    dv = np.diff(v)
    s = dv / dx
    scale = np.maximum(np.abs(s[:-1]), np.abs(s[1:]))
    roundoff = 8 * np.finfo(float).eps * np.maximum(np.abs(v[1:-1]), 1e-300) * (1 / dx[:-1] + 1 / dx[1:])
    bad = np.nonzero(s[1:] - s[:-1] > slack * scale + roundoff)[0]
    rep = ConcavityReport()
    for i in bad:
        rep.violations.append((int(i), int(i + 1), int(i + 2), float(s[i]), float(s[i + 1])))
    for i in np.nonzero(dv <= 0)[0]:
        rep.non_increasing.append((int(i), int(i + 1)))
    return rep


FAMILIES = {
    "Linear": Linear,
    "PowerLaw": PowerLaw,
    "BurgersCritical": BurgersCritical,
    "SqgCritical": SqgCritical,
    "BetaCritical": BetaCritical,
}


def modulus_from_config(section):
    """Build a modulus from a ``[modulus]`` config mapping."""
    fam = section.get("family")
    if fam not in FAMILIES:
        raise DomainError(f"unknown modulus family {fam!r}")
    if fam == "Linear":
        omega = Linear()
    elif fam == "PowerLaw":
        omega = PowerLaw(float(section["beta"]))
    elif fam == "BurgersCritical":
        omega = BurgersCritical(float(section["K"]))
    elif fam == "SqgCritical":
        omega = SqgCritical(float(section["delta"]), float(section["gamma"]))
    else:
        omega = BetaCritical(float(section["alpha"]), float(section["delta"]), float(section["gamma"]))
    B = section.get("B")
    if B is not None and float(B) != 1.0:
        omega = ScaledModulus(omega, float(B))
    return omega


def modulus_to_config(omega):
    out = {}
    if isinstance(omega, ScaledModulus):
        out["B"] = omega.B
        omega = omega.base
    out["family"] = omega.family
    p = omega.params()
    out.update(p)
    return out
