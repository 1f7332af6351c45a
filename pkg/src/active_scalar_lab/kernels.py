"""Hot loops, each with a numba version and a pure-numpy fallback.

The public names dispatch on ``_backend.USE_NUMBA``; both implementations stay
importable as ``*_numba`` / ``*_numpy`` so tests and the benchmark can compare
them directly.
"""
import numpy as np

from ._backend import USE_NUMBA, njit


# {{{ obedience ratio

def obedience_1d_numpy(vals, inv_w):
    """max_{i, m} |v[i+m] - v[i]| * inv_w[m-1] over periodic shifts m = 1..n/2."""
    best, bi, bm = 0.0, 0, 1
    for m in range(1, inv_w.size + 1):
        diff = np.abs(np.roll(vals, -m) - vals)
        i = int(np.argmax(diff))
        r = diff[i] * inv_w[m - 1]
        if r > best:
            best, bi, bm = r, i, m
    return best, bi, bm


@njit
def _obedience_1d_jit(vals, inv_w):
    n = vals.size
    best = 0.0
    bi = 0
    bm = 1
    for m in range(1, inv_w.size + 1):
        w = inv_w[m - 1]
        for i in range(n):
            j = i + m
            if j >= n:
                j -= n
            r = abs(vals[j] - vals[i]) * w
            if r > best:
                best = r
                bi = i
                bm = m
    return best, bi, bm


def obedience_1d_numba(vals, inv_w):
    return _obedience_1d_jit(vals, inv_w)

# }}}

# {{{ quintic Hermite interpolation on a periodic grid


def hermite_eval_numpy(x, x0, h, f, d1, d2):
    """Quintic Hermite interpolant of periodic samples (value, first, second derivative)."""
    n = f.size
    s = (x - x0) / h
    i = np.floor(s).astype(np.int64)
    t = s - i
    i0 = np.mod(i, n)
    i1 = np.mod(i + 1, n)
    return _hermite_combine(t, h, f[i0], f[i1], d1[i0], d1[i1], d2[i0], d2[i1])


def _hermite_combine(t, h, f0, f1, g0, g1, c0, c1):
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    t5 = t4 * t
    h00 = 1 - 10 * t3 + 15 * t4 - 6 * t5
    h01 = 10 * t3 - 15 * t4 + 6 * t5
    h10 = t - 6 * t3 + 8 * t4 - 3 * t5
    h11 = -4 * t3 + 7 * t4 - 3 * t5
    h20 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5)
    h21 = 0.5 * (t3 - 2 * t4 + t5)
    val = h00 * f0 + h01 * f1 + h * (h10 * g0 + h11 * g1) + h * h * (h20 * c0 + h21 * c1)
    # derivative with respect to x
    dh00 = (-30 * t2 + 60 * t3 - 30 * t4)
    dh10 = 1 - 18 * t2 + 32 * t3 - 15 * t4
    dh11 = -12 * t2 + 28 * t3 - 15 * t4
    dh20 = 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4)
    dh21 = 0.5 * (3 * t2 - 8 * t3 + 5 * t4)
    der = (dh00 * (f0 - f1)) / h + dh10 * g0 + dh11 * g1 + h * (dh20 * c0 + dh21 * c1)
    return val, der


# }}}

# {{{ characteristic foot points


def characteristic_feet_numpy(y, x0, h_grid, f, d1, d2, tau, tol=1e-12, max_iter=60):
    """Solve x - tau * theta(x) = y for every y (theta given by Hermite data).

    Newton from x = y + tau * theta(y), safeguarded by the bracket
    [y - tau*M, y + tau*M] with M = max|theta|; a bisection step replaces any
    Newton step that leaves the bracket.  Returns (x, converged_mask).
    """
    M = np.max(np.abs(f))
    lo = y - tau * M - 1e-14
    hi = y + tau * M + 1e-14
    th, _ = hermite_eval_numpy(y, x0, h_grid, f, d1, d2)
    x = y + tau * th
    done = np.zeros(y.shape, dtype=bool)
    for _ in range(max_iter):
        th, dth = hermite_eval_numpy(x, x0, h_grid, f, d1, d2)
        F = x - tau * th - y
        dF = 1.0 - tau * dth
        lo = np.where(F < 0, np.maximum(lo, x), lo)
        hi = np.where(F > 0, np.minimum(hi, x), hi)
        step = F / dF
        xn = x - step
        outside = (xn <= lo) | (xn >= hi) | (dF <= 0)
        xn = np.where(outside, 0.5 * (lo + hi), xn)
        conv = np.abs(xn - x) <= tol * (1.0 + np.abs(x))
        x = np.where(done, x, xn)
        done |= conv
        if np.all(done):
            break
    return x, done


@njit
def _feet_jit(y, x0, h_grid, f, d1, d2, tau, tol, max_iter):
    n = f.size
    M = 0.0
    for k in range(n):
        if abs(f[k]) > M:
            M = abs(f[k])
    out = np.empty(y.size)
    ok = np.ones(y.size, dtype=np.bool_)
    for k in range(y.size):
        yk = y[k]
        lo = yk - tau * M - 1e-14
        hi = yk + tau * M + 1e-14
        x = yk
        for it in range(max_iter + 1):
            s = (x - x0) / h_grid
            i = int(np.floor(s))
            t = s - i
            i0 = i % n
            i1 = (i + 1) % n
            t2 = t * t
            t3 = t2 * t
            t4 = t3 * t
            t5 = t4 * t
            val = ((1 - 10 * t3 + 15 * t4 - 6 * t5) * f[i0] + (10 * t3 - 15 * t4 + 6 * t5) * f[i1]
                   + h_grid * ((t - 6 * t3 + 8 * t4 - 3 * t5) * d1[i0] + (-4 * t3 + 7 * t4 - 3 * t5) * d1[i1])
                   + h_grid * h_grid * (0.5 * (t2 - 3 * t3 + 3 * t4 - t5) * d2[i0]
                                        + 0.5 * (t3 - 2 * t4 + t5) * d2[i1]))
            if it == 0:
                x = yk + tau * val
                continue
            der = ((-30 * t2 + 60 * t3 - 30 * t4) * (f[i0] - f[i1]) / h_grid
                   + (1 - 18 * t2 + 32 * t3 - 15 * t4) * d1[i0] + (-12 * t2 + 28 * t3 - 15 * t4) * d1[i1]
                   + h_grid * (0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4) * d2[i0]
                               + 0.5 * (3 * t2 - 8 * t3 + 5 * t4) * d2[i1]))
            F = x - tau * val - yk
            dF = 1.0 - tau * der
            if F < 0:
                lo = max(lo, x)
            elif F > 0:
                hi = min(hi, x)
            xn = x - F / dF if dF > 0 else 0.5 * (lo + hi)
            if xn <= lo or xn >= hi:
                xn = 0.5 * (lo + hi)
            if abs(xn - x) <= tol * (1.0 + abs(x)):
                x = xn
                break
            x = xn
            if it == max_iter:
                ok[k] = False
        out[k] = x
    return out, ok


def characteristic_feet_numba(y, x0, h_grid, f, d1, d2, tau, tol=1e-12, max_iter=60):
    return _feet_jit(np.ascontiguousarray(y, dtype=np.float64), float(x0), float(h_grid),
                     np.ascontiguousarray(f), np.ascontiguousarray(d1), np.ascontiguousarray(d2),
                     float(tau), float(tol), int(max_iter))

# }}}


if USE_NUMBA:
    obedience_1d = obedience_1d_numba
    characteristic_feet = characteristic_feet_numba
else:
    obedience_1d = obedience_1d_numpy
    characteristic_feet = characteristic_feet_numpy
