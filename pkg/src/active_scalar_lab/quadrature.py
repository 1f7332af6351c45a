"""Composite Gauss-Kronrod quadrature on graded panel meshes.

Integrands are evaluated on whole node arrays at once, so a quadrature over a
few hundred panels costs a handful of vectorised calls.
"""
import numpy as np

# 15-point Kronrod abscissae (non-negative half) and weights, with the embedded
# 7-point Gauss weights for the odd-indexed abscissae.
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

# full 15-node rule on [-1, 1]
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
WG = np.zeros(15)
_g_half = np.zeros(8)
_g_half[1::2] = _WG
WG[:7] = _g_half[:-1]
WG[7:] = _g_half[::-1]


def panel_nodes(edges):
    """Nodes and Kronrod/Gauss weights for the panels between ``edges``.

    Returns arrays of shape (n_panels, 15).
    """
    edges = np.asarray(edges, dtype=float)
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    x = a + half * (NODES[None, :] + 1.0)
    return x, half * WK[None, :], half * WG[None, :]


def integrate(f, edges):
    """Integrate ``f`` over [edges[0], edges[-1]].

    Returns (value, error_estimate) where the error estimate is the sum of
    per-panel Kronrod-Gauss differences.
    """
    x, wk, wg = panel_nodes(edges)
    fx = f(x)
    vk = np.sum(fx * wk, axis=1)
    vg = np.sum(fx * wg, axis=1)
    return float(np.sum(vk)), float(np.sum(np.abs(vk - vg)))


def graded_edges(a, b, depth=30, left=True, right=True, ratio=2.0):
    """Edges on [a, b] refined geometrically toward the flagged endpoints."""
    if b <= a:
        return np.array([a, b])
    if left and right:
        mid = 0.5 * (a + b)
        e1 = graded_edges(a, mid, depth, True, False, ratio)
        e2 = graded_edges(mid, b, depth, False, True, ratio)
        return np.concatenate([e1, e2[1:]])
    length = b - a
    steps = length * ratio ** -np.arange(depth, -1, -1.0)
    if left:
        return np.concatenate([[a], a + steps])
    return np.concatenate([[a], (b - steps[::-1])[1:], [b]])


def mesh_from_points(points, depth=30, singular=None, ratio=2.0):
    """Concatenate graded meshes between sorted special points.

    ``singular[i]`` flags whether ``points[i]`` needs refinement; by default every
    point except the last is treated as singular.
    """
    pts = np.unique(np.asarray(points, dtype=float))
    if singular is None:
        flags = [True] * (len(pts) - 1) + [False]
    else:
        lookup = {float(p): s for p, s in zip(points, singular)}
        flags = [lookup.get(float(p), True) for p in pts]
    parts = [np.array([pts[0]])]
    for i in range(len(pts) - 1):
        e = graded_edges(pts[i], pts[i + 1], depth, flags[i], flags[i + 1], ratio)
        parts.append(e[1:])
    return np.concatenate(parts)


def power_graded(a, b, n, gamma=3.0):
    """Edges a + (b-a)(j/n)^gamma, clustered toward ``a``."""
    j = np.arange(n + 1) / n
    return a + (b - a) * j ** gamma
