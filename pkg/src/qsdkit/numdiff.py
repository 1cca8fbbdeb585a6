"""Finite-difference derivatives of vectorised functions.

All functions take ``f`` mapping points of shape ``(k, n)`` to values of
shape ``(m, n)`` and differentiate at a batch of points in one call.

First derivatives: central differences with ``h = eps**(1/3) * max(1, |y_i|)``
and one Richardson step.  Second derivatives: central second differences
with one Richardson step and ``h = eps**(1/6) * max(1, |y_i|)``.
"""
import numpy as np

EPS = np.finfo(float).eps
H1 = EPS ** (1 / 3)
H2 = EPS ** (1 / 6)


def _steps(Y, base, h_scale):
    return base * h_scale * np.maximum(1.0, np.abs(Y))


def boundary_scale(Y, dist, base, h_scale=1.0, frac=0.25):
    """Per-point ``h_scale`` keeping every stencil point within ``frac * dist``
    of ``Y`` (used near the boundary of the domain)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    h = base * h_scale * np.max(np.maximum(1.0, np.abs(Y)), axis=0)
    return h_scale * np.minimum(1.0, frac * np.asarray(dist, dtype=float) / h)


def jacobian(f, Y, richardson=True, h_scale=1.0, base=H1):
    """Return ``J[a, j, p] = d f_a / d y_j`` at each point ``Y[:, p]``."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    k, n = Y.shape
    H = _steps(Y, base, h_scale)
    shifts = (1.0, 0.5) if richardson else (1.0,)
    pts = []
    for j in range(k):
        for s in shifts:
            for sign in (1.0, -1.0):
                P = Y.copy()
                P[j] += sign * s * H[j]
                pts.append(P)
    vals = f(np.concatenate(pts, axis=1))
    vals = np.asarray(vals).reshape(vals.shape[0], len(pts), n)
    m = vals.shape[0]
    J = np.empty((m, k, n))
    per = 2 * len(shifts)
    for j in range(k):
        block = vals[:, j * per:(j + 1) * per]
        d1 = (block[:, 0] - block[:, 1]) / (2 * H[j])
        if richardson:
            d2 = (block[:, 2] - block[:, 3]) / H[j]
            J[:, j] = (4 * d2 - d1) / 3
        else:
            J[:, j] = d1
    return J


def directional(f, Y, V, richardson=True, h_scale=1.0):
    """Directional derivative of ``f`` along ``V`` (shape ``(k,)`` or ``(k, n)``)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = np.repeat(V[:, None], Y.shape[1], axis=1)
    h = H1 * h_scale * np.maximum(1.0, np.max(np.abs(Y), axis=0)) / np.maximum(
        1e-300, np.max(np.abs(V), axis=0))
    pts = [Y + h * V, Y - h * V]
    if richardson:
        pts += [Y + 0.5 * h * V, Y - 0.5 * h * V]
    vals = f(np.concatenate(pts, axis=1))
    n = Y.shape[1]
    vals = np.asarray(vals).reshape(vals.shape[0], len(pts), n)
    d1 = (vals[:, 0] - vals[:, 1]) / (2 * h)
    if not richardson:
        return d1
    d2 = (vals[:, 2] - vals[:, 3]) / h
    return (4 * d2 - d1) / 3


def hessian(f, Y, richardson=True, h_scale=1.0):
    """Return ``H[a, i, j, p] = d^2 f_a / dy_i dy_j``."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    k, n = Y.shape
    H = _steps(Y, H2, h_scale)

    def second(s):
        pts, idx = [], {}
        for i in range(k):
            for j in range(i, k):
                for si in (1, -1):
                    for sj in (1, -1):
                        P = Y.copy()
                        P[i] += si * s * H[i]
                        P[j] += sj * s * H[j]
                        idx[(i, j, si, sj)] = len(pts)
                        pts.append(P)
        vals = f(np.concatenate(pts, axis=1))
        vals = np.asarray(vals).reshape(vals.shape[0], len(pts), n)
        out = np.empty((vals.shape[0], k, k, n))
        for i in range(k):
            for j in range(i, k):
                g = lambda a, b: vals[:, idx[(i, j, a, b)]]
                d = (g(1, 1) - g(1, -1) - g(-1, 1) + g(-1, -1)) / (4 * s * s * H[i] * H[j])
                out[:, i, j] = d
                out[:, j, i] = d
        return out

    d1 = second(1.0)
    if not richardson:
        return d1
    d2 = second(0.5)
    return (4 * d2 - d1) / 3


def forward_derivative(f, y, direction, h=None):
    """One-sided derivative at a boundary point, moving into the domain.

    Two Richardson levels on forward differences, ``h = eps**(1/4)``
    scaled to the point.  ``f`` takes ``(k, n)`` points; returns ``(m,)``.
    """
    y = np.asarray(y, dtype=float)
    v = np.asarray(direction, dtype=float)
    if h is None:
        h = EPS ** 0.25 * max(1.0, float(np.max(np.abs(y))))
    pts = np.stack([y, y + h * v, y + 0.5 * h * v, y + 0.25 * h * v], axis=1)
    vals = np.asarray(f(pts))
    f0 = vals[:, 0]
    D1 = (vals[:, 1] - f0) / h
    D2 = (vals[:, 2] - f0) / (0.5 * h)
    D3 = (vals[:, 3] - f0) / (0.25 * h)
    R1 = 2 * D2 - D1
    R2 = 2 * D3 - D2
    return (4 * R2 - R1) / 3
