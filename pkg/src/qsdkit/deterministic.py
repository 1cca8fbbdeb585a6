"""Fluid-limit ODE dy/dt = sum_l l beta_l(y): equilibria and their stability."""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np

from . import numdiff
from .errors import (AssumptionViolated, DomainError, MultipleInteriorEquilibria,
                     NoInteriorEquilibrium, UnstableInterior)
from .model import ModelSpec, halton_points

N_STARTS = 64
MAX_ITER = 100


def drift(m: ModelSpec, y):
    """sum_l l beta_l(y); ``y`` may hold several points as columns."""
    return m.drift(np.asarray(y, dtype=float))


def drift_jacobian(m: ModelSpec, y):
    y = np.asarray(y, dtype=float)
    return numdiff.jacobian(m.drift, y.reshape(-1, 1))[:, :, 0]


def jacobian_at_origin(m: ModelSpec):
    """One-sided derivatives of the drift at 0 (the rates need not extend to y < 0)."""
    k = m.k
    J = np.empty((k, k))
    for j in range(k):
        e = np.zeros(k)
        e[j] = 1.0
        J[:, j] = numdiff.forward_derivative(m.drift, np.zeros(k), e)
    return J


@dataclass
class Equilibria:
    y_star: np.ndarray
    jacobian_at_star: np.ndarray
    jacobian_at_origin: np.ndarray
    eigen_star: np.ndarray
    eigen_origin: np.ndarray
    residual: float
    candidates: list = field(default_factory=list)
    notes: str = ""

    def to_dict(self):
        return {
            "y_star": self.y_star.tolist(),
            "jacobian_at_star": self.jacobian_at_star.tolist(),
            "jacobian_at_origin": self.jacobian_at_origin.tolist(),
            "eigen_star": [[float(z.real), float(z.imag)] for z in self.eigen_star],
            "eigen_origin": [[float(z.real), float(z.imag)] for z in self.eigen_origin],
            "drift_residual": self.residual,
            "candidates": [c.tolist() for c in self.candidates],
            "notes": self.notes,
        }


def _inf_norm(m, y):
    try:
        with np.errstate(all="ignore"):
            r = drift(m, y)
    except DomainError:
        return np.inf
    n = float(np.max(np.abs(r)))
    return n if np.isfinite(n) else np.inf


def _newton(m, y0, tol):
    y = y0.copy()
    g = m.geom
    fy = _inf_norm(m, y)
    for _ in range(MAX_ITER):
        if fy < tol:
            return y, fy
        try:
            J = drift_jacobian(m, y)
            step = np.linalg.solve(J, -drift(m, y))
        except (np.linalg.LinAlgError, DomainError):
            return None, fy
        t = 1.0
        while t > 1e-10:
            cand = y + t * step
            if np.all(g.contains(cand, tol=0.0)):
                fc = _inf_norm(m, cand)
                if fc < fy:
                    break
            t *= 0.5
        else:
            return None, fy
        y, fy = cand, fc
    return (y, fy) if fy < tol else (None, fy)


def _dedupe(points, rtol=1e-7):
    points = sorted(points, key=lambda p: tuple(np.round(p, 9)))
    out = []
    for p in points:
        if not any(np.max(np.abs(p - q)) <= rtol * max(1.0, np.max(np.abs(q))) for q in out):
            out.append(p)
    return out


def _stable(eigs, J):
    margin = 1e-9 * max(np.linalg.norm(J), 1e-300)
    return bool(np.all(eigs.real < -margin))


_cache = weakref.WeakKeyDictionary()


def find_equilibria(m: ModelSpec, tol=1e-12, starts=N_STARTS) -> Equilibria:
    """Multistart damped Newton for the interior equilibrium y*."""
    key = (tol, starts)
    hit = _cache.get(m, {}).get(key)
    if hit is not None:
        return hit
    g = m.geom
    found = []
    for y0 in halton_points(g, starts).T:
        y, res = _newton(m, y0, tol)
        if y is not None:
            found.append(y)
    found = _dedupe(found)
    interior = [y for y in found if g.boundary_distance(y) > 1e-8]
    if not interior:
        raise NoInteriorEquilibrium(f"{m.label}: no interior equilibrium found from {starts} starts")
    if len(interior) > 1:
        pts = ", ".join(np.array2string(p, precision=6) for p in interior)
        raise MultipleInteriorEquilibria(f"{m.label}: several interior equilibria: {pts}", interior)
    ys = interior[0]
    Js = drift_jacobian(m, ys)
    es = np.linalg.eigvals(Js)
    if not _stable(es, Js):
        raise UnstableInterior(f"{m.label}: equilibrium {ys} has eigenvalues {es}")
    J0 = jacobian_at_origin(m)
    e0 = np.linalg.eigvals(J0)
    if not np.any(e0.real > 0):
        raise AssumptionViolated(f"{m.label}: origin is not unstable (eigenvalues {e0})")
    out = Equilibria(ys, Js, J0, es, e0, _inf_norm(m, ys), found,
                     notes=f"{len(found)} distinct equilibria found from {starts} starts; "
                           "global uniqueness is not certified beyond this search")
    _cache.setdefault(m, {})[key] = out
    return out
