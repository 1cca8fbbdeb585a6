"""WKB approximation of the quasistationary distribution.

u_x ~ M_N exp(-N V(y) - V0(y)),  y = x/N,

with grad V = theta solving  l.theta = ln(beta_{-l}/beta_l)  over all jumps l,
grad V0 = theta0 solving  l.theta0 = 1/2 l.grad ln(beta_{-l} beta_l),
and M_N = sqrt(det Sigma / (2 pi N)^k), Sigma = d theta/dy at y*.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import numdiff
from .deterministic import find_equilibria
from .errors import (BoundaryDivergence, ConditionViolated, DecompositionFailed,
                     DegenerateRates, IntegralDiverged, NumericalError, PathOutsideDomain,
                     SigmaNotPD, TooCloseToBoundary)
from .model import ModelSpec

GL_ORDER = 32
QUAD_TOL = 1e-10
MAX_DEPTH = 48
ORIGIN_RADIUS = 1e-6
DEFAULT_DELTA = 0.05
V0_AGREEMENT = 1e-6

_gl_cache = {}


def _gauss_legendre(n):
    if n not in _gl_cache:
        _gl_cache[n] = np.polynomial.legendre.leggauss(n)
    return _gl_cache[n]


class ThetaField:
    """Least-squares solutions theta(y), theta0(y) of the two jump systems.

    The jump matrix is QR-factored once; both systems share it.
    """

    def __init__(self, m: ModelSpec, tol=1e-7):
        m.require_symmetric_jumps()
        self.m = m
        self.tol = tol
        self.L = m.L
        Q, R = np.linalg.qr(self.L)
        if np.linalg.matrix_rank(self.L) < m.k:
            raise ConditionViolated(f"{m.label}: jumps do not span R^k")
        self._pinv = np.linalg.solve(R, Q.T)
        self.neg = m.neg_index

    # right-hand sides --------------------------------------------------------------

    def _rates(self, Y):
        with np.errstate(all="ignore"):
            R = self.m.rates_at(Y)
        bad = ~(np.isfinite(R) & (R > 0))
        if bad.any():
            a, p = np.argwhere(bad)[0]
            raise DegenerateRates(
                f"{self.m.label}: rate for jump {self.m.jumps[a]} is {R[a, p]!r} "
                f"at y = {Y[:, p].tolist()}")
        return R

    def log_ratio(self, Y):
        """ln(beta_{-l}/beta_l) for every jump, shape (|L|, n)."""
        lr = np.log(self._rates(Y))
        return lr[self.neg] - lr

    def log_product(self, Y):
        lr = np.log(self._rates(Y))
        return lr[self.neg] + lr

    def hscale(self, Y, base, h_scale=1.0):
        """Finite-difference step scale that keeps stencils inside the domain."""
        dist = self.m.geom.boundary_distance(Y)
        return numdiff.boundary_scale(Y, dist, base, h_scale)

    def rhs0(self, Y):
        """1/2 l . grad ln(beta_{-l} beta_l) for every jump."""
        J = numdiff.jacobian(self.log_product, Y, h_scale=self.hscale(Y, numdiff.H1))
        return 0.5 * np.einsum("aj,ajp->ap", self.L, J)

    # solves -------------------------------------------------------------------------

    def solve(self, rhs):
        """Least-squares solve; returns (solution (k, n), normalised residual (n,))."""
        th = self._pinv @ rhs
        res = rhs - self.L @ th
        scale = np.maximum(1.0, np.max(np.abs(rhs), axis=0))
        return th, np.max(np.abs(res), axis=0) / scale

    def _checked(self, rhs, Y, what, check):
        th, res = self.solve(rhs)
        if check and np.any(res >= self.tol):
            p = int(np.argmax(res))
            raise ConditionViolated(
                f"{self.m.label}: {what} system inconsistent at y = {Y[:, p].tolist()} "
                f"(residual {res[p]:.3g})")
        return th

    def theta(self, y, check=True):
        Y = np.asarray(y, dtype=float)
        vec = Y.ndim == 1
        Y = Y.reshape(self.m.k, -1)
        th = self._checked(self.log_ratio(Y), Y, "theta", check)
        return th[:, 0] if vec else th

    def theta0(self, y, check=True):
        Y = np.asarray(y, dtype=float)
        vec = Y.ndim == 1
        Y = Y.reshape(self.m.k, -1)
        th = self._checked(self.rhs0(Y), Y, "theta0", check)
        return th[:, 0] if vec else th

    def residuals(self, Y):
        """Normalised least-squares residuals of both systems at the columns of Y."""
        Y = np.asarray(Y, dtype=float).reshape(self.m.k, -1)
        return self.solve(self.log_ratio(Y))[1], self.solve(self.rhs0(Y))[1]

    def jac_theta(self, Y, richardson=True, h_scale=1.0):
        """d theta_i / d y_j as L^+ applied to the finite-difference Jacobian of the rhs."""
        Y = np.asarray(Y, dtype=float).reshape(self.m.k, -1)
        hs = self.hscale(Y, numdiff.H1, h_scale)
        Jr = numdiff.jacobian(self.log_ratio, Y, richardson=richardson, h_scale=hs)
        return np.einsum("ia,ajp->ijp", self._pinv, Jr)

    def jac_theta0(self, Y, richardson=True, h_scale=1.0):
        Y = np.asarray(Y, dtype=float).reshape(self.m.k, -1)
        hs = self.hscale(Y, numdiff.H2, h_scale)
        H = numdiff.hessian(self.log_product, Y, richardson=richardson, h_scale=hs)
        drhs = 0.5 * np.einsum("ai,aijp->ajp", self.L, H)
        return np.einsum("ia,ajp->ijp", self._pinv, drhs)


# --- paths and line integrals ----------------------------------------------------------

@dataclass
class PolyPath:
    vertices: list
    order: int = GL_ORDER

    def __post_init__(self):
        self.vertices = [np.asarray(v, dtype=float) for v in self.vertices]

    def check(self, geom):
        for v in self.vertices:
            if not geom.contains(v):
                raise PathOutsideDomain(f"path vertex {v.tolist()} lies outside the domain")
        for a, b in zip(self.vertices[:-1], self.vertices[1:]):
            if np.array_equal(a, b):
                raise PathOutsideDomain("consecutive path vertices coincide")


def _segment_integral(field, a, b, order=GL_ORDER, tol=QUAD_TOL, max_depth=MAX_DEPTH):
    """Adaptive Gauss-Legendre integral of field(y).dy along the segment a -> b.

    Returns (value, number of accepted pieces)."""
    d = b - a
    if not np.any(d):
        return 0.0, 0
    x, w = _gauss_legendre(order)

    def piece(t0, t1):
        ts = t0 + (t1 - t0) * (x + 1) / 2
        Y = a[:, None] + d[:, None] * ts[None, :]
        F = field(Y)
        return (t1 - t0) / 2 * float(w @ (d @ F))

    total, pieces = 0.0, 0
    stack = [(0.0, 1.0, piece(0.0, 1.0), 0)]
    while stack:
        t0, t1, whole, depth = stack.pop()
        tm = 0.5 * (t0 + t1)
        left, right = piece(t0, tm), piece(tm, t1)
        if not np.isfinite(left + right):
            raise IntegralDiverged(f"non-finite integrand on [{t0}, {t1}] of the path")
        if abs(left + right - whole) <= tol * max(1.0, abs(whole)):
            total += left + right
            pieces += 1
        elif depth >= max_depth:
            raise IntegralDiverged(
                f"line integral did not converge near t = {tm:.6g} "
                f"(piece estimates {whole:.6g} vs {left + right:.6g})")
        else:
            stack.append((tm, t1, right, depth + 1))
            stack.append((t0, tm, left, depth + 1))
    return total, pieces


# --- engine ----------------------------------------------------------------------------

@dataclass
class SigmaResult:
    Sigma: np.ndarray
    G: np.ndarray
    J: np.ndarray
    symmetry_residual: float
    lyapunov_residual: float       # ||G Sigma + 2 J|| / ||J||
    lyapunov_inverse_residual: float  # ||J S^-1 + S^-1 J^T + G|| / ||G||

    @property
    def det(self):
        return float(np.linalg.det(self.Sigma))


@dataclass
class PotentialResult:
    y: np.ndarray
    V: float
    V0: Optional[float]
    Sigma: np.ndarray
    G: np.ndarray
    M_N: Optional[float]
    path: PolyPath
    v0_crosscheck: Optional[float] = None
    notes: list = field(default_factory=list)


class WKBEngine:
    def __init__(self, m: ModelSpec, tol=1e-7):
        self.m = m
        self.field = ThetaField(m, tol)
        self.eq = find_equilibria(m)
        self.ystar = self.eq.y_star
        self._sigma = None
        self._grad0 = None

    # theta near the origin ---------------------------------------------------------

    @property
    def rate_gradients_at_origin(self):
        """Forward-difference gradients of every rate at y = 0, shape (|L|, k)."""
        if self._grad0 is None:
            k = self.m.k
            G = np.empty((len(self.m.jumps), k))
            for j in range(k):
                e = np.zeros(k)
                e[j] = 1.0
                G[:, j] = numdiff.forward_derivative(self.m.rates_at, np.zeros(k), e)
            self._grad0 = G
        return self._grad0

    def theta_limit(self, w):
        """Limit of theta(s w) as s -> 0+ from first-order rate expansions."""
        g = self.rate_gradients_at_origin @ (np.asarray(w, dtype=float) / np.linalg.norm(w))
        if np.any(g <= 0):
            return None
        rhs = np.log(g[self.field.neg]) - np.log(g)
        return self.field.solve(rhs[:, None])[0][:, 0]

    def _theta_path(self, Y):
        r = np.linalg.norm(Y, axis=0)
        near = r < ORIGIN_RADIUS
        if not near.any():
            return self.field.theta(Y, check=False)
        out = np.empty_like(Y)
        if (~near).any():
            out[:, ~near] = self.field.theta(Y[:, ~near], check=False)
        for p in np.flatnonzero(near):
            lim = self.theta_limit(Y[:, p]) if r[p] > 0 else None
            out[:, p] = lim if lim is not None else self.field.theta(Y[:, p], check=False)
        return out

    # potentials -----------------------------------------------------------------------

    def default_path(self, y):
        y = np.asarray(y, dtype=float)
        # the domain is a box or an orthant, hence convex: the segment never leaves it
        return PolyPath([self.ystar, y])

    def V(self, y, path: Optional[PolyPath] = None, return_info=False):
        y = np.asarray(y, dtype=float)
        if path is None:
            if np.array_equal(y, self.ystar):
                return (0.0, {"path": [y.tolist()], "pieces": 0}) if return_info else 0.0
            path = self.default_path(y)
        else:
            if not np.allclose(path.vertices[0], self.ystar, atol=1e-12) or \
                    not np.allclose(path.vertices[-1], y, atol=1e-12):
                raise PathOutsideDomain("path must run from y* to y")
        path.check(self.m.geom)
        total, pieces = 0.0, 0
        for a, b in zip(path.vertices[:-1], path.vertices[1:]):
            v, n = _segment_integral(self._theta_path, a, b, order=path.order)
            total += v
            pieces += n
        if return_info:
            return total, {"path": [v.tolist() for v in path.vertices], "pieces": pieces}
        return total

    def V0_integral(self, y, path: Optional[PolyPath] = None):
        y = np.asarray(y, dtype=float)
        if path is None and np.array_equal(y, self.ystar):
            return 0.0
        path = path or self.default_path(y)
        path.check(self.m.geom)
        f = lambda Y: self.field.theta0(Y, check=False)
        return sum(_segment_integral(f, a, b, order=path.order)[0]
                   for a, b in zip(path.vertices[:-1], path.vertices[1:]))

    def decompose(self, y):
        return decompose_in_jumps(self.m, y, self.ystar)

    def V0_product(self, y):
        y = np.asarray(y, dtype=float)
        terms = self.decompose(y)
        neg = self.field.neg
        p = self.ystar.copy()
        total = 0.0
        for a, l in terms:
            q = p + a * np.asarray(l, dtype=float)
            j = self.m.jump_index(l)
            with np.errstate(all="ignore"):
                R = self.m.rates_at(np.stack([p, q], axis=1))
            prod = R[j] * R[neg[j]]
            if not np.all(np.isfinite(prod) & (prod > 0)):
                raise BoundaryDivergence(
                    f"V0 diverges: rates for jump {l} vanish at {q.tolist()}")
            total += 0.5 * (np.log(prod[1]) - np.log(prod[0]))
            p = q
        return total

    def V0(self, y, crosscheck=True):
        y = np.asarray(y, dtype=float)
        if self.m.geom.boundary_distance(y) <= 0:
            raise BoundaryDivergence(f"V0 diverges on the boundary (y = {y.tolist()})")
        v = self.V0_product(y)
        if not crosscheck:
            return v, None
        vi = self.V0_integral(y)
        diff = abs(v - vi)
        if diff > V0_AGREEMENT * max(1.0, abs(v)):
            raise NumericalError(
                f"V0 routes disagree at y = {y.tolist()}: product {v:.12g}, integral {vi:.12g}")
        return v, diff

    # Sigma and G ----------------------------------------------------------------------

    def sigma(self) -> SigmaResult:
        if self._sigma is not None:
            return self._sigma
        ys = self.ystar
        S_raw = self.field.jac_theta(ys)[:, :, 0]
        sym = float(np.max(np.abs(S_raw - S_raw.T)) / max(1.0, np.max(np.abs(S_raw))))
        S = 0.5 * (S_raw + S_raw.T)
        ev = np.linalg.eigvalsh(S)
        if np.any(ev <= 0):
            raise SigmaNotPD(f"{self.m.label}: Sigma has eigenvalues {ev}")
        b = self.m.rates_at(ys)
        G = np.einsum("a,ai,aj->ij", b, self.m.L, self.m.L)
        J = self.eq.jacobian_at_star
        r1 = float(np.linalg.norm(G @ S + 2 * J) / np.linalg.norm(J))
        Si = np.linalg.inv(S)
        r2 = float(np.linalg.norm(J @ Si + Si @ J.T + G) / np.linalg.norm(G))
        self._sigma = SigmaResult(S, G, J, sym, r1, r2)
        return self._sigma

    def M_N(self, N):
        return float(np.exp(self.log_M_N(N)))

    def log_M_N(self, N):
        k = self.m.k
        sign, logdet = np.linalg.slogdet(self.sigma().Sigma)
        return 0.5 * (logdet - k * np.log(2 * np.pi * N))

    # QSD ----------------------------------------------------------------------------

    def state_boundary_distance(self, N, x):
        x = np.asarray(x, dtype=float)
        d = float(np.min(x))
        if self.m.geom.is_box:
            cap = np.array(self.m.geom.box_sizes(N), dtype=float)
            d = min(d, float(np.min(cap - x)))
        return d

    def log_qsd(self, N, x, delta=DEFAULT_DELTA, crosscheck=True):
        x = np.asarray(x, dtype=float)
        d = self.state_boundary_distance(N, x)
        if d < delta * N:
            raise TooCloseToBoundary(
                f"x = {x.tolist()} is {d:g} from the boundary; need >= {delta} N = {delta * N:g}")
        y = x / N
        V = self.V(y)
        V0, _ = self.V0(y, crosscheck=crosscheck)
        return self.log_M_N(N) - N * V - V0

    def potential(self, y, N=None, crosscheck=True) -> PotentialResult:
        y = np.asarray(y, dtype=float)
        s = self.sigma()
        V, info = self.V(y, return_info=True)
        notes = []
        try:
            V0, chk = self.V0(y, crosscheck=crosscheck)
        except BoundaryDivergence as exc:
            V0, chk = None, None
            notes.append(str(exc))
        return PotentialResult(y, V, V0, s.Sigma, s.G,
                               None if N is None else self.M_N(N),
                               self.default_path(y), chk, notes)


_engines = weakref.WeakKeyDictionary()


def engine(m: ModelSpec) -> WKBEngine:
    e = _engines.get(m)
    if e is None:
        e = WKBEngine(m)
        _engines[m] = e
    return e


# --- jump decomposition ------------------------------------------------------------------

def _interior(geom, p):
    return geom.boundary_distance(p) > 0


def decompose_in_jumps(m: ModelSpec, y, ystar=None, max_subdiv=64):
    """Write y = y* + sum a_i l_i (a_i >= 0) with every partial sum inside the domain.

    Single parallel jump if there is one; coordinate moves 1..k when all unit
    jumps exist; otherwise a basis of jumps, split into m repeated rounds.
    """
    y = np.asarray(y, dtype=float)
    if ystar is None:
        ystar = find_equilibria(m).y_star
    d = y - ystar
    nd = np.linalg.norm(d)
    if nd < 1e-15:
        return []
    g = m.geom
    L = m.L
    for a_idx, l in enumerate(L):
        c = float(d @ l / (l @ l))
        if c > 0 and np.linalg.norm(d - c * l) <= 1e-12 * nd:
            return [(c, m.jumps[a_idx])]

    jumps = set(m.jumps)
    units = all(tuple(int(i == j) for j in range(m.k)) in jumps for i in range(m.k))
    if units:
        out = []
        for i in range(m.k):
            if d[i] != 0:
                e = [0] * m.k
                e[i] = 1 if d[i] > 0 else -1
                out.append((abs(float(d[i])), tuple(e)))
        return _verify(g, ystar, out)

    # basis pursuit: greedily add jumps most aligned with the residual direction
    basis = []
    for idx in np.argsort(-np.abs(L @ d) / np.linalg.norm(L, axis=1), kind="stable"):
        cand = basis + [idx]
        if np.linalg.matrix_rank(L[cand]) == len(cand):
            basis = cand
        if len(basis) == m.k:
            break
    B = L[basis].T
    coef = np.linalg.solve(B, d)
    steps = []
    for c, idx in zip(coef, basis):
        if abs(c) < 1e-15:
            continue
        l = m.jumps[idx] if c > 0 else tuple(-v for v in m.jumps[idx])
        steps.append((abs(float(c)), l))
    n = 1
    while n <= max_subdiv:
        out = [(a / n, l) for _ in range(n) for a, l in steps]
        try:
            return _verify(g, ystar, out)
        except DecompositionFailed:
            n *= 2
    raise DecompositionFailed(f"no interior jump decomposition found for y = {y.tolist()}")


def _verify(g, ystar, terms):
    p = ystar.copy()
    for a, l in terms:
        p = p + a * np.asarray(l, dtype=float)
        if not _interior(g, p):
            raise DecompositionFailed(f"partial sum {p.tolist()} leaves the interior")
    return terms


# --- residuals of the asymptotic equations ----------------------------------------------

def hje_residual(m: ModelSpec, Y):
    """sum_l beta_l (exp(l.theta) - 1), relative to sum_l beta_l, per column of Y."""
    eng = engine(m)
    Y = np.asarray(Y, dtype=float).reshape(m.k, -1)
    th = eng.field.theta(Y, check=False)
    B = m.rates_at(Y)
    terms = B * np.expm1(m.L @ th)
    return np.abs(terms.sum(axis=0)) / np.maximum(1.0, np.abs(terms).sum(axis=0) + B.sum(axis=0))


def transport_residual(m: ModelSpec, Y):
    """sum_l e^{l.theta} l.((theta0 - 1/2 (d theta/dy) l) beta_l - grad beta_l), relative."""
    eng = engine(m)
    f = eng.field
    Y = np.asarray(Y, dtype=float).reshape(m.k, -1)
    L = m.L
    th = f.theta(Y, check=False)
    th0 = f.theta0(Y, check=False)
    dth = f.jac_theta(Y)                     # (k, k, n)
    B = m.rates_at(Y)                        # (|L|, n)
    gB = numdiff.jacobian(m.rates_at, Y, h_scale=f.hscale(Y, numdiff.H1))  # (|L|, k, n)
    curv = np.einsum("ai,ijp,aj->ap", L, dth, L)
    inner = (L @ th0 - 0.5 * curv) * B - np.einsum("ai,aip->ap", L, gB)
    terms = np.exp(L @ th) * inner
    scale = np.abs(np.exp(L @ th) * (L @ th0) * B).sum(axis=0) + np.abs(terms).sum(axis=0)
    return np.abs(terms.sum(axis=0)) / np.maximum(1.0, scale)


# --- module-level API -------------------------------------------------------------------

def theta(m, y):
    return engine(m).field.theta(y)


def theta0(m, y):
    return engine(m).field.theta0(y)


def potential_V(m, y, path=None):
    return engine(m).V(y, path)


def potential_V0(m, y, crosscheck=True):
    return engine(m).V0(y, crosscheck)[0]


def sigma_and_G(m):
    s = engine(m).sigma()
    return s.Sigma, s.G, (s.lyapunov_residual, s.lyapunov_inverse_residual)


def qsd_wkb(m, N, x, delta=DEFAULT_DELTA):
    return float(np.exp(engine(m).log_qsd(N, x, delta)))


def log_qsd_wkb(m, N, x, delta=DEFAULT_DELTA, crosscheck=True):
    return engine(m).log_qsd(N, x, delta, crosscheck)


def wkb_potential(m, y, N=None):
    return engine(m).potential(y, N)
