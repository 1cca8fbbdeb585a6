"""Extinction-time asymptotics for multitype birth-death processes.

tau ~ 1/(Lambda D) with D the positive root of sum_i b_ii/(D + d_i) = 1 and
Lambda the constant that matches the near-origin solution u~ of the linearised
balance equation to the WKB body.  Everything is kept in log space because
N V(0) is routinely far beyond the range of a double.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from . import numdiff
from .conditions import (check_bd_assumptions, check_bd_result3, check_IRR, check_IRR2,
                         linearized_constants as _lin)
from .errors import (AssumptionViolated, ConditionViolated, InvalidState, NoPositiveRoot,
                     NotBirthDeath)
from .model import ModelSpec
from .wkb import engine

CROSS_DEATH_TOL = 1e-6


def linearized_constants(m: ModelSpec):
    """(b, d): b_ij = d beta_{e_i}/d y_j (0), d_i = d beta_{-e_i}/d y_i (0)."""
    b, d, off = _lin(m)
    scale = max(1.0, float(np.max(np.abs(d))))
    if off > CROSS_DEATH_TOL * scale:
        raise AssumptionViolated(
            f"{m.label}: death rate of type i depends on y_j at the origin (|d beta/dy| = {off:.3g})")
    if np.any(d <= 0) or np.any(np.all(b <= 0, axis=1)):
        raise AssumptionViolated(f"{m.label}: need d_i > 0 and a positive b_ij in each row "
                                 f"(b = {b.tolist()}, d = {d.tolist()})")
    return b, d


def solve_D(b, d):
    """Unique positive root of sum_i b_ii / (D + d_i) = 1."""
    bii = np.diag(np.atleast_2d(b)).astype(float)
    d = np.asarray(d, dtype=float)
    if float(np.sum(bii / d)) <= 1.0:
        raise NoPositiveRoot(
            f"sum b_ii/d_i = {float(np.sum(bii / d)):.6g} <= 1: the origin is not unstable")
    f = lambda D: float(np.sum(bii / (D + d))) - 1.0
    fp = lambda D: -float(np.sum(bii / (D + d) ** 2))
    hi = float(np.sum(bii))
    D = brentq(f, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(3):
        step = f(D) / fp(D)
        if not np.isfinite(step) or step == 0:
            break
        D -= step
    return D


def D_residual(b, d, D):
    bii = np.diag(np.atleast_2d(b))
    return float(np.sum(bii / (D + np.asarray(d))) - 1.0)


def log_u_tilde(b, d, D, x, log_lambda=0.0):
    """log of the linear-regime QSD u~_x (normalising constant exp(log_lambda))."""
    x = np.asarray(x)
    if np.any(x < 0) or x.sum() == 0:
        raise InvalidState(f"u~ is defined for nonzero states in Z_+^k, got {x.tolist()}")
    bii = np.diag(np.atleast_2d(b)).astype(float)
    d = np.asarray(d, dtype=float)
    S = float(x.sum())
    comb = gammaln(S + 1) - float(np.sum(gammaln(x + 1.0))) - math.log(S)
    A = -float(np.sum(x * np.log(d)))
    B = -float(np.sum(x * np.log(D + d)))
    return log_lambda + comb + float(np.sum(x * np.log(bii))) + A + math.log(-math.expm1(B - A))


def u_tilde(b, d, D, Lam, x):
    return math.exp(log_u_tilde(b, d, D, x, math.log(Lam)))


def linear_balance_residual(b, d, D, x):
    """Relative residual of the linearised balance equation at state x, using u~."""
    b = np.atleast_2d(np.asarray(b, dtype=float))
    d = np.asarray(d, dtype=float)
    x = np.asarray(x, dtype=int)
    k = len(x)

    def u(z):
        z = np.asarray(z)
        if np.any(z < 0) or z.sum() == 0:
            return 0.0
        return math.exp(log_u_tilde(b, d, D, z))

    terms = []
    for i in range(k):
        e = np.zeros(k, dtype=int)
        e[i] = 1
        terms.append(u(x - e) * float((x - e) @ b[i]) if x[i] > 0 else 0.0)
        terms.append(u(x + e) * (x[i] + 1) * d[i])
    out = -u(x) * sum(float(x @ b[i]) + x[i] * d[i] for i in range(k))
    total = sum(terms) + out
    scale = sum(abs(t) for t in terms) + abs(out)
    return abs(total) / scale if scale > 0 else 0.0


def linear_asymptote(b, d, log_lambda, xhat, xi):
    """log of the large-x form of u~ along x = xhat * xi (Stirling)."""
    xi = np.asarray(xi, dtype=float)
    k = len(xi)
    bii = np.diag(np.atleast_2d(b))
    return (log_lambda
            - 0.5 * ((k - 1) * math.log(2 * math.pi) + (k + 1) * math.log(xhat)
                     + float(np.sum(np.log(xi))))
            + xhat * float(np.sum(xi * np.log(bii / (xi * np.asarray(d))))))


def _nested_points(ystar):
    """p_i = (0,..,0, y*_i, .., y*_k) and q_i = (0,..,0, y*_{i+1}, .., y*_k)."""
    k = len(ystar)
    P, Q = [], []
    for i in range(k):
        p = np.array(ystar, dtype=float)
        p[:i] = 0.0
        q = p.copy()
        q[i] = 0.0
        P.append(p)
        Q.append(q)
    return P, Q


def _log_lambda_pieces(m: ModelSpec, b):
    """N-independent part of log Lambda (without 1/2 log N and -N V(0))."""
    eng = engine(m)
    k = m.k
    ys = eng.ystar
    P, Q = _nested_points(ys)
    s = eng.sigma()
    sign, logdet = np.linalg.slogdet(s.Sigma)
    num = 0.0
    for i in range(k):
        R = m.rates_at(P[i])
        num += math.log(R[m.unit_index(i, 1)]) + math.log(R[m.unit_index(i, -1)])
    den = math.log(b[k - 1, k - 1])
    for i in range(k):
        e = np.zeros(k)
        e[i] = 1.0
        g = numdiff.forward_derivative(m.rates_at, Q[i], e)
        den += math.log(g[m.unit_index(i, -1)])
        if i < k - 1:
            den += math.log(m.rates_at(Q[i])[m.unit_index(i, 1)])
    return 0.5 * (logdet - math.log(2 * math.pi) + num - den)


def log_lambda_normalizer(m: ModelSpec, N, b=None):
    if b is None:
        b, _ = linearized_constants(m)
    A = engine(m).V(np.zeros(m.k))
    return _log_lambda_pieces(m, b) + 0.5 * math.log(N) - N * A


def lambda_normalizer(m: ModelSpec, N):
    return math.exp(log_lambda_normalizer(m, N))


def log_wkb_asymptote(m: ModelSpec, N, xhat, xi):
    """log of the WKB body continued toward the origin along x = xhat * xi, built
    directly from the nested rate evaluations (no use of Lambda)."""
    eng = engine(m)
    b, d = linearized_constants(m)
    xi = np.asarray(xi, dtype=float)
    k = m.k
    P, Q = _nested_points(eng.ystar)
    sign, logdet = np.linalg.slogdet(eng.sigma().Sigma)
    num = sum(math.log(m.rates_at(P[i])[m.unit_index(i, 1)])
              + math.log(m.rates_at(P[i])[m.unit_index(i, -1)]) for i in range(k))
    den = math.log(b[k - 1, k - 1])
    for i in range(k):
        e = np.zeros(k)
        e[i] = 1.0
        g = numdiff.forward_derivative(m.rates_at, Q[i], e)[m.unit_index(i, -1)]
        den += math.log(xi[i] * g)
        if i < k - 1:
            den += math.log(m.rates_at(Q[i])[m.unit_index(i, 1)])
    A = eng.V(np.zeros(k))
    bii = np.diag(b)
    return (0.5 * (math.log(N) + logdet - k * math.log(2 * math.pi)
                   - (k + 1) * math.log(xhat) + num - den)
            + xhat * float(np.sum(xi * np.log(bii / (xi * d)))) - N * A)


@dataclass
class BDExtinction:
    N: int
    b: np.ndarray
    d: np.ndarray
    D: float
    log_Lambda: float
    V_at_zero: float
    log_tau: float
    log_K: float

    @property
    def Lambda(self):
        return math.exp(self.log_Lambda) if self.log_Lambda > -745 else 0.0

    @property
    def tau(self):
        return math.exp(self.log_tau) if self.log_tau < 709 else math.inf

    @property
    def K(self):
        return math.exp(self.log_K)

    @property
    def A(self):
        return self.V_at_zero

    def to_dict(self):
        out = {"N": self.N, "A": self.V_at_zero, "K": self.K, "D": self.D,
               "Lambda_log": self.log_Lambda, "tau_log": self.log_tau,
               "tau_log10": self.log_tau / math.log(10),
               "b": self.b.tolist(), "d": self.d.tolist()}
        if self.log_tau / math.log(10) < 300:
            out["tau"] = self.tau
        return out


def certify_result3(m: ModelSpec, samples=256, tol=1e-7):
    """Raise unless the birth-death conditions behind the tau formula hold."""
    if not m.is_birth_death:
        raise NotBirthDeath(f"{m.label}: prefactor unavailable: non-BD jump set")
    for rep in (check_bd_assumptions(m, tol), check_bd_result3(m, tol),
                check_IRR(m, samples, tol, cid="BD_IRR"), check_IRR2(m, samples, tol, cid="BD_IRR2")):
        if not rep.passed:
            raise ConditionViolated(f"{m.label}: condition {rep.id} fails "
                                    f"(residual {rep.worst_residual:.3g}, witness {rep.witness})")


_certified = set()


def tau_asymptotic(m: ModelSpec, N, certify=True) -> BDExtinction:
    if certify and id(m) not in _certified:
        certify_result3(m)
        _certified.add(id(m))
    b, d = linearized_constants(m)
    D = solve_D(b, d)
    A = log_tau_limit(m)
    logL = _log_lambda_pieces(m, b) + 0.5 * math.log(N) - N * A
    log_tau = -logL - math.log(D)
    log_K = log_tau + 0.5 * math.log(N) - N * A
    return BDExtinction(N, b, d, float(D), float(logL), float(A), float(log_tau), float(log_K))


def log_tau_limit(m: ModelSpec):
    """A = V(0) = lim (ln tau)/N; valid for any model passing K0 and IRR."""
    return engine(m).V(np.zeros(m.k))
