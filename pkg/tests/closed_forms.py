"""Closed-form reductions of the extinction-time asymptotics, coded independently
of the generic pipeline (own equilibrium solves, scipy quadrature, hand-derived
derivatives).  Used as regression oracles."""
import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq, fsolve


def _D(bii, d):
    bii, d = np.asarray(bii, float), np.asarray(d, float)
    return brentq(lambda D: np.sum(bii / (D + d)) - 1.0, 1e-300, bii.sum(), xtol=1e-15, rtol=1e-15)


# --- sis1d --------------------------------------------------------------------------

def sis1d_A(R0):
    return math.log(R0) - 1 + 1 / R0


def sis1d_log_tau(R0, N):
    return 0.5 * math.log(2 * math.pi / N) + math.log(R0 / (R0 - 1) ** 2) + N * sis1d_A(R0)


def sis1d_V(R0, y):
    ys = 1 - 1 / R0
    f = lambda t: math.log(1 / (R0 * (1 - t)))
    return quad(f, ys, y, epsabs=1e-14, epsrel=1e-13)[0]


# --- heterogeneous SIS ---------------------------------------------------

def ex1_log_tau(beta, mu, alpha, f, N):
    mu, alpha, f = map(lambda v: np.asarray(v, float), (mu, alpha, f))
    am = alpha * mu
    E = brentq(lambda E: beta * np.sum(am * f / (am * E + 1)) - 1, 1e-14, 1e6, xtol=1e-15, rtol=1e-15)
    # births b_ii = beta mu_i f_i, deaths d_i = 1/alpha_i at the origin
    D = _D(beta * mu * f, 1 / alpha)
    return (-math.log(D * E)
            + 0.5 * math.log(2 * math.pi / N / np.sum(f * (am / (1 + am * E)) ** 2))
            + N * (np.sum(f * np.log(1 + am * E)) - E / beta))


# --- linear births, quadratic deaths -------------------------------------

def ex2_A(k, lam, mu, kappa):
    return (k * lam - mu) / kappa + (mu / kappa) * math.log(mu / (k * lam))


def ex2_log_tau(k, lam, mu, kappa, N):
    return (-2 * math.log(k * lam - mu) + 0.5 * math.log(2 * math.pi * mu * kappa / N)
            + N * ex2_A(k, lam, mu, kappa))


# --- factorised rates b0(s) b_i(y_i), d0(s) d_i(y_i) ----------------------

def ex3_log_tau(b0, d0, bi, di, ystar, N, h=1e-6):
    """Factorised BD form; b0, d0 of s = sum y, bi[i], di[i] of y_i.  Derivatives by
    fourth-order central differences (interior) or two-sided-free forward formula at 0."""
    ystar = np.asarray(ystar, float)
    k = len(ystar)
    s = ystar.sum()

    def dlog(f, x):
        return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h) / f(x)

    def fwd(f):  # f'(0) for f(0) = 0
        return (-f(2 * h) + 4 * f(h) - 3 * f(0.0)) / (2 * h)

    c0 = dlog(d0, s) - dlog(b0, s)
    c = np.array([dlog(di[i], ystar[i]) - dlog(bi[i], ystar[i]) for i in range(k)])
    det = np.prod(c) * (1 + c0 * np.sum(1 / c))
    V0 = quad(lambda t: math.log(d0(t) / b0(t)), s, 0, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    V0 += sum(quad(lambda t, i=i: math.log(di[i](t) / bi[i](t)), ystar[i], 0,
                   epsabs=1e-14, epsrel=1e-13, limit=200)[0] for i in range(k))
    b0p, d00 = fwd(b0), d0(0.0)
    bii = np.array([b0p * bi[i](0.0) for i in range(k)])
    dd = np.array([d00 * fwd(di[i]) for i in range(k)])
    D = _D(bii, dd)
    num = b0p * d00 * np.prod([bi[i](0.0) * fwd(di[i]) for i in range(k)])
    den = b0(s) * d0(s) * np.prod([bi[i](ystar[i]) * di[i](ystar[i]) for i in range(k)])
    return -math.log(D) + 0.5 * math.log(2 * math.pi / (N * det) * num / den) + N * V0


def bc23_functions(lam, mu, kappa, nu, c):
    b0 = lambda s: s
    d0 = lambda s: 1 + kappa * s
    bi = [lambda y, l=l: l / (1 + c * y) for l in lam]
    di = [lambda y, m=m: m * y * (1 + nu * y) for m in mu]
    return b0, d0, bi, di


def bc23_ystar(lam, mu, kappa, nu, c):
    """Drift zero: s b_i(y_i) = (1 + kappa s) d_i(y_i) for each i."""
    b0, d0, bi, di = bc23_functions(lam, mu, kappa, nu, c)
    k = len(lam)
    F = lambda y: [b0(sum(y)) * bi[i](y[i]) - d0(sum(y)) * di[i](y[i]) for i in range(k)]
    y = fsolve(F, np.full(k, 0.8), xtol=1e-13)
    return np.asarray(y)


# --- competition process ----------------------------------------------------

def competition_functions(kappa, gamma, eta):
    b0 = lambda s: s
    d0 = lambda s: 1 + kappa * s
    b1 = b2 = lambda y: 1.0
    d1 = d2 = lambda y: y
    b3 = lambda u: math.exp(-gamma * u)
    d3 = lambda u: math.exp(gamma * u) * (1 + eta * u * u)
    return b0, d0, b1, d1, b2, d2, b3, d3


def V_competition(a, y, ystar):
    b0, d0, b1, d1, b2, d2, b3, d3 = competition_functions(a["kappa"], a["gamma"], a["eta"])
    y1, y2 = y
    s1, s2 = ystar
    q = lambda f, lo, hi: quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return ((s1 - y1) * math.log(a["a2"] / a["a1"]) + (s2 - y2) * math.log(a["a4"] / a["a3"])
            + q(lambda u: math.log(b0(u) / d0(u)), y1 + y2, s1 + s2)
            + q(lambda u: math.log(b1(u) / d1(u)), y1, s1)
            + q(lambda u: math.log(b2(u) / d2(u)), y2, s2)
            + q(lambda u: math.log(b3(u) / d3(u)), y1 - y2, s1 - s2))


def det_competition(a, ystar):
    kappa, gamma, eta = a["kappa"], a["gamma"], a["eta"]
    y1, y2 = ystar
    s, u = y1 + y2, y1 - y2
    c0 = kappa / (1 + kappa * s) - 1 / s
    c3 = (gamma + 2 * eta * u / (1 + eta * u * u)) + gamma
    c1 = 1 / y1
    c2 = 1 / y2
    return 4 * c0 * c3 + c1 * c2 + (c0 + c3) * (c1 + c2)


def competition_ystar(a):
    """Zero of the BD part of the drift (swap jumps cancel at detailed balance)."""
    b0, d0, b1, d1, b2, d2, b3, d3 = competition_functions(a["kappa"], a["gamma"], a["eta"])

    def F(y):
        y1, y2 = y
        s, u = y1 + y2, y1 - y2
        f1 = a["a2"] * b0(s) * b3(u) - a["a1"] * d0(s) * y1 * d3(u)
        f2 = a["a4"] * b0(s) * d3(u) - a["a3"] * d0(s) * y2 * b3(u)
        return [f1, f2]

    return np.asarray(fsolve(F, [1.0, 1.0], xtol=1e-13))


def competition_bd_log_tau(a, N):
    """Birth-death reduction (no swap jumps) of the competition process."""
    b0, d0, b1, d1, b2, d2, b3, d3 = competition_functions(a["kappa"], a["gamma"], a["eta"])
    ys = competition_ystar(a)
    s, u = ys.sum(), ys[0] - ys[1]
    b0p, d1p, d2p = 1.0, 1.0, 1.0  # b0(s) = s, d_i(y) = y
    bii = [a["a2"] * b0p * b1(0) * b3(0), a["a4"] * b0p * b2(0) * d3(0)]
    dd = [a["a1"] * d0(0) * d1p * d3(0), a["a3"] * d0(0) * d2p * b3(0)]
    D = _D(bii, dd)
    num = b0p * d0(0) * b1(0) * d1p * b2(0) * d2p * b3(0) * d3(0)
    den = b0(s) * d0(s) * b1(ys[0]) * d1(ys[0]) * b2(ys[1]) * d2(ys[1]) * b3(u) * d3(u)
    det = det_competition(a, ys)
    return (-math.log(D) + 0.5 * math.log(2 * math.pi / (N * det) * num / den)
            + N * V_competition(a, (0.0, 0.0), ys))
