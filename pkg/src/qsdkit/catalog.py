"""Built-in models.

sis1d, sis_hetero          SIS infection, one type / heterogeneous types (box)
linear_birth_quadratic_death  multitype BD with linear births, quadratic deaths
bc23_bd                    multitype BD with factorised rates b0(s) b_i(y_i), d0(s) d_i(y_i)
competition                k=2 competition process with swap jumps
nonrev2d                   a BD model whose rate field is not a gradient (negative control)
"""
from __future__ import annotations

import numpy as np

from .errors import ParameterConstraintViolated, UnknownModel
from .model import StateSpaceGeom, build_model

ALIASES = {"lambda": "lam", "λ": "lam", "μ": "mu", "κ": "kappa", "β": "beta",
           "α": "alpha", "γ": "gamma", "η": "eta", "ν": "nu"}


def _unit(i, k, s=1):
    e = [0] * k
    e[i] = s
    return e


def _norm_params(params):
    out = {}
    for key, v in (params or {}).items():
        out[ALIASES.get(key, key)] = v
    return out


def _vec(p, name, k, default):
    """Vector parameter given as a list, a scalar, or as name1..namek."""
    if name in p:
        v = p.pop(name)
        v = np.broadcast_to(np.asarray(v, dtype=float), (k,))
        return [float(x) for x in v]
    vals = []
    for i in range(k):
        key = f"{name}{i + 1}"
        vals.append(float(p.pop(key)) if key in p else float(default[i]))
    return vals


def _take(p, name, default):
    return float(p.pop(name, default))


def _bd_jumps(k):
    jumps = []
    for i in range(k):
        jumps += [_unit(i, k, 1), _unit(i, k, -1)]
    return jumps


def _leftover(p, name):
    if p:
        raise ParameterConstraintViolated(f"unknown parameters for {name}: {sorted(p)}")


def sis1d(params=None):
    p = _norm_params(params)
    R0 = _take(p, "R0", 2.0)
    _leftover(p, "sis1d")
    if not R0 > 1:
        raise ParameterConstraintViolated(f"sis1d needs R0 > 1 (got R0 = {R0})")
    geom = StateSpaceGeom("box", 1, f=(1.0,))
    return build_model("sis1d", 1, geom, [[1], [-1]], ["R0*y1*(1-y1)", "y1"], {"R0": R0})


def sis_hetero(params=None):
    p = _norm_params(params)
    k = int(p.pop("k", 2))
    beta = _take(p, "beta", 3.0)
    mu = _vec(p, "mu", k, [1.0] * k)
    alpha = _vec(p, "alpha", k, [1.0, 0.5] + [1.0] * (k - 2))
    f = _vec(p, "f", k, [1.0 / k] * k)
    _leftover(p, "sis_hetero")
    if min(mu) <= 0 or min(alpha) <= 0 or beta <= 0:
        raise ParameterConstraintViolated("sis_hetero needs beta, mu_i, alpha_i > 0")
    R = beta * sum(a * m * fi for a, m, fi in zip(alpha, mu, f))
    if not R > 1:
        raise ParameterConstraintViolated(
            f"sis_hetero needs beta * sum(alpha_i mu_i f_i) > 1 (got {R:.6g})")
    s = "+".join(f"y{j + 1}" for j in range(k))
    rates = []
    for i in range(k):
        rates += [f"beta*mu{i + 1}*(f{i + 1}-y{i + 1})*({s})", f"y{i + 1}/alpha{i + 1}"]
    par = {"beta": beta}
    for i in range(k):
        par[f"mu{i + 1}"] = mu[i]
        par[f"alpha{i + 1}"] = alpha[i]
        par[f"f{i + 1}"] = f[i]
    geom = StateSpaceGeom("box", k, f=tuple(f))
    return build_model("sis_hetero", k, geom, _bd_jumps(k), rates, par)


def linear_birth_quadratic_death(params=None):
    p = _norm_params(params)
    k = int(p.pop("k", 2))
    lam = _take(p, "lam", 1.0)
    mu = _take(p, "mu", 1.0)
    kappa = _take(p, "kappa", 1.0)
    _leftover(p, "linear_birth_quadratic_death")
    if min(lam, mu, kappa) <= 0:
        raise ParameterConstraintViolated("linear_birth_quadratic_death needs lam, mu, kappa > 0")
    if not k * lam > mu:
        raise ParameterConstraintViolated(
            f"linear_birth_quadratic_death needs k*lam > mu (got {k}*{lam} <= {mu})")
    s = "+".join(f"y{j + 1}" for j in range(k))
    rates = []
    for i in range(k):
        rates += [f"lam*({s})", f"y{i + 1}*(mu+kappa*({s}))"]
    ystar = (k * lam - mu) / (k * kappa)
    geom = StateSpaceGeom("lattice", k, extent=max(1.0, 4 * ystar))
    return build_model("linear_birth_quadratic_death", k, geom, _bd_jumps(k), rates,
                       {"lam": lam, "mu": mu, "kappa": kappa})


def bc23_bd(params=None):
    """Factorised BD rates: beta_{e_i} = b0(s) b_i(y_i), beta_{-e_i} = d0(s) d_i(y_i)
    with b0(s) = s, d0(s) = 1 + kappa s, b_i(y) = lam_i / (1 + c y),
    d_i(y) = mu_i y (1 + nu y)."""
    p = _norm_params(params)
    k = int(p.pop("k", 2))
    lam = _vec(p, "lam", k, [1.5, 1.0] + [1.0] * (k - 2))
    mu = _vec(p, "mu", k, [1.0, 0.8] + [1.0] * (k - 2))
    kappa = _take(p, "kappa", 0.5)
    nu = _take(p, "nu", 0.2)
    c = _take(p, "c", 0.3)
    _leftover(p, "bc23_bd")
    if min(lam) <= 0 or min(mu) <= 0 or min(kappa, nu, c) < 0:
        raise ParameterConstraintViolated("bc23_bd needs lam_i, mu_i > 0 and kappa, nu, c >= 0")
    if not sum(l / m for l, m in zip(lam, mu)) > 1:
        raise ParameterConstraintViolated("bc23_bd needs sum(lam_i/mu_i) > 1 (origin unstable)")
    s = "+".join(f"y{j + 1}" for j in range(k))
    rates = []
    for i in range(k):
        y = f"y{i + 1}"
        rates += [f"({s})*lam{i + 1}/(1+c*{y})", f"(1+kappa*({s}))*mu{i + 1}*{y}*(1+nu*{y})"]
    par = {"kappa": kappa, "nu": nu, "c": c}
    for i in range(k):
        par[f"lam{i + 1}"] = lam[i]
        par[f"mu{i + 1}"] = mu[i]
    geom = StateSpaceGeom("lattice", k, extent=3.0)
    return build_model("bc23_bd", k, geom, _bd_jumps(k), rates, par)


COMPETITION_DEFAULTS = dict(a1=1.0, a2=2.0, a3=1.0, a4=2.0, a5=1.0, a6=1.0,
                            kappa=1.0, gamma=0.3, eta=0.0)


def competition(params=None, strict=True):
    """Competition process built from

        b0(s) = s, d0(s) = 1 + kappa s, c0 = c1 = c2 = b1 = b2 = 1,
        d1(y) = y, d2(y) = y, b3(u) = exp(-gamma u),
        d3(u) = exp(gamma u) (1 + eta u^2)

    so that b3 d3 is constant iff eta = 0.  ``a5 = a6 = 0`` drops the swap
    jumps, leaving a birth-death process.
    """
    p = _norm_params(params)
    a = {n: _take(p, n, v) for n, v in COMPETITION_DEFAULTS.items()}
    _leftover(p, "competition")
    for n in ("a1", "a2", "a3", "a4"):
        if a[n] <= 0:
            raise ParameterConstraintViolated(f"competition needs {n} > 0")
    if min(a["kappa"], a["eta"]) < 0:
        raise ParameterConstraintViolated("competition needs kappa, eta >= 0")
    swaps = not (a["a5"] == 0 and a["a6"] == 0)
    if swaps and min(a["a5"], a["a6"]) <= 0:
        raise ParameterConstraintViolated("competition needs a5, a6 > 0 (or both zero)")
    if swaps and strict:
        lhs = a["a1"] * a["a4"] * a["a5"]
        rhs = a["a2"] * a["a3"] * a["a6"]
        if abs(lhs - rhs) > 1e-12 * max(abs(lhs), abs(rhs)):
            raise ParameterConstraintViolated(
                f"competition needs a1*a4*a5 = a2*a3*a6 (got {lhs:.6g} != {rhs:.6g})")
    b3 = "exp(gamma*(y2-y1))"
    d3 = "(exp(gamma*(y1-y2))*(1+eta*(y1-y2)^2))"
    b0, d0 = "(y1+y2)", "(1+kappa*(y1+y2))"
    jumps = [[1, 0], [-1, 0], [0, 1], [0, -1]]
    rates = [
        f"a2*{b0}*{b3}",
        f"a1*{d0}*y1*{d3}",
        f"a4*{b0}*{d3}",
        f"a3*{d0}*y2*{b3}",
    ]
    if swaps:
        jumps += [[1, -1], [-1, 1]]
        rates += [f"a5*y2*{b3}^2", f"a6*y1*{d3}^2"]
    geom = StateSpaceGeom("lattice", 2, extent=4.0)
    return build_model("competition", 2, geom, jumps, rates, a)


def nonrev2d(params=None):
    p = _norm_params(params)
    lam = _take(p, "lam", 1.0)
    mu = _take(p, "mu", 1.0)
    kappa = _take(p, "kappa", 1.0)
    _leftover(p, "nonrev2d")
    if min(lam, mu, kappa) <= 0:
        raise ParameterConstraintViolated("nonrev2d needs lam, mu, kappa > 0")
    if not 2 * lam > mu:
        raise ParameterConstraintViolated("nonrev2d needs 2*lam > mu")
    rates = ["lam*(y1+y2)", "y1*(mu+kappa*y2)", "lam*(y1+y2)", "y2*(mu+kappa*y2)"]
    geom = StateSpaceGeom("lattice", 2, extent=3.0)
    return build_model("nonrev2d", 2, geom, _bd_jumps(2), rates,
                       {"lam": lam, "mu": mu, "kappa": kappa})


CATALOG = {
    "sis1d": sis1d,
    "sis_hetero": sis_hetero,
    "linear_birth_quadratic_death": linear_birth_quadratic_death,
    "bc23_bd": bc23_bd,
    "competition": competition,
    "nonrev2d": nonrev2d,
}


def catalog(name, params=None, **kw):
    if name not in CATALOG:
        raise UnknownModel(f"unknown model {name!r}; choose from {sorted(CATALOG)}")
    return CATALOG[name](params, **kw)
