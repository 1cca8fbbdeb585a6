"""Density-dependent population models: geometry, jump set, rate functions.

A model is the tuple (state-space geometry, jumps, rate expressions,
parameter values).  Rates are evaluated on the scaled state ``y = x/N``;
the process jumps from ``x`` to ``x + l`` at rate ``N * beta_l(x/N)``.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import ModelError
from .expr import RateExpr, parse_rate_expr, rename_variables, to_text

_PARAM_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_RESERVED = re.compile(r"y\d+$")


@dataclass(frozen=True)
class StateSpaceGeom:
    """Either all of Z_+^k ("lattice") or a box with capacity fractions ``f``.

    ``extent`` bounds the region sampled by numerical checks on lattice
    models (the closed orthant itself is unbounded).
    """
    kind: str
    k: int
    f: Optional[tuple] = None
    extent: float = 2.0
    counts: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("lattice", "box"):
            raise ModelError(f"geometry kind must be 'lattice' or 'box', got {self.kind!r}")
        if self.k < 1:
            raise ModelError("dimension k must be >= 1")
        if self.kind == "box":
            if self.counts is not None:
                total = sum(self.counts)
                fr = tuple(Fraction(c, total) for c in self.counts)
                object.__setattr__(self, "f", fr)
            if self.f is None or len(self.f) != self.k:
                raise ModelError("box geometry needs one capacity fraction per coordinate")
            object.__setattr__(self, "f", tuple(self.f))
            if min(float(fi) for fi in self.f) <= 0:
                raise ModelError("capacity fractions must be positive")
            if abs(sum(float(fi) for fi in self.f) - 1.0) > 1e-12:
                raise ModelError(f"capacity fractions must sum to 1, got {sum(map(float, self.f))}")

    @property
    def is_box(self):
        return self.kind == "box"

    @property
    def upper(self):
        if self.is_box:
            return np.array([float(fi) for fi in self.f])
        return np.full(self.k, np.inf)

    @property
    def sampling_upper(self):
        """Finite upper corner of the region used for quasi-random checks."""
        if self.is_box:
            return self.upper
        return np.full(self.k, float(self.extent))

    def contains(self, y, tol=1e-12):
        y = np.asarray(y, dtype=float)
        up = self.upper.reshape((-1,) + (1,) * (y.ndim - 1))
        return np.all((y >= -tol) & (y <= up + tol), axis=0)

    def boundary_distance(self, y):
        y = np.asarray(y, dtype=float)
        d = np.min(y, axis=0)
        if self.is_box:
            up = self.upper.reshape((-1,) + (1,) * (y.ndim - 1))
            d = np.minimum(d, np.min(up - y, axis=0))
        return d

    def box_sizes(self, N):
        """Integer capacities ``N f_i``; raises unless each is integral."""
        out = []
        for fi in self.f:
            v = Fraction(fi).limit_denominator(10 ** 9) * N
            if v.denominator != 1:
                raise ModelError(f"N*f_i = {float(v)} is not an integer (N={N}, f_i={fi})")
            out.append(int(v))
        return out

    def to_dict(self):
        d = {"kind": self.kind}
        if self.is_box:
            if self.counts is not None:
                d["counts"] = list(self.counts)
            d["f"] = [float(fi) for fi in self.f]
        else:
            d["extent"] = self.extent
        return d


@dataclass(frozen=True, eq=False)
class ModelSpec:
    label: str
    geom: StateSpaceGeom
    jumps: tuple
    rates: tuple
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        k = self.geom.k
        jumps = tuple(tuple(int(c) for c in l) for l in self.jumps)
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "params", dict(self.params))
        if len(jumps) != len(self.rates):
            raise ModelError("need exactly one rate expression per jump")
        if len(set(jumps)) != len(jumps):
            raise ModelError("duplicate jump vectors")
        for l in jumps:
            if len(l) != k:
                raise ModelError(f"jump {l} has wrong dimension (k={k})")
            if not any(l):
                raise ModelError("the zero vector is not a jump")
        for name in self.params:
            if not _PARAM_NAME.match(name) or _RESERVED.match(name):
                raise ModelError(f"invalid parameter name {name!r}")

    # -- structure ------------------------------------------------------------

    @property
    def k(self):
        return self.geom.k

    @cached_property
    def L(self):
        """Jump matrix, one jump per row."""
        return np.array(self.jumps, dtype=float).reshape(len(self.jumps), self.k)

    @cached_property
    def neg_index(self):
        """``neg_index[a]`` is the row of ``-jumps[a]``; -1 if absent."""
        pos = {l: a for a, l in enumerate(self.jumps)}
        return np.array([pos.get(tuple(-c for c in l), -1) for l in self.jumps])

    @property
    def is_birth_death(self):
        units = set()
        for i in range(self.k):
            e = [0] * self.k
            e[i] = 1
            units.add(tuple(e))
            e[i] = -1
            units.add(tuple(e))
        return set(self.jumps) == units

    def jump_index(self, l):
        return self.jumps.index(tuple(int(c) for c in l))

    def unit_index(self, i, sign=1):
        e = [0] * self.k
        e[i] = sign
        return self.jump_index(e)

    def require_symmetric_jumps(self):
        if np.any(self.neg_index < 0):
            missing = [self.jumps[a] for a in np.flatnonzero(self.neg_index < 0)]
            raise ModelError(f"jump set is not closed under negation; missing -l for {missing}")

    # -- evaluation -------------------------------------------------------------

    def rates_at(self, y):
        """All rates at ``y`` (shape ``(k,)`` or ``(k, n)``) -> ``(|L|,)`` or ``(|L|, n)``."""
        y = np.asarray(y, dtype=float)
        return np.stack([np.broadcast_to(r(y, self.params), y.shape[1:]) if y.ndim > 1
                         else np.asarray(r(y, self.params), dtype=float)
                         for r in self.rates]).astype(float)

    def drift(self, y):
        return self.L.T @ self.rates_at(y)

    # -- (de)serialisation -------------------------------------------------------

    def to_dict(self):
        return {
            "label": self.label,
            "k": self.k,
            "geom": self.geom.to_dict(),
            "jumps": [list(l) for l in self.jumps],
            "rates": {str(a): to_text(r.ast) for a, r in enumerate(self.rates)},
            "params": dict(self.params),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def build_model(label, k, geom, jumps, rate_texts: Sequence[str], params) -> ModelSpec:
    params = {str(n): float(v) for n, v in params.items()}
    rates = tuple(parse_rate_expr(t, k, params) for t in rate_texts)
    return ModelSpec(label, geom, tuple(map(tuple, jumps)), rates, params)


def model_from_dict(d) -> ModelSpec:
    try:
        k = int(d["k"])
        g = d.get("geom", {"kind": "lattice"})
        kind = g.get("kind", "lattice")
        geom = StateSpaceGeom(
            kind=kind, k=k,
            f=tuple(g["f"]) if g.get("f") is not None and g.get("counts") is None else None,
            extent=float(g.get("extent", 2.0)),
            counts=tuple(int(c) for c in g["counts"]) if g.get("counts") is not None else None,
        )
        jumps = [tuple(int(c) for c in l) for l in d["jumps"]]
        rates = d["rates"]
        if isinstance(rates, dict):
            texts = []
            for a in range(len(jumps)):
                if str(a) not in rates:
                    raise ModelError(f"no rate given for jump index {a}")
                texts.append(rates[str(a)])
        else:
            texts = list(rates)
        return build_model(d.get("label", "model"), k, geom, jumps, texts, d.get("params", {}))
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model description: {exc}") from exc


def load_model(path) -> ModelSpec:
    with open(Path(path)) as fh:
        return model_from_dict(json.load(fh))


def permute_coordinates(m: ModelSpec, perm) -> ModelSpec:
    """Relabel coordinates: new coordinate ``i`` is old coordinate ``perm[i]``."""
    perm = list(perm)
    k = m.k
    if sorted(perm) != list(range(k)):
        raise ModelError(f"{perm} is not a permutation of 0..{k - 1}")
    old_to_new = {perm[i] + 1: i + 1 for i in range(k)}
    jumps = [tuple(l[perm[i]] for i in range(k)) for l in m.jumps]
    rates = tuple(RateExpr(rename_variables(r.ast, old_to_new), r.source, k) for r in m.rates)
    g = m.geom
    geom = StateSpaceGeom(g.kind, k,
                          f=tuple(g.f[p] for p in perm) if g.is_box else None,
                          extent=g.extent)
    return ModelSpec(f"{m.label}[perm={perm}]", geom, tuple(jumps), rates, m.params)


# --- quasi-random sampling -------------------------------------------------------

def halton_points(geom: StateSpaceGeom, n, margin_frac=1e-3, lower=None, upper=None):
    """``n`` Halton points (shape ``(k, n)``) in the interior of the sampling box,
    shrunk by ``margin_frac`` times its diameter."""
    lo = np.zeros(geom.k) if lower is None else np.asarray(lower, dtype=float)
    hi = geom.sampling_upper if upper is None else np.asarray(upper, dtype=float)
    margin = margin_frac * float(np.linalg.norm(hi - lo))
    lo, hi = lo + margin, hi - margin
    seq = qmc.Halton(d=geom.k, scramble=False).random(n + 1)[1:]
    return (lo + seq * (hi - lo)).T


# --- structural validation ---------------------------------------------------------

@dataclass
class AssumptionCheck:
    name: str
    status: str  # pass | fail | info
    detail: str = ""
    witness: Optional[dict] = None


@dataclass
class ValidationReport:
    label: str
    checks: list

    @property
    def ok(self):
        return all(c.status != "fail" for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self):
        return [c for c in self.checks if c.status == "fail"]

    def to_dict(self):
        return {"label": self.label, "ok": self.ok,
                "checks": [{"name": c.name, "status": c.status, "detail": c.detail,
                            "witness": c.witness} for c in self.checks]}


def _safe_rates(m, Y):
    """Rates at the columns of ``Y``; columns where evaluation fails come back as NaN."""
    from .errors import DomainError
    try:
        with np.errstate(all="ignore"):
            return m.rates_at(Y)
    except DomainError:
        out = np.full((len(m.jumps), Y.shape[1]), np.nan)
        for p in range(Y.shape[1]):
            try:
                with np.errstate(all="ignore"):
                    out[:, p] = m.rates_at(Y[:, p])
            except DomainError:
                pass
        return out


def validate_model(m: ModelSpec, samples=256, tol=1e-12) -> ValidationReport:
    """Check the structural assumptions on a model; failures become report entries."""
    checks = []
    k = m.k
    g = m.geom

    if g.is_box:
        checks.append(AssumptionCheck("A1_geometry", "pass",
                                      f"box with f = {[float(fi) for fi in g.f]}"))
    else:
        checks.append(AssumptionCheck("A1_geometry", "pass", "lattice Z_+^k"))
    checks.append(AssumptionCheck(
        "A1_N_independence", "info",
        "capacity fractions are assumed not to vary with N; not checkable on one instance"))

    missing = [list(m.jumps[a]) for a in np.flatnonzero(m.neg_index < 0)]
    if missing:
        checks.append(AssumptionCheck("A3_minus_l", "fail", "jumps without their negatives",
                                      {"jumps": missing}))
    else:
        checks.append(AssumptionCheck("A3_minus_l", "pass"))
    rank = int(np.linalg.matrix_rank(m.L))
    checks.append(AssumptionCheck("A3_span", "pass" if rank == k else "fail",
                                  f"rank of jump matrix = {rank}, k = {k}",
                                  None if rank == k else {"rank": rank}))

    r0 = _safe_rates(m, np.zeros((k, 1)))[:, 0]
    bad = [a for a in range(len(m.jumps)) if not (np.isfinite(r0[a]) and abs(r0[a]) <= tol)]
    if bad:
        a = bad[0]
        checks.append(AssumptionCheck("A4_absorbing", "fail", "rate nonzero at the origin",
                                      {"y": [0.0] * k, "jump": list(m.jumps[a]),
                                       "value": float(r0[a])}))
    else:
        checks.append(AssumptionCheck("A4_absorbing", "pass"))

    # interior positivity
    Y = halton_points(g, samples)
    R = _safe_rates(m, Y)
    badmask = ~(np.isfinite(R) & (R > 0))
    if badmask.any():
        a, p = np.argwhere(badmask)[0]
        checks.append(AssumptionCheck("A5_interior_positive", "fail",
                                      "rate not finite and positive at an interior point",
                                      {"y": Y[:, p].tolist(), "jump": list(m.jumps[a]),
                                       "value": float(R[a, p])}))
    else:
        checks.append(AssumptionCheck("A5_interior_positive", "pass",
                                      f"{samples} interior points"))

    # boundary faces: rates that would leave the domain must vanish, the rest be >= 0
    nface = max(8, samples // (2 * k))
    witness = None
    worst = 0.0
    for i in range(k):
        faces = [(0.0, -1)]
        if g.is_box:
            faces.append((float(g.f[i]), 1))
        for val, sgn in faces:
            F = halton_points(g, nface)
            F[i] = val
            RF = _safe_rates(m, F)
            for a, l in enumerate(m.jumps):
                must_vanish = l[i] * sgn > 0
                vals = RF[a]
                if must_vanish:
                    err = np.where(np.isfinite(vals), np.abs(vals), np.inf)
                else:
                    err = np.where(np.isfinite(vals), np.maximum(-vals, 0.0), np.inf)
                p = int(np.argmax(err))
                if err[p] > max(tol, worst):
                    worst = err[p]
                    witness = {"y": F[:, p].tolist(), "jump": list(l), "value": float(vals[p])}
    if witness is None:
        checks.append(AssumptionCheck("A5_boundary", "pass"))
    else:
        checks.append(AssumptionCheck("A5_boundary", "fail",
                                      "rate leading out of the domain does not vanish on the face",
                                      witness))
    return ValidationReport(m.label, checks)
