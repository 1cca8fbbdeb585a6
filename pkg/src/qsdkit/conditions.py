"""Numerical checks of the asymptotic Kolmogorov conditions.

Residuals are normalised as ||r||_inf / max(1, scale of the compared quantities)
and a condition passes iff the worst residual over the sample points is below
``tol``.  Samples are Halton points in the interior, kept 1e-3 * diameter away
from the boundary where log-rates blow up.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numdiff
from .errors import NotBirthDeath
from .model import ModelSpec, halton_points
from .wkb import ThetaField

DEFAULT_TOL = 1e-7
DEFAULT_SAMPLES = 256
CONDITION_IDS = ("K0", "IRR", "K1", "IRR2", "BD_IRR", "BD_IRR2", "BD_ASSUMP", "LIN_K")


@dataclass
class ConditionReport:
    id: str
    status: str  # pass | fail | not_applicable
    worst_residual: float
    witness: Optional[dict]
    samples: int
    tol: float
    detail: str = ""

    @property
    def passed(self):
        return self.status == "pass"

    def to_dict(self):
        return {"id": self.id, "status": self.status, "worst_residual": self.worst_residual,
                "witness": self.witness, "samples": self.samples, "tol": self.tol,
                "detail": self.detail}


def _report(cid, res, Y, tol, pairs=None, detail=""):
    """Build a report from per-sample residuals ``res`` (n,)."""
    p = int(np.argmax(res))
    worst = float(res[p])
    status = "pass" if worst < tol else "fail"
    witness = None
    if status == "fail":
        witness = {"y": Y[:, p].tolist()}
        if pairs is not None:
            witness["pair"] = pairs[p]
    return ConditionReport(cid, status, worst, witness, Y.shape[1], tol, detail)


def _na(cid, why, samples=0, tol=DEFAULT_TOL):
    return ConditionReport(cid, "not_applicable", 0.0, None, samples, tol, why)


def sample_points(m: ModelSpec, samples=DEFAULT_SAMPLES):
    return halton_points(m.geom, samples)


def check_K0(m: ModelSpec, samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL) -> ConditionReport:
    """Consistency of l.theta = ln(beta_{-l}/beta_l) over all jumps."""
    tf = ThetaField(m, tol)
    Y = sample_points(m, samples)
    _, res = tf.solve(tf.log_ratio(Y))
    return _report("K0", res, Y, tol, detail="least-squares residual of the theta system")


def _asym(M):
    """Worst |M[a, b] - M[b, a]| per sample, normalised, and the offending pair."""
    A = np.abs(M - np.swapaxes(M, 0, 1))
    n = M.shape[-1]
    scale = np.maximum(1.0, np.max(np.abs(M).reshape(-1, n), axis=0))
    flat = A.reshape(-1, n)
    idx = np.argmax(flat, axis=0)
    res = flat[idx, np.arange(n)] / scale
    pairs = [divmod(int(i), M.shape[0]) for i in idx]
    return res, pairs


def irr_matrix(m, Y, richardson=True, h_scale=1.0):
    """M[a, b] = l_a . grad ln(beta_{-l_b}/beta_{l_b}); the condition asks M symmetric."""
    tf = ThetaField(m)
    hs = tf.hscale(Y, numdiff.H1, h_scale)
    Jr = numdiff.jacobian(tf.log_ratio, Y, richardson=richardson, h_scale=hs)
    return np.einsum("ai,bip->abp", m.L, Jr)


def irr2_matrix(m, Y, richardson=True, h_scale=1.0):
    """M[a, b] = l_a^T Hess ln(beta_{-l_a} beta_{l_a}) l_b."""
    tf = ThetaField(m)
    hs = tf.hscale(Y, numdiff.H2, h_scale)
    H = numdiff.hessian(tf.log_product, Y, richardson=richardson, h_scale=hs)
    return np.einsum("ai,aijp,bj->abp", m.L, H, m.L)


def _pair_names(m, pairs):
    return [[list(m.jumps[a]), list(m.jumps[b])] for a, b in pairs]


def check_IRR(m: ModelSpec, samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL, cid="IRR") -> ConditionReport:
    Y = sample_points(m, samples)
    res, pairs = _asym(irr_matrix(m, Y))
    return _report(cid, res, Y, tol, _pair_names(m, pairs),
                   "asymmetry of l1 . grad ln(beta_{-l2}/beta_l2)")


def check_K1(m: ModelSpec, samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL) -> ConditionReport:
    tf = ThetaField(m, tol)
    Y = sample_points(m, samples)
    _, res = tf.solve(tf.rhs0(Y))
    return _report("K1", res, Y, tol, detail="least-squares residual of the theta0 system")


def check_IRR2(m: ModelSpec, samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL, cid="IRR2") -> ConditionReport:
    Y = sample_points(m, samples)
    res, pairs = _asym(irr2_matrix(m, Y))
    return _report(cid, res, Y, tol, _pair_names(m, pairs),
                   "asymmetry of l1^T Hess ln(beta_{-l1} beta_l1) l2")


def check_K1_IRR2(m, samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL):
    return check_K1(m, samples, tol), check_IRR2(m, samples, tol)


# --- birth-death specific ------------------------------------------------------------

def linearized_constants(m: ModelSpec):
    """b_ij = d beta_{e_i}/d y_j and d_i = d beta_{-e_i}/d y_i at the origin
    (one-sided differences), plus the largest cross-death derivative."""
    if not m.is_birth_death:
        raise NotBirthDeath(f"{m.label}: jump set is not {{+e_i, -e_i}}")
    k = m.k
    b = np.empty((k, k))
    dmat = np.empty((k, k))
    birth = [m.unit_index(i, 1) for i in range(k)]
    death = [m.unit_index(i, -1) for i in range(k)]
    for j in range(k):
        e = np.zeros(k)
        e[j] = 1.0
        g = numdiff.forward_derivative(m.rates_at, np.zeros(k), e)
        b[:, j] = g[birth]
        dmat[:, j] = g[death]
    d = np.diag(dmat).copy()
    off = dmat - np.diag(d)
    return b, d, float(np.max(np.abs(off))) if k > 1 else 0.0


def check_bd_assumptions(m: ModelSpec, tol=DEFAULT_TOL) -> ConditionReport:
    if not m.is_birth_death:
        return _na("BD_ASSUMP", "not a birth-death jump set", tol=tol)
    b, d, off = linearized_constants(m)
    scale = max(1.0, float(np.max(np.abs(b))), float(np.max(np.abs(d))))
    thr = tol * scale
    bad = []
    for i in range(m.k):
        if not d[i] > thr:
            bad.append({"d_index": i + 1, "d": float(d[i])})
        if not np.any(b[i] > thr):
            bad.append({"b_row": i + 1, "b": b[i].tolist()})
    if bad:
        return ConditionReport("BD_ASSUMP", "fail", 1.0, {"y": [0.0] * m.k, "violations": bad},
                               1, tol, "need d_i > 0 and some b_ij > 0 in every row")
    return ConditionReport("BD_ASSUMP", "pass", 0.0, None, 1, tol,
                           f"min d_i = {d.min():.6g}; cross-death derivatives <= {off:.2g}")


def check_bd_result3(m: ModelSpec, tol=DEFAULT_TOL) -> ConditionReport:
    """b_ij = b_ii for all i, j, on top of the sign conditions on b and d."""
    if not m.is_birth_death:
        raise NotBirthDeath(f"{m.label}: jump set is not {{+e_i, -e_i}}")
    pre = check_bd_assumptions(m, tol)
    b, d, _ = linearized_constants(m)
    dev = np.abs(b - np.diag(b)[:, None])
    scale = max(1.0, float(np.max(np.abs(b))))
    i, j = np.unravel_index(int(np.argmax(dev)), dev.shape)
    worst = float(dev[i, j] / scale)
    if pre.status == "fail":
        return ConditionReport("LIN_K", "fail", max(worst, pre.worst_residual), pre.witness,
                               1, tol, "sign conditions on b, d fail")
    if worst < tol:
        return ConditionReport("LIN_K", "pass", worst, None, 1, tol, "b_ij = b_ii")
    return ConditionReport("LIN_K", "fail", worst,
                           {"y": [0.0] * m.k, "pair": [int(i) + 1, int(j) + 1],
                            "b_ij": float(b[i, j]), "b_ii": float(b[i, i])},
                           1, tol, "b_ij differs from b_ii")


def check_all(m: ModelSpec, samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL):
    reports = [check_K0(m, samples, tol), check_IRR(m, samples, tol),
               check_K1(m, samples, tol), check_IRR2(m, samples, tol)]
    if m.is_birth_death:
        reports.append(check_IRR(m, samples, tol, cid="BD_IRR"))
        reports.append(check_IRR2(m, samples, tol, cid="BD_IRR2"))
        reports.append(check_bd_assumptions(m, tol))
        reports.append(check_bd_result3(m, tol))
    else:
        why = "not a birth-death jump set"
        reports += [_na(c, why, samples, tol) for c in ("BD_IRR", "BD_IRR2", "BD_ASSUMP", "LIN_K")]
    return reports


def fd_convergence_order(matrix_fn, m, Y, h0=1e-2, levels=4, floor=1e-10):
    """Observed order of the plain central-difference residual of ``matrix_fn``.

    The asymmetry residual itself is used while it sits above round-off.  When
    the exact structure makes the truncation error symmetric (residual at
    round-off from the start), successive differences ||M_h - M_{h/2}|| are
    used instead, which expose the order of the scheme.  Returns
    (log2 ratios, the sequence they came from, which sequence was used).
    """
    base = numdiff.H2 if matrix_fn is irr2_matrix else numdiff.H1
    Ms = [matrix_fn(m, Y, richardson=False, h_scale=h0 / base / 2 ** i) for i in range(levels)]
    res = [float(np.max(_asym(M)[0])) for M in Ms]
    if res[0] > floor:
        seq, kind = res, "residual"
    else:
        seq = [float(np.max(np.abs(Ms[i] - Ms[i + 1]))) for i in range(levels - 1)]
        kind = "increment"
    return [float(np.log2(seq[i] / seq[i + 1])) for i in range(len(seq) - 1)], seq, kind
