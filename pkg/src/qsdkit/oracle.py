"""Ground truth on finite state spaces.

The chain restricted to C = S minus the origin has generator Q_C (rows: from,
columns: to), with transition rates N beta_l(x/N).  The QSD is the left Perron
vector, u Q_C = -u / tau.  Lattice models are truncated to a box; transitions
across the truncation face are dropped entirely (off-diagonal and diagonal).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (InvalidState, NotConverged, StateSpaceTooLarge, TruncationMassTooLarge)
from .model import ModelSpec
from .wkb import DEFAULT_DELTA, engine

MAX_STATES = 2_000_000
MASS_TOL = 1e-8
STEP_TOL = 1e-13
RESIDUAL_TOL = 1e-10
REL_STEP_TOL = 1e-13
REL_FLOOR = 1e-100

ABSORBED = -1
CLIPPED = -2


def default_truncation(m: ModelSpec, N):
    ys = engine(m).ystar
    return tuple(int(math.ceil(6 * N * y + 10 * math.sqrt(N))) for y in ys)


class TruncatedChain:
    """Enumeration of C, rate table and generator for fixed N."""

    def __init__(self, m: ModelSpec, N: int, truncation=None, max_states=MAX_STATES):
        self.m, self.N, self.k = m, int(N), m.k
        if m.geom.is_box:
            if truncation is not None:
                raise InvalidState("truncation only applies to lattice models")
            self.bounds = tuple(int(c) for c in m.geom.box_sizes(N))
            self.truncated = False
        else:
            if truncation is None:
                truncation = default_truncation(m, N)
            truncation = tuple(int(t) for t in np.broadcast_to(truncation, (m.k,)))
            if min(truncation) < 1:
                raise InvalidState(f"truncation bounds must be >= 1, got {truncation}")
            self.bounds = truncation
            self.truncated = True
        self.shape = tuple(b + 1 for b in self.bounds)
        n = int(np.prod([float(s) for s in self.shape])) - 1
        if n > max_states:
            raise StateSpaceTooLarge(f"|C| = {n} exceeds the cap of {max_states} states")
        self.n = n
        # flat index in the full box, origin (index 0) removed
        self.states = np.array(np.unravel_index(np.arange(1, n + 1), self.shape))  # (k, n)
        self._build()

    def index(self, x):
        """Position of state x in C, or -1 if x is the origin, -2 if outside the box."""
        x = np.asarray(x, dtype=int)
        if np.any(x < 0) or np.any(x > np.array(self.bounds)):
            return CLIPPED
        flat = int(np.ravel_multi_index(tuple(x), self.shape))
        return flat - 1

    def _build(self):
        m, N = self.m, self.N
        X = self.states
        with np.errstate(all="ignore"):
            R = N * m.rates_at(X / N)  # (|L|, n)
        R = np.where(np.isfinite(R), np.maximum(R, 0.0), 0.0)
        L = m.L
        tgt = np.empty((self.n, len(m.jumps)), dtype=np.int64)
        hi = np.array(self.bounds)[:, None]
        clipped_rate = np.zeros(self.n)
        for a, l in enumerate(L):
            T = X + l.astype(np.int64)[:, None]
            inside = np.all((T >= 0) & (T <= hi), axis=0)
            flat = np.full(self.n, CLIPPED, dtype=np.int64)
            flat[inside] = np.ravel_multi_index(tuple(T[:, inside]), self.shape) - 1
            tgt[:, a] = flat
            out = ~inside
            clipped_rate[out] += R[a, out]
            R[a, out] = 0.0
        self.rates = np.ascontiguousarray(R.T)  # (n, |L|)
        self.targets = tgt
        self.clipped_rate = clipped_rate
        self.exit = self.rates.sum(axis=1)
        keep = tgt >= 0
        rows = np.repeat(np.arange(self.n), len(m.jumps)).reshape(self.n, -1)[keep]
        Q = sp.csr_matrix((self.rates[keep], (rows, tgt[keep])), shape=(self.n, self.n))
        self.Q = (Q - sp.diags(self.exit)).tocsr()
        self.q_max = float(self.exit.max())

    @property
    def face(self):
        """States from which a transition was dropped by the truncation."""
        return self.clipped_rate > 0

    def absorption_rates(self):
        """N beta_l(-l/N) at the states -l adjacent to the origin, as (index, rate) pairs."""
        out = []
        for a, l in enumerate(self.m.L):
            x = -l.astype(np.int64)
            if np.all(x >= 0):
                i = self.index(x)
                if i >= 0:
                    out.append((i, self.N * float(self.m.rates_at(x / self.N)[a])))
        return out


@dataclass
class OracleResult:
    u: np.ndarray
    tau_exact: float      # flux route
    decay_rate: float     # eigen route, 1 / tau_eig
    tau_eig: float
    iterations: int
    residual: float
    truncation_mass: float
    chain: TruncatedChain = field(repr=False)

    @property
    def routes_rel_diff(self):
        return abs(self.tau_exact - self.tau_eig) / self.tau_exact

    def qsd_at(self, x):
        i = self.chain.index(x)
        return float(self.u[i]) if i >= 0 else 0.0

    def to_dict(self):
        return {"N": self.chain.N, "states": self.chain.n, "bounds": list(self.chain.bounds),
                "tau": self.tau_exact, "tau_log10": math.log10(self.tau_exact),
                "tau_eig": self.tau_eig, "decay_rate": self.decay_rate,
                "iterations": self.iterations, "residual": self.residual,
                "truncation_mass": self.truncation_mass}


def _normalize(u):
    return u / u.sum()


def exact_qsd(m: ModelSpec, N, truncation=None, start=None, max_iter=1_000_000,
              max_states=MAX_STATES, warm_start=True, check_truncation=True) -> OracleResult:
    """Exact QSD of the (truncated) chain by uniformised power iteration.

    A few steps of inverse iteration with a sparse LU of Q_C^T give the
    starting vector; the power iteration then certifies it with the stopping
    rule.  tau is the mean absorption time from u (one more LU solve) and
    is cross-checked against the flux into the origin.
    """
    ch = TruncatedChain(m, N, truncation, max_states)
    QT = ch.Q.T.tocsr()
    u = np.full(ch.n, 1.0 / ch.n) if start is None else _normalize(np.asarray(start, float))
    if np.any(u < 0) or u.shape != (ch.n,):
        raise InvalidState("start vector must be nonnegative with one entry per state")
    lu = None
    if warm_start:
        try:
            lu = spla.splu(QT.tocsc())
        except (MemoryError, RuntimeError):
            lu = None
    if lu is not None:
        for _ in range(50):
            w = -lu.solve(u)
            w = _normalize(np.maximum(w, 0.0))
            change = float(np.abs(w - u).sum())
            u = w
            if change < STEP_TOL:
                break
    inv_q = 1.0 / ch.q_max
    it = 0
    while True:
        it += 1
        uq = QT @ u
        w = _normalize(np.maximum(u + inv_q * uq, 0.0))
        change = float(np.abs(w - u).sum())
        pos = w > REL_FLOOR
        rel = float(np.max(np.abs(w[pos] - u[pos]) / w[pos])) if pos.any() else 0.0
        u = w
        if change < STEP_TOL and rel < REL_STEP_TOL:
            break
        if it >= max_iter:
            raise NotConverged(f"power iteration: L1 change {change:.3g}, relative change "
                               f"{rel:.3g} after {it} steps", it)
    # tau from the flux into the origin; P has no negative entries, so small
    # components (the ones next to the origin) are accurate to relative precision
    flux = float(sum(u[i] * r for i, r in ch.absorption_rates()))
    tau = 1.0 / flux if flux > 0 else math.inf
    # eigen route: mean absorption time started from u, -sum(u Q_C^{-1})
    if lu is not None:
        tau_eig = -float(lu.solve(u).sum())
    else:
        tau_eig = 1.0 / float(-(QT @ u).sum())
    residual = float(np.abs(QT @ u + u / tau).sum()) / ch.N
    if residual >= RESIDUAL_TOL:
        raise NotConverged(f"QSD residual {residual:.3g} above {RESIDUAL_TOL}", it)
    mass = float(u[ch.face].sum()) if ch.truncated else 0.0
    if check_truncation and mass > MASS_TOL:
        raise TruncationMassTooLarge(
            f"QSD mass {mass:.3g} on the truncation face {ch.bounds}; enlarge the truncation")
    return OracleResult(u, tau, 1.0 / tau_eig, tau_eig, it, residual, mass, ch)


# --- stochastic simulation ----------------------------------------------------------------

@numba.njit(cache=True)
def _ssa(rates, targets, init_cdf, seeds, max_events):
    reps = seeds.shape[0]
    times = np.full(reps, np.nan)
    used = 0
    for r in range(reps):
        np.random.seed(seeds[r])
        s = np.searchsorted(init_cdf, np.random.random() * init_cdf[-1], side="right")
        t = 0.0
        while True:
            row = rates[s]
            total = row.sum()
            t += -math.log(1.0 - np.random.random()) / total
            pick = np.random.random() * total
            acc = 0.0
            j = 0
            for j in range(row.shape[0]):
                acc += row[j]
                if pick < acc:
                    break
            used += 1
            nxt = targets[s, j]
            if nxt == -1:
                times[r] = t
                break
            s = nxt
            if used >= max_events:
                return times, True
    return times, False


@dataclass
class SimStats:
    replicates: int
    mean: float
    se: float
    seed: int
    init: str
    times: np.ndarray = field(repr=False)
    aborted: bool = False

    def to_dict(self):
        return {"replicates": self.replicates, "mean": self.mean, "se": self.se,
                "seed": self.seed, "init": self.init, "aborted": self.aborted}


def _init_weights(ch: TruncatedChain, init):
    if isinstance(init, str):
        if init != "qsd":
            raise InvalidState(f"unknown initial distribution {init!r}")
        return exact_qsd(ch.m, ch.N, ch.bounds if ch.truncated else None).u, "qsd"
    init = np.asarray(init, dtype=float)
    if init.shape == (ch.k,):
        i = ch.index(init.astype(int))
        if i < 0:
            raise InvalidState(f"initial state {init.tolist()} is not in C")
        w = np.zeros(ch.n)
        w[i] = 1.0
        return w, f"point mass at {init.astype(int).tolist()}"
    if init.shape == (ch.n,) and np.all(init >= 0) and init.sum() > 0:
        return init, "user distribution"
    raise InvalidState("init must be 'qsd', a state, or a distribution over C")


def replicate_seeds(seed, reps):
    """One independent 32-bit stream seed per replicate, derived from (seed, index)."""
    ss = np.random.SeedSequence(seed)
    return np.array([c.generate_state(1)[0] for c in ss.spawn(reps)], dtype=np.int64)


def gillespie_extinction(m: ModelSpec, N, init="qsd", replicates=10_000, seed=0,
                         truncation=None, max_events=10**9) -> SimStats:
    if replicates < 1:
        raise InvalidState("replicates must be >= 1")
    ch = TruncatedChain(m, N, truncation)
    w, desc = _init_weights(ch, init)
    targets = ch.targets.copy()
    targets[targets == CLIPPED] = 0  # rate is zero there, never chosen
    cdf = np.cumsum(w)
    times, aborted = _ssa(ch.rates, targets, cdf, replicate_seeds(seed, replicates), max_events)
    done = times[np.isfinite(times)]
    n = len(done)
    mean = float(done.mean()) if n else math.nan
    se = float(done.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return SimStats(n, mean, se, int(seed), desc, done, bool(aborted))


# --- WKB accuracy profile -------------------------------------------------------------------

@dataclass
class ErrorProfile:
    states: np.ndarray       # (k, n) body states
    u_exact: np.ndarray
    u_wkb: np.ndarray
    log_ratio: np.ndarray
    mode: np.ndarray
    mode_log_ratio: float
    max_abs_log_ratio: float
    sum_body_wkb: float
    sum_body_exact: float

    def rows(self):
        for p in range(self.states.shape[1]):
            yield (*self.states[:, p].tolist(), self.u_exact[p], self.u_wkb[p], self.log_ratio[p])

    def to_dict(self):
        return {"mode": self.mode.tolist(), "mode_log_ratio": self.mode_log_ratio,
                "max_abs_log_ratio": self.max_abs_log_ratio, "sum_body_wkb": self.sum_body_wkb,
                "sum_body_exact": self.sum_body_exact, "body_states": int(self.states.shape[1])}


def qsd_error_profile(m: ModelSpec, N, delta=DEFAULT_DELTA, oracle: Optional[OracleResult] = None,
                      truncation=None) -> ErrorProfile:
    """ln(u_wkb/u_exact) over the body {x : d(x, boundary) >= delta N}."""
    res = oracle or exact_qsd(m, N, truncation)
    ch = res.chain
    eng = engine(m)
    dist = np.array([eng.state_boundary_distance(N, x) for x in ch.states.T])
    body = dist >= delta * N
    if ch.truncated:
        body &= ~ch.face
    X = ch.states[:, body]
    ue = res.u[body]
    lw = np.array([eng.log_qsd(N, x, delta) for x in X.T])
    uw = np.exp(lw)
    lr = lw - np.log(ue)
    p_mode = int(np.argmax(res.u))
    mode = ch.states[:, p_mode]
    mode_lr = float(eng.log_qsd(N, mode, delta) - math.log(res.u[p_mode]))
    return ErrorProfile(X, ue, uw, lr, mode, mode_lr, float(np.max(np.abs(lr))),
                        float(uw.sum()), float(ue.sum()))
