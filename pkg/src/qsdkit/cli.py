"""Command-line front end.

    qsdkit <command> MODEL [--N ...] [--<param> value ...]

MODEL is a catalog name or a JSON model file.  Any unrecognised ``--name value``
pair is taken as a model parameter; ``--params-file`` reads them from JSON.
Exit codes: 0 ok, 1 bad input, 2 a condition or assumption fails, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import conditions, oracle
from .catalog import CATALOG, catalog
from .deterministic import find_equilibria
from .errors import ConfigError, QsdkitError, StateSpaceTooLarge
from .extinction import log_tau_limit, tau_asymptotic
from .model import ModelSpec, model_from_dict, validate_model
from .wkb import DEFAULT_DELTA, engine

COMMANDS = ("check", "equilibria", "potential", "qsd-approx", "tau", "oracle", "simulate", "compare")
NON_BD_NOTE = "prefactor unavailable: non-BD jump set"


@dataclass
class RunConfig:
    command: str
    model: str
    params: dict = field(default_factory=dict)
    N: list = field(default_factory=list)
    tol: float = conditions.DEFAULT_TOL
    samples: int = conditions.DEFAULT_SAMPLES
    seed: Optional[int] = 0
    out: Optional[str] = None
    format: str = "json"
    reps: int = 0
    y: Optional[list] = None
    x: Optional[list] = None
    truncate: Optional[list] = None
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if any(n < 1 for n in self.N):
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if self.tol <= 0 or self.delta <= 0:
            raise ConfigError("tolerances must be positive")
        if self.command in ("simulate", "compare") and self.reps > 0 and self.seed is None:
            raise ConfigError("a seed is required for simulation")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")


# --- model resolution ----------------------------------------------------------------

def _number(s):
    if "," in s:
        return [_number(t) for t in s.split(",") if t]
    try:
        return int(s)
    except ValueError:
        try:
            return float(s)
        except ValueError as exc:
            raise ConfigError(f"parameter value {s!r} is not a number") from exc


def extra_params(tokens):
    """['--R0', '2', '--mu', '1,2'] -> {'R0': 2, 'mu': [1, 2]}"""
    out = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        name = tok[2:]
        if "=" in name:
            name, val = name.split("=", 1)
        else:
            try:
                val = next(it)
            except StopIteration:
                raise ConfigError(f"parameter --{name} needs a value") from None
        out[name] = _number(val)
    return out


def resolve_model(spec: str, params: dict) -> ModelSpec:
    if spec in CATALOG:
        return catalog(spec, params)
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"{spec!r} is neither a catalog model ({', '.join(sorted(CATALOG))}) "
                          f"nor a file")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{spec}: invalid JSON ({exc})") from exc
    if "catalog" in d:
        return catalog(d["catalog"], {**d.get("params", {}), **params})
    d = dict(d)
    d["params"] = {**d.get("params", {}), **{k: float(v) for k, v in params.items()}}
    return model_from_dict(d)


# --- commands --------------------------------------------------------------------------

def _require_N(cfg, single=False):
    if not cfg.N:
        raise ConfigError(f"{cfg.command} needs --N")
    if single and len(cfg.N) != 1:
        raise ConfigError(f"{cfg.command} takes a single N")
    return cfg.N


def cmd_check(m, cfg):
    val = validate_model(m, samples=cfg.samples)
    reps = conditions.check_all(m, cfg.samples, cfg.tol)
    failed = [r.id for r in reps if r.status == "fail"]
    payload = {"model": m.label, "validation": val.to_dict(),
               "conditions": [r.to_dict() for r in reps], "failed": failed}
    rows = [[r.id, r.status, r.worst_residual, json.dumps(r.witness)] for r in reps]
    summary = "\n".join(f"{r.id:10s} {r.status:15s} residual {r.worst_residual:.3e}"
                        + (f"  witness {r.witness}" if r.witness else "") for r in reps)
    code = 2 if failed or not val.ok else 0
    return payload, (["id", "status", "worst_residual", "witness"], rows), summary, code


def cmd_equilibria(m, cfg):
    eq = find_equilibria(m)
    d = eq.to_dict()
    rows = [[i + 1, y] for i, y in enumerate(eq.y_star)]
    return d, (["i", "y_star"], rows), f"y* = {eq.y_star.tolist()}", 0


def cmd_potential(m, cfg):
    if cfg.y is None:
        raise ConfigError("potential needs --y")
    y = np.asarray(cfg.y, dtype=float).ravel()
    if y.shape != (m.k,):
        raise ConfigError(f"--y needs {m.k} components")
    N = cfg.N[0] if cfg.N else None
    p = engine(m).potential(y, N)
    d = {"y": y.tolist(), "V": p.V, "V0": p.V0, "Sigma": p.Sigma.tolist(), "G": p.G.tolist(),
         "M_N": p.M_N, "N": N, "path": [v.tolist() for v in p.path.vertices],
         "v0_crosscheck": p.v0_crosscheck, "notes": p.notes}
    rows = [[*y.tolist(), p.V, p.V0]]
    cols = [f"y{i + 1}" for i in range(m.k)] + ["V", "V0"]
    return d, (cols, rows), f"V = {p.V:.10g}, V0 = {p.V0}", 0


def cmd_qsd_approx(m, cfg):
    (N,) = _require_N(cfg, single=True)
    eng = engine(m)
    if cfg.x is not None:
        X = [np.asarray(cfg.x, dtype=int).ravel()]
    else:
        X = [x for x in oracle.TruncatedChain(m, N, cfg.truncate).states.T
             if eng.state_boundary_distance(N, x) >= cfg.delta * N]
    rows = []
    for x in X:
        lu = eng.log_qsd(N, x, cfg.delta)
        rows.append([*x.tolist(), lu, math.exp(lu)])
    cols = [f"x{i + 1}" for i in range(m.k)] + ["log_u_wkb", "u_wkb"]
    d = {"N": N, "states": [r[:m.k] for r in rows], "log_u_wkb": [r[m.k] for r in rows]}
    return d, (cols, rows), f"{len(rows)} body states evaluated", 0


def tau_record(m, N):
    """tau for one N: the full formula for BD models, the exponent A otherwise."""
    if m.is_birth_death:
        return tau_asymptotic(m, N).to_dict()
    return {"N": N, "A": log_tau_limit(m), "note": NON_BD_NOTE}


def cmd_tau(m, cfg):
    Ns = _require_N(cfg) if m.is_birth_death else (cfg.N or [None])
    recs = [tau_record(m, N) for N in Ns]
    keys = sorted({k for r in recs for k in r if not isinstance(r[k], list)})
    rows = [[r.get(k) for k in keys] for r in recs]
    d = recs[0] if len(recs) == 1 else {"rows": recs}
    summ = "\n".join(f"N={r['N']}: A = {r['A']:.10g}" +
                     (f", log10 tau = {r['tau_log10']:.6f}" if "tau_log10" in r else f" ({r['note']})")
                     for r in recs)
    return d, (keys, rows), summ, 0


def cmd_oracle(m, cfg):
    (N,) = _require_N(cfg, single=True)
    r = oracle.exact_qsd(m, N, cfg.truncate)
    d = r.to_dict()
    cols = [f"x{i + 1}" for i in range(m.k)] + ["u"]
    rows = [[*x.tolist(), u] for x, u in zip(r.chain.states.T, r.u)]
    return d, (cols, rows), f"tau = {r.tau_exact:.10g} ({r.chain.n} states)", 0


def cmd_simulate(m, cfg):
    (N,) = _require_N(cfg, single=True)
    s = oracle.gillespie_extinction(m, N, "qsd", max(cfg.reps, 1), cfg.seed, cfg.truncate)
    d = s.to_dict()
    rows = [[t] for t in s.times]
    return d, (["extinction_time"], rows), f"mean {s.mean:.6g} +- {s.se:.3g} ({s.replicates} runs)", 0


@dataclass
class CompareReport:
    rows: list

    COLUMNS = ("N", "A", "K", "tau_asymptotic_log", "tau_exact_log", "log_tau_over_N",
               "sim_mean", "sim_se", "ratio")

    def to_dict(self):
        return {"columns": list(self.COLUMNS), "rows": self.rows}


def compare(m, Ns, reps=0, seed=0, truncation=None) -> CompareReport:
    rows = []
    for N in sorted(Ns):
        row = dict.fromkeys(CompareReport.COLUMNS)
        row["N"] = N
        if m.is_birth_death:
            t = tau_asymptotic(m, N)
            row.update(A=t.A, K=t.K, tau_asymptotic_log=t.log_tau)
        else:
            row["A"] = log_tau_limit(m)
        try:
            r = oracle.exact_qsd(m, N, truncation)
        except StateSpaceTooLarge:
            r = None
        if r is not None:
            row["tau_exact_log"] = math.log(r.tau_exact)
            row["log_tau_over_N"] = math.log(r.tau_exact) / N
            if row["tau_asymptotic_log"] is not None:
                row["ratio"] = math.exp(row["tau_asymptotic_log"] - row["tau_exact_log"])
            if reps > 0:
                s = oracle.gillespie_extinction(m, N, r.u, reps, seed, truncation)
                row.update(sim_mean=s.mean, sim_se=s.se)
        rows.append(row)
    return CompareReport(rows)


def cmd_compare(m, cfg):
    rep = compare(m, _require_N(cfg), cfg.reps, cfg.seed, cfg.truncate)
    cols = list(CompareReport.COLUMNS)
    rows = [[r[c] for c in cols] for r in rep.rows]
    lines = ["   N   ratio(asym/exact)   ln(tau)/N        A"]
    for r in rep.rows:
        ratio = "n/a" if r["ratio"] is None else f"{r['ratio']:.6f}"
        ltn = "n/a" if r["log_tau_over_N"] is None else f"{r['log_tau_over_N']:.6f}"
        lines.append(f"{r['N']:4d}   {ratio:>17s}   {ltn:>9s}   {r['A']:.6f}")
    return rep.to_dict(), (cols, rows), "\n".join(lines), 0


HANDLERS = {"check": cmd_check, "equilibria": cmd_equilibria, "potential": cmd_potential,
            "qsd-approx": cmd_qsd_approx, "tau": cmd_tau, "oracle": cmd_oracle,
            "simulate": cmd_simulate, "compare": cmd_compare}


# --- output ----------------------------------------------------------------------------

def _plain(o):
    if isinstance(o, dict):
        return {str(k): _plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_plain(v) for v in o]
    if isinstance(o, np.ndarray):
        return _plain(o.tolist())
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if math.isfinite(v) else str(v)
    return o


def to_json(payload):
    return json.dumps(_plain(payload), sort_keys=True, indent=2) + "\n"


def to_csv(cols, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if v is None else (format(v, ".17g") if isinstance(v, (float, np.floating))
                                         else v) for v in r])
    return buf.getvalue()


def emit(cfg, payload, table, summary, stdout=None):
    stdout = stdout or sys.stdout
    text = to_json(payload) if cfg.format == "json" else to_csv(*table)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        stem = cfg.command.replace("-", "_")
        (out / f"{stem}.{cfg.format}").write_text(text)
        (out / f"{stem}_summary.txt").write_text(summary + "\n")
        print(summary, file=stdout)
    else:
        stdout.write(text)
        print(summary, file=sys.stderr)


# --- argument parsing -------------------------------------------------------------------

def _floats(s):
    return [float(t) for t in s.split(",") if t]


def _ints(s):
    return [int(t) for t in s.split(",") if t]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--tol", type=float, default=conditions.DEFAULT_TOL,
                   help="pass/fail tolerance for condition residuals (default: %(default)g)")
    g.add_argument("--samples", type=int, default=conditions.DEFAULT_SAMPLES,
                   help="Halton sample points for condition checks (default: %(default)s)")
    g.add_argument("--seed", type=int, default=0, help="simulation seed (default: %(default)s)")
    g.add_argument("--out", default=None,
                   help="directory for output files (default: write to stdout)")
    g.add_argument("--format", choices=("json", "csv"), default="json",
                   help="output format (default: %(default)s)")
    g.add_argument("--params-file", default=None, help="JSON file of model parameters")
    g.add_argument("--N", type=_ints, default=[], help="system size(s), comma separated")

    p = argparse.ArgumentParser(prog="qsdkit", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "check": "validate model assumptions and the asymptotic Kolmogorov conditions",
        "equilibria": "interior equilibrium y* and stability data",
        "potential": "quasipotential V, V0, Sigma, G at a point",
        "qsd-approx": "WKB approximation of the QSD on body states",
        "tau": "asymptotic mean extinction time (A only for non-BD jump sets)",
        "oracle": "exact QSD and tau of the (truncated) finite chain",
        "simulate": "Gillespie extinction times started from the exact QSD",
        "compare": "asymptotic vs exact vs simulated tau across N",
    }
    for name in COMMANDS:
        sp_ = sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
        sp_.add_argument("model", help="catalog name or path to a JSON model file")
        if name == "potential":
            sp_.add_argument("--y", type=_floats, required=True, help="point y, comma separated")
        if name == "qsd-approx":
            sp_.add_argument("--x", type=_ints, default=None,
                             help="single state (default: all body states)")
            sp_.add_argument("--delta", type=float, default=DEFAULT_DELTA,
                             help="body margin as a fraction of N (default: %(default)s)")
        if name in ("qsd-approx", "oracle", "simulate", "compare"):
            sp_.add_argument("--truncate", type=_ints, default=None,
                             help="per-axis truncation for lattice models "
                                  "(default: ceil(6 N y*_i + 10 sqrt(N)))")
        if name in ("simulate", "compare"):
            sp_.add_argument("--reps", type=int, default=1000 if name == "simulate" else 0,
                             help="replicates (default: %(default)s)")
    return p


def parse_config(argv):
    parser = build_parser()
    ns, extra = parser.parse_known_args(argv)
    params = {}
    if ns.params_file:
        try:
            params.update(json.loads(Path(ns.params_file).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read parameters from {ns.params_file}: {exc}") from exc
    params.update(extra_params(extra))
    return RunConfig(command=ns.command, model=ns.model, params=params, N=ns.N, tol=ns.tol,
                     samples=ns.samples, seed=ns.seed, out=ns.out, format=ns.format,
                     reps=getattr(ns, "reps", 0), y=getattr(ns, "y", None),
                     x=getattr(ns, "x", None), truncate=getattr(ns, "truncate", None),
                     delta=getattr(ns, "delta", DEFAULT_DELTA))


def run(cfg: RunConfig, stdout=None) -> int:
    m = resolve_model(cfg.model, cfg.params)
    if cfg.command == "tau":
        # the exponent needs K0 and IRR; the BD prefactor needs the rest as well
        needed = None if m.is_birth_death else ("K0", "IRR")
        failed = [r for r in conditions.check_all(m, cfg.samples, cfg.tol)
                  if r.status == "fail" and (needed is None or r.id in needed)]
        if failed:
            r = failed[0]
            print(f"condition {r.id} fails (residual {r.worst_residual:.3g}, witness {r.witness})",
                  file=sys.stderr)
            return 2
    payload, table, summary, code = HANDLERS[cfg.command](m, cfg)
    emit(cfg, payload, table, summary, stdout)
    return code


def main(argv=None):
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return run(cfg)
    except QsdkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
