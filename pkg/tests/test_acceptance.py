"""The nine acceptance criteria, each at its stated tolerance.

Every test prints one ``CRITERION n: PASS|FAIL`` line (visible with or without
-s) and then asserts the same verdict.
"""
import itertools
import math

import numpy as np
from scipy import stats

from qsdkit import (catalog, engine, exact_qsd, gillespie_extinction, qsd_error_profile,
                    sigma_and_G, solve_D, tau_asymptotic)
from qsdkit.catalog import COMPETITION_DEFAULTS
from qsdkit.conditions import check_IRR, check_K0, check_K1
from qsdkit.errors import ParameterConstraintViolated
from qsdkit.extinction import (linear_asymptote, linear_balance_residual, linearized_constants,
                               log_lambda_normalizer, log_wkb_asymptote)
from qsdkit.model import halton_points
from qsdkit.wkb import PolyPath, hje_residual, transport_residual

import closed_forms as cf

CONFORMING = ("sis1d", "sis_hetero", "linear_birth_quadratic_death", "bc23_bd", "competition")


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_1_example1(capsys):
    m = catalog("sis_hetero", {"beta": 3, "mu": [1, 1], "alpha": [1, 0.5], "f": [0.5, 0.5]})
    got = tau_asymptotic(m, 50).log_tau
    ref = cf.ex1_log_tau(3, (1, 1), (1, 0.5), (0.5, 0.5), 50)
    rel = abs(got - ref) / abs(ref)
    verdict(capsys, 1, rel < 1e-8, f"log tau {got:.12g} vs closed form {ref:.12g}, rel {rel:.2e}")


def test_criterion_2_example2(capsys):
    k, lam, mu, kappa, N = 2, 1.0, 1.0, 1.0, 50
    r = tau_asymptotic(catalog("linear_birth_quadratic_death",
                               {"k": k, "lam": lam, "mu": mu, "kappa": kappa}), N)
    A = cf.ex2_A(k, lam, mu, kappa)
    pref = math.sqrt(2 * math.pi * mu * kappa / N) / (k * lam - mu) ** 2
    tau_ref_log = math.log(pref) + N * A
    rA = abs(r.A - A) / A
    rt = abs(r.log_tau - tau_ref_log) / tau_ref_log
    rK = abs(r.K / math.sqrt(N) - pref) / pref
    ok = max(rA, rt, rK) < 1e-8
    verdict(capsys, 2, ok, f"A rel {rA:.2e}, log tau rel {rt:.2e}, prefactor rel {rK:.2e}")


def test_criterion_3_competition_determinant(capsys):
    a = dict(COMPETITION_DEFAULTS)
    assert a["a1"] * a["a4"] * a["a5"] == a["a2"] * a["a3"] * a["a6"]
    S, _, _ = sigma_and_G(catalog("competition"))
    fd = float(np.linalg.det(S))
    ref = cf.det_competition(a, cf.competition_ystar(a))
    rel = abs(fd - ref) / abs(ref)
    verdict(capsys, 3, rel < 1e-6, f"det Sigma {fd:.12g} vs closed form {ref:.12g}, rel {rel:.2e}")


def test_criterion_4_exponent_convergence(capsys):
    m = catalog("sis1d", {"R0": 2})
    A = 0.1931472
    Ns = (40, 80, 160)
    taus = {N: exact_qsd(m, N).tau_exact for N in Ns}
    err = [abs(math.log(taus[N]) / N - A) for N in Ns]
    monotone = err[0] > err[1] > err[2]
    envelope = all(e < 2.5 / N * math.log(N) for e, N in zip(err, Ns))
    ratio = taus[160] / tau_asymptotic(m, 160).tau
    ok = monotone and envelope and 0.8 <= ratio <= 1.25
    verdict(capsys, 4, ok, f"|ln tau/N - A| = {[f'{e:.6f}' for e in err]} monotone={monotone} "
                           f"envelope={envelope}; tau_exact/tau_asym at 160 = {ratio:.4f}")


def test_criterion_5_qsd_body(capsys):
    p = qsd_error_profile(catalog("sis1d", {"R0": 2}), 100)
    x = p.states[0]
    body = (x >= 5) & (x <= 95)
    worst = float(np.max(np.abs(p.log_ratio[body])))
    mode = abs(p.mode_log_ratio)
    ok = worst <= 0.1 and mode <= 0.02
    verdict(capsys, 5, ok, f"max body |ln ratio| = {worst:.4f} (<= 0.1), "
                           f"at mode x={p.mode.tolist()} {mode:.4f} (<= 0.02)")


ORACLE_CASES = [("sis1d", {}, 30), ("sis_hetero", {}, 20), ("linear_birth_quadratic_death", {}, 15),
                ("bc23_bd", {}, 10), ("competition", {}, 6), ("competition", {"a5": 0, "a6": 0}, 6),
                ("nonrev2d", {}, 10)]


def test_criterion_6_exactness(capsys):
    worst_res, worst_route, lines = 0.0, 0.0, []
    for name, p, N in ORACLE_CASES:
        r = exact_qsd(catalog(name, p), N)
        assert r.chain.n <= 10**5
        worst_res = max(worst_res, r.residual)
        worst_route = max(worst_route, r.routes_rel_diff)
        lines.append(f"{name}{'(bd)' if p else ''}@N={N}: {r.routes_rel_diff:.1e}")
    ok = worst_res < 1e-10 and worst_route < 1e-10
    verdict(capsys, 6, ok, f"max QSD residual {worst_res:.1e}, max route gap {worst_route:.1e} "
                           f"[{'; '.join(lines)}]")


def test_criterion_7_property_suite(capsys):
    worst = {}

    def note(key, val):
        worst[key] = max(worst.get(key, 0.0), float(val))

    rng = np.random.default_rng(7)
    for name in CONFORMING:
        m = catalog(name)
        eng = engine(m)
        Y = halton_points(m.geom, 100)
        note("HJ", hje_residual(m, Y).max())
        note("transport", transport_residual(m, Y).max())
        s = eng.sigma()
        note("Sigma symmetry", s.symmetry_residual)
        note("Lyapunov", max(s.lyapunov_residual, s.lyapunov_inverse_residual))
        note("theta(y*)", np.max(np.abs(eng.field.theta(eng.ystar))))
        if m.k >= 2:
            pts = halton_points(m.geom, 6, margin_frac=0.05).T
            for y in pts:
                mid = pts[rng.integers(len(pts))] * 0.5 + y * 0.5 + 0.1
                if np.linalg.norm(mid - y) < 1e-6 or not m.geom.contains(mid):
                    continue
                v = eng.V(y)
                note("path independence", abs(eng.V(y, PolyPath([eng.ystar, mid, y])) - v)
                     / max(1.0, abs(v)))
    for name in ("sis_hetero", "linear_birth_quadratic_death", "bc23_bd"):
        m = catalog(name)
        b, d = linearized_constants(m)
        D = solve_D(b, d)
        note("linear balance", max(linear_balance_residual(b, d, D, x)
                                   for x in itertools.product(range(21), repeat=2)
                                   if 0 < sum(x) <= 20))
        N = 10**4
        lL = log_lambda_normalizer(m, N)
        for xi in ([0.5, 0.5], [0.2, 0.8], [0.8, 0.2], [0.35, 0.65], [0.9, 0.1]):
            xi = np.array(xi)
            gap = abs(linear_asymptote(b, d, lL, 100.0, xi) - log_wkb_asymptote(m, N, 100.0, xi))
            note("matching", math.expm1(gap))
    limits = {"HJ": 1e-8, "transport": 1e-6, "Sigma symmetry": 1e-8, "Lyapunov": 1e-8,
              "theta(y*)": 1e-10, "path independence": 1e-8, "linear balance": 1e-10,
              "matching": 0.02}
    bad = [k for k in limits if not worst.get(k, 0.0) < limits[k]]
    verdict(capsys, 7, not bad and len(worst) == len(limits),
            "; ".join(f"{k} {worst.get(k, float('nan')):.1e}" for k in limits))


def test_criterion_8_negative_controls(capsys):
    irr = check_IRR(catalog("nonrev2d"))
    comp = catalog("competition", {"eta": 0.5})
    k0, k1 = check_K0(comp), check_K1(comp)
    try:
        catalog("linear_birth_quadratic_death", {"k": 2, "lam": 0.5, "mu": 1.0})
        rejected = False
    except ParameterConstraintViolated:
        rejected = True
    ok = (irr.status == "fail" and irr.worst_residual > 1e-3 and k0.passed
          and k1.status == "fail" and rejected)
    verdict(capsys, 8, ok, f"nonrev2d IRR residual {irr.worst_residual:.3g}; competition eta=0.5 "
                           f"K1 {k1.status} ({k1.worst_residual:.3g}); k*lam <= mu rejected={rejected}")


def test_criterion_9_simulation(capsys):
    m = catalog("sis1d", {"R0": 2})
    r = exact_qsd(m, 25)
    s = gillespie_extinction(m, 25, init=r.u, replicates=10_000, seed=20240601)
    z = abs(s.mean - r.tau_exact) / s.se
    ks = stats.kstest(s.times, "expon", args=(0, r.tau_exact))
    ok = z < 3 and ks.pvalue > 0.01
    verdict(capsys, 9, ok, f"mean {s.mean:.4f} +- {s.se:.4f} vs tau {r.tau_exact:.4f} "
                           f"({z:.2f} SE); KS p = {ks.pvalue:.3f}")
