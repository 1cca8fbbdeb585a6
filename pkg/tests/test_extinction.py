import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsdkit import catalog, engine, log_tau_limit, solve_D, tau_asymptotic, u_tilde
from qsdkit.catalog import COMPETITION_DEFAULTS
from qsdkit.errors import ConditionViolated, InvalidState, NoPositiveRoot, NotBirthDeath
from qsdkit.extinction import (D_residual, linear_asymptote, linear_balance_residual,
                               linearized_constants, log_lambda_normalizer, log_u_tilde,
                               log_wkb_asymptote)
from qsdkit.model import permute_coordinates

import closed_forms as cf

# fixed, seeded list of directions for the matching tests
XI = [np.array(v) for v in ([0.5, 0.5], [0.2, 0.8], [0.8, 0.2], [0.35, 0.65], [0.9, 0.1])]


def test_D_examples():
    assert solve_D([[2.0]], [1.0]) == pytest.approx(1.0, abs=1e-14)
    assert solve_D(np.ones((2, 2)), [1.0, 1.0]) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(NoPositiveRoot):
        solve_D([[1.0]], [1.0])
    with pytest.raises(NoPositiveRoot):
        solve_D(np.diag([0.5, 1.0]), [1.0, 2.0])


@given(st.lists(st.floats(0.1, 5.0), min_size=1, max_size=4),
       st.lists(st.floats(0.1, 5.0), min_size=4, max_size=4))
def test_D_root_properties(bii, d):
    d = d[:len(bii)]
    bii, d = np.array(bii), np.array(d)
    if np.sum(bii / d) <= 1.0 + 1e-9:
        with pytest.raises(NoPositiveRoot):
            solve_D(np.diag(bii), d)
        return
    D = solve_D(np.diag(bii), d)
    assert D > 0 and abs(D_residual(np.diag(bii), d, D)) < 1e-12
    # the left side is decreasing in D, so the root is unique
    assert np.sum(bii / (0.5 * D + d)) > 1 > np.sum(bii / (2 * D + d))


def test_u_tilde_k1():
    b, d, D, Lam = np.array([[2.0]]), np.array([1.0]), 1.0, 0.7
    assert u_tilde(b, d, D, Lam, [1]) == pytest.approx(Lam * 2 * (1 - 0.5), rel=1e-14)
    with pytest.raises(InvalidState):
        u_tilde(b, d, D, Lam, [0])


@pytest.mark.parametrize("name", ["sis_hetero", "linear_birth_quadratic_death", "bc23_bd"])
def test_linear_balance_small_states(name):
    b, d = linearized_constants(catalog(name))
    D = solve_D(b, d)
    worst = max(linear_balance_residual(b, d, D, x)
                for x in itertools.product(range(21), repeat=2) if 0 < sum(x) <= 20)
    assert worst < 1e-10


@given(st.lists(st.floats(0.2, 3.0), min_size=3, max_size=3),
       st.lists(st.floats(0.2, 3.0), min_size=3, max_size=3))
def test_linear_balance_k3(bii, d):
    bii, d = np.array(bii), np.array(d)
    if np.sum(bii / d) <= 1.05:
        return
    b = np.repeat(bii[:, None], 3, axis=1)  # b_ij = b_ii
    D = solve_D(b, d)
    for x in [(1, 0, 0), (0, 2, 1), (3, 3, 3), (7, 0, 5), (2, 9, 9)]:
        assert linear_balance_residual(b, d, D, x) < 1e-10


@pytest.mark.parametrize("name", ["linear_birth_quadratic_death", "bc23_bd"])
def test_linear_asymptote_at_400(name):
    b, d = linearized_constants(catalog(name))
    D = solve_D(b, d)
    xi = np.array([0.5, 0.5])
    x = (400 * xi).astype(int)
    assert abs(log_u_tilde(b, d, D, x) - linear_asymptote(b, d, 0.0, 400, xi)) < math.log(1.01)


@pytest.mark.parametrize("name", ["linear_birth_quadratic_death", "bc23_bd", "sis_hetero"])
def test_matching_formulas(name):
    m = catalog(name)
    b, d = linearized_constants(m)
    N = 10**4
    lL = log_lambda_normalizer(m, N)
    for xi in XI:
        xh = math.sqrt(N)
        assert abs(linear_asymptote(b, d, lL, xh, xi) - log_wkb_asymptote(m, N, xh, xi)) \
            < math.log(1.02)


@pytest.mark.parametrize("name", ["linear_birth_quadratic_death", "bc23_bd", "sis_hetero"])
def test_matching_against_wkb_body(name):
    # u~ scaled by Lambda against the WKB body evaluated by the engine, inside the
    # overlap 1 << sum(x) << sqrt(N)
    m = catalog(name)
    b, d = linearized_constants(m)
    D = solve_D(b, d)
    N, xh = 10**6, 100
    lL = log_lambda_normalizer(m, N)
    for xi in XI:
        x = np.rint(xh * xi).astype(int)
        body = engine(m).log_qsd(N, x, delta=1e-9, crosscheck=False)
        assert abs(body - log_u_tilde(b, d, D, x, lL)) < math.log(1.02)


def test_sis1d_tau_and_lambda():
    m = catalog("sis1d")
    r = tau_asymptotic(m, 100)
    assert r.D == pytest.approx(1.0, abs=1e-14)
    assert r.log_tau == pytest.approx(cf.sis1d_log_tau(2.0, 100), rel=1e-12)
    assert r.tau == pytest.approx(0.501326 * math.exp(19.31472), rel=1e-5)
    lam = 0.5 * math.log(100 * 2 / (2 * math.pi) * 0.25 / 2) - 100 * cf.sis1d_A(2.0)
    assert r.log_Lambda == pytest.approx(lam, rel=1e-12)


@pytest.mark.parametrize("R0,N", [(1.5, 40), (2.0, 10), (3.0, 200)])
def test_sis1d_closed_form(R0, N):
    r = tau_asymptotic(catalog("sis1d", {"R0": R0}), N)
    assert r.log_tau == pytest.approx(cf.sis1d_log_tau(R0, N), rel=1e-10)


def test_example1_closed_form():
    m = catalog("sis_hetero", {"beta": 3, "mu": [1, 1], "alpha": [1, 0.5], "f": [0.5, 0.5]})
    got = tau_asymptotic(m, 50).log_tau
    assert got == pytest.approx(cf.ex1_log_tau(3, (1, 1), (1, 0.5), (0.5, 0.5), 50), rel=1e-8)


def test_example1_k3_closed_form():
    p = {"k": 3, "beta": 2.5, "mu": [1.0, 0.7, 1.3], "alpha": [1.0, 0.5, 0.8], "f": [0.2, 0.3, 0.5]}
    got = tau_asymptotic(catalog("sis_hetero", p), 60).log_tau
    assert got == pytest.approx(cf.ex1_log_tau(2.5, p["mu"], p["alpha"], p["f"], 60), rel=1e-8)


@pytest.mark.parametrize("lam,mu,kappa", [(1, 1, 1), (1.5, 1, 0.5), (0.8, 1.2, 2.0)])
def test_example2_closed_form(lam, mu, kappa):
    m = catalog("linear_birth_quadratic_death", {"lam": lam, "mu": mu, "kappa": kappa})
    r = tau_asymptotic(m, 50)
    assert r.A == pytest.approx(cf.ex2_A(2, lam, mu, kappa), rel=1e-10)
    assert r.log_tau == pytest.approx(cf.ex2_log_tau(2, lam, mu, kappa, 50), rel=1e-8)


@pytest.mark.parametrize("p", [
    dict(lam=(1.5, 1.0), mu=(1.0, 0.8), kappa=0.5, nu=0.2, c=0.3),
    dict(lam=(0.7, 0.6, 0.9), mu=(1.0, 1.1, 0.6), kappa=0.3, nu=0.5, c=0.1),
])
def test_example3_closed_form(p):
    m = catalog("bc23_bd", {**p, "k": len(p["lam"])})
    got = tau_asymptotic(m, 50).log_tau
    assert got == pytest.approx(cf.ex3_log_tau(*cf.bc23_functions(**p), cf.bc23_ystar(**p), 50),
                                rel=1e-8)


@pytest.mark.parametrize("extra", [{}, {"eta": 0.5}, {"a1": 1.3, "a4": 0.7, "gamma": 0.1}])
def test_competition_bd_closed_form(extra):
    a = dict(COMPETITION_DEFAULTS, a5=0.0, a6=0.0, **extra)
    got = tau_asymptotic(catalog("competition", a), 40).log_tau
    assert got == pytest.approx(cf.competition_bd_log_tau(a, 40), rel=1e-8)


def test_competition_full_exponent_only():
    m = catalog("competition")
    a = dict(COMPETITION_DEFAULTS)
    assert log_tau_limit(m) == pytest.approx(
        cf.V_competition(a, (0.0, 0.0), cf.competition_ystar(a)), abs=1e-8)
    with pytest.raises(NotBirthDeath):
        tau_asymptotic(m, 20)


def test_conditions_gate_the_formula():
    with pytest.raises(ConditionViolated):
        tau_asymptotic(catalog("nonrev2d"), 20)


@pytest.mark.parametrize("p", [
    {"k": 2, "alpha": [1.0, 0.5], "mu": [1.0, 1.5]},
    {"k": 3, "beta": 2.5, "mu": [1.0, 0.7, 1.3], "alpha": [1.0, 0.5, 0.8], "f": [0.2, 0.3, 0.5]},
])
def test_permutation_invariance(p):
    m = catalog("sis_hetero", p)
    base = tau_asymptotic(m, 40)
    for perm in itertools.permutations(range(m.k)):
        r = tau_asymptotic(permute_coordinates(m, perm), 40)
        assert abs(r.log_tau - base.log_tau) < 1e-8


def test_permutation_invariance_bc23_k3():
    m = catalog("bc23_bd", {"k": 3, "lam": [0.7, 0.6, 0.9], "mu": [1.0, 1.1, 0.6]})
    base = tau_asymptotic(m, 30).log_tau
    for perm in itertools.permutations(range(3)):
        assert abs(tau_asymptotic(permute_coordinates(m, perm), 30).log_tau - base) < 1e-8


def test_K_independent_of_N():
    m = catalog("bc23_bd")
    Ks = [tau_asymptotic(m, N).K for N in (10, 100, 1000, 10**5)]
    assert np.ptp(Ks) < 1e-8 * Ks[0]


def test_huge_N_stays_finite_in_logs():
    r = tau_asymptotic(catalog("sis1d"), 10**6)
    assert math.isinf(r.tau) and math.isfinite(r.log_tau)
    assert "tau" not in r.to_dict() and r.to_dict()["tau_log10"] > 300
