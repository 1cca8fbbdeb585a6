import numpy as np
import pytest

from qsdkit import catalog
from qsdkit.conditions import (check_all, check_IRR, check_IRR2, check_K0, check_K1,
                               fd_convergence_order, irr2_matrix, irr_matrix)
from qsdkit.model import halton_points

from conftest import PASSING


@pytest.mark.parametrize("name", PASSING + ("competition_bd",))
def test_catalog_models_pass_everything(models, name):
    reps = check_all(models[name])
    assert [r.status for r in reps if r.status == "fail"] == []
    for r in reps:
        if r.status == "pass":
            assert r.worst_residual < 1e-8


def test_bd_entries_not_applicable_for_swap_jumps(models):
    st = {r.id: r.status for r in check_all(models["competition"])}
    assert st["BD_IRR"] == st["LIN_K"] == "not_applicable"


def test_nonrev2d_fails_irr_with_witness(models):
    r = check_IRR(models["nonrev2d"])
    assert r.status == "fail" and r.worst_residual > 1e-3
    assert len(r.witness["y"]) == 2 and r.witness["pair"]
    assert check_IRR2(models["nonrev2d"]).passed


def test_competition_k0_needs_constant_constraint():
    m = catalog("competition", {"a5": 1.1}, strict=False)
    r = check_K0(m)
    assert r.status == "fail" and r.worst_residual > 1e-3


def test_competition_nonconstant_b3d3_fails_k1():
    m = catalog("competition", {"eta": 0.5})
    assert check_K0(m).passed and check_IRR(m).passed
    assert not check_K1(m).passed
    assert not check_IRR2(m).passed


def test_competition_bd_reduction_ignores_b3d3():
    m = catalog("competition", {"eta": 0.5, "a5": 0, "a6": 0})
    assert all(r.status != "fail" for r in check_all(m))


@pytest.mark.parametrize("name", ["sis_hetero", "bc23_bd", "competition"])
@pytest.mark.parametrize("fn", [irr_matrix, irr2_matrix])
def test_finite_difference_order_two(models, name, fn):
    m = models[name]
    Y = halton_points(m.geom, 16, margin_frac=0.1)
    orders, seq, kind = fd_convergence_order(fn, m, Y)
    assert np.median(orders) == pytest.approx(2.0, abs=0.3), (orders, seq, kind)


def test_residual_order_for_a_genuine_failure(models):
    # the asymmetry converges to a nonzero limit, so the residual does not shrink
    m = models["nonrev2d"]
    Y = halton_points(m.geom, 16, margin_frac=0.1)
    orders, seq, kind = fd_convergence_order(irr_matrix, m, Y)
    assert kind == "residual" and abs(orders[-1]) < 0.1
