import numpy as np
import pytest

from conftest import cached_analysis
from mustab.errors import PreconditionError
from mustab.hopf import (curvature_identity_residual, gauss_zero_count,
                         hopf_aggregate, hopf_equation_residual, hopf_field,
                         holomorphy_defect, wirtinger)
from mustab.surface_core import build_grid, catalog
from mustab.surface_core.grid import convergence_order, interior_max


def test_wirtinger_basic(grid64):
    g = grid64
    w = g.U + 1j * g.V
    dw, dwb = wirtinger(w, g)
    assert interior_max(np.abs(dw - 1.0), g) < 1e-13
    assert interior_max(np.abs(dwb), g) < 1e-13
    dw, dwb = wirtinger(np.conj(w), g)
    assert interior_max(np.abs(dw), g) < 1e-13
    assert interior_max(np.abs(dwb - 1.0), g) < 1e-13
    dw, dwb = wirtinger(w ** 2, g)
    assert interior_max(np.abs(dw - 2.0 * w), g) < 1e-12


def test_wirtinger_product_rule(grid64, rng):
    g = grid64
    w = g.U + 1j * g.V
    for _ in range(5):
        ca = rng.normal(size=4) + 1j * rng.normal(size=4)
        cb = rng.normal(size=4) + 1j * rng.normal(size=4)
        A = ca[0] + ca[1] * w + ca[2] * np.conj(w) + ca[3] * w * np.conj(w)
        B = cb[0] + cb[1] * w + cb[2] * np.conj(w) + cb[3] * w * np.conj(w)
        _, dAB = wirtinger(A * B, g)
        _, dA = wirtinger(A, g)
        _, dB = wirtinger(B, g)
        assert interior_max(np.abs(dAB - (dA * B + A * dB)), g) < 1e-10


def test_hopf_values(grid64):
    a = cached_analysis("plane3", 64)
    assert np.nanmax(np.abs(hopf_field(a.shape).values)) == 0.0

    a = cached_analysis("clifford", 64, frame_kind="preferred")
    hv = hopf_field(a.shape).values
    d = grid64.disc
    assert np.abs(hv[0][d] + 1.0).max() < 1e-13
    assert np.abs(hv[1][d]).max() < 1e-13

    a = cached_analysis("enneper", 64)
    hv = hopf_field(a.shape).values
    assert np.abs(hv[0][d] - 4.0).max() < 1e-12


def test_sphere_center_umbilic():
    g = build_grid(65)
    a = cached_analysis("sphere_patch(2)", 65)
    hv = hopf_field(a.shape).values
    assert abs(hv[0, 32, 32]) < 1e-12


def test_hopf_equation_residual_converges():
    reports = []
    hs = []
    for res in (64, 128):
        a = cached_analysis("holograph_w2", res)
        hf = hopf_field(a.shape)
        reports.append(hopf_equation_residual(
            hf, a.shape, a.torsion, a.curv, a.metric, a.patch, a.grid))
        hs.append(a.grid.h)
    order = convergence_order(reports[0].max_abs, reports[1].max_abs, *hs)
    assert order > 1.9


def test_hopf_equation_clifford_floor(grid64):
    a = cached_analysis("clifford", 64, frame_kind="preferred")
    rep = hopf_equation_residual(hopf_field(a.shape), a.shape, a.torsion,
                                 a.curv, a.metric, a.patch, grid64)
    assert rep.max_abs < 1e-12


def test_hopf_equation_requires_conformal(grid64):
    a = cached_analysis("sphere_patch(2)", 64)
    with pytest.raises(PreconditionError, match="conformal"):
        hopf_equation_residual(hopf_field(a.shape), a.shape, a.torsion,
                               a.curv, a.metric, a.patch, grid64)


def test_holomorphy_defects(grid64):
    a = cached_analysis("enneper", 64)
    res = holomorphy_defect(hopf_field(a.shape), grid64)
    assert res["defect"] < 1e-10 and res["certifies"]

    a = cached_analysis("clifford", 64, frame_kind="preferred")
    res = holomorphy_defect(hopf_field(a.shape), grid64, minimal=False)
    assert res["defect"] < 1e-12 and not res["certifies"]

    a = cached_analysis("plane3", 64)
    res = holomorphy_defect(hopf_field(a.shape), grid64)
    assert res["defect"] == 0.0


def test_curvature_identity(grid64):
    for name in ("plane3", "enneper", "holograph_w2"):
        a = cached_analysis(name, 64)
        per, agg = curvature_identity_residual(hopf_field(a.shape), a.curv,
                                               a.metric, grid64)
        assert per.max_abs < 1e-9
        assert agg.max_abs < 1e-9


def test_curvature_identity_requires_minimal(grid64):
    a = cached_analysis("clifford", 64, frame_kind="preferred")
    with pytest.raises(PreconditionError, match="minimal"):
        curvature_identity_residual(hopf_field(a.shape), a.curv, a.metric,
                                    grid64)


def test_identity_defect_equals_mean_curvature_square(grid64):
    # algebraic cross-check in conformal parameters:
    # |H_s|^2 - 4(-K_s)W^2 = (L11+L22)^2 = 4 H_s^2 W^2, also when H_s != 0
    a = cached_analysis("clifford", 64, frame_kind="preferred")
    hv = hopf_field(a.shape).values
    W2 = a.metric.W ** 2
    d = grid64.disc
    for s in range(2):
        defect = np.abs(hv[s]) ** 2 - 4.0 * (-a.curv.K_sigma[s]) * W2
        expect = 4.0 * a.curv.H_sigma[s] ** 2 * W2
        assert np.abs(defect[d] - expect[d]).max() < 1e-10


def test_zero_counts():
    g = build_grid(128)
    for name, expect in (("enneper", 0), ("holograph_w2", 0)):
        a = cached_analysis(name, 128)
        assert gauss_zero_count(hopf_field(a.shape), g) == expect
    a = cached_analysis("plane3", 128)
    assert gauss_zero_count(hopf_field(a.shape), g) == -1


def test_zero_count_finds_isolated_zero():
    # graph of w^3: the Hopf aggregate vanishes exactly at the origin
    from mustab.surface_core import patch_from_expressions, analyze
    g = build_grid(129)   # odd: a node sits at the origin
    p = patch_from_expressions(
        ["u", "v", "u^3 - 3*u*v^2", "3*u^2*v - v^3"], name="w3",
        is_graph=True, claims_conformal=True)
    a = analyze(p, g)
    assert gauss_zero_count(hopf_field(a.shape), g) == 1


def test_brute_force_scan_oracle_holograph():
    # independent confirmation that the aggregate never vanishes: closed
    # form gives sum_s |H_s|^2 = 32/W on the w^2 graph
    g = build_grid(128)
    a = cached_analysis("holograph_w2", 128)
    agg = hopf_aggregate(hopf_field(a.shape))
    W = a.metric.W
    d = g.disc
    assert np.abs(agg[d] - 32.0 / W[d]).max() < 1e-10
    assert agg[d].min() > 32.0 / 5.0 - 1e-6
