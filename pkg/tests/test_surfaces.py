import configparser

import numpy as np
import pytest

from mustab.errors import ConfigurationError, DegenerateImmersionError
from mustab.surface_core import (build_grid, catalog, metric,
                                 patch_from_config, patch_from_expressions)


def test_catalog_names_resolve():
    for name in ("plane3", "plane4", "sphere_patch(1.5)", "enneper",
                 "clifford", "holograph_w2", "cmc_graph(0.25)"):
        assert catalog(name).n in (3, 4)


def test_unknown_surface():
    with pytest.raises(ConfigurationError):
        catalog("moebius")


def test_sphere_radius_must_cover_disc():
    with pytest.raises(ConfigurationError):
        catalog("sphere_patch(0.9)")
    with pytest.raises(ConfigurationError):
        catalog("cmc_graph(1.5)")


def test_plane_metric(grid64):
    met = metric(catalog("plane3"), grid64)
    assert np.nanmax(np.abs(met.g11 - 1)) < 1e-14
    assert np.nanmax(np.abs(met.g22 - 1)) < 1e-14
    assert np.nanmax(np.abs(met.g12)) < 1e-14
    assert np.nanmax(np.abs(met.W - 1)) < 1e-14
    assert met.max_conformality_defect < 1e-14


def test_clifford_metric(grid64):
    met = metric(catalog("clifford"), grid64)
    for comp, val in ((met.g11, 0.5), (met.g22, 0.5), (met.W, 0.5)):
        assert np.nanmax(np.abs(comp - val)) < 1e-14
    assert np.nanmax(np.abs(met.g12)) < 1e-14


def test_holograph_metric(grid64):
    g = grid64
    met = metric(catalog("holograph_w2"), g)
    s = g.U**2 + g.V**2
    expect = np.where(g.disc, 1.0 + 4.0 * s, np.nan)
    assert np.nanmax(np.abs(met.W - expect)) < 1e-12
    assert met.max_conformality_defect < 1e-13


def test_degenerate_immersion_reports_node():
    bad = patch_from_expressions(["u^2", "v", "0"], name="pinch")
    # odd resolution puts nodes exactly on the u = 0 rank-drop line
    with pytest.raises(DegenerateImmersionError) as err:
        metric(bad, build_grid(17))
    assert err.value.node is not None


def test_expression_parser_matches_catalog(grid64):
    custom = patch_from_expressions(
        ["u", "v", "u^2 - v^2", "2*u*v"], name="w2", is_graph=True,
        claims_conformal=True)
    ref = catalog("holograph_w2")
    u = np.array([0.3, -0.5, 0.1])
    v = np.array([0.2, 0.4, -0.7])
    assert np.allclose(custom.eval_X(u, v), ref.eval_X(u, v), atol=1e-14)
    assert np.allclose(custom.eval_dX(u, v), ref.eval_dX(u, v), atol=1e-14)
    assert np.allclose(custom.eval_d2X(u, v), ref.eval_d2X(u, v), atol=1e-14)


def test_expression_grammar_rejects_unknown_names():
    with pytest.raises(ConfigurationError):
        patch_from_expressions(["u", "v", "tan(u)"])
    with pytest.raises(ConfigurationError):
        patch_from_expressions(["u", "v", "__import__('os')"])


def test_expression_functions_allowed():
    p = patch_from_expressions(["u", "v", "sin(u)*exp(v) + sqrt(2)/2"])
    u = np.array([0.1])
    v = np.array([0.2])
    assert p.eval_X(u, v)[2, 0] == pytest.approx(
        np.sin(0.1) * np.exp(0.2) + np.sqrt(2) / 2)
    assert p.eval_dX(u, v)[2, 0, 0] == pytest.approx(
        np.cos(0.1) * np.exp(0.2))


def test_config_file_surface(tmp_path):
    cfg = tmp_path / "surf.cfg"
    cfg.write_text("""
[surface]
ambient_dim = 3
x1 = u
x2 = v
x3 = u*v
graph = true
""")
    parser = configparser.ConfigParser()
    parser.read(cfg)
    p = patch_from_config(parser, name="saddle")
    assert p.n == 3 and p.is_graph
    u, v = np.array([0.5]), np.array([0.25])
    assert p.eval_X(u, v)[2, 0] == pytest.approx(0.125)


def test_config_missing_component():
    parser = configparser.ConfigParser()
    parser.read_string("[surface]\nambient_dim = 3\nx1 = u\nx2 = v\n")
    with pytest.raises(ConfigurationError):
        patch_from_config(parser)


def test_fd_fallback_matches_analytic():
    ref = catalog("enneper")
    g = build_grid(64)
    fd = ref.with_fd_second_derivatives(g.h)
    u, v = g.U[g.interior], g.V[g.interior]
    err = np.abs(fd.eval_d2X(u, v) - ref.eval_d2X(u, v)).max()
    assert err < 1e-8   # 4th-order stencil on polynomials of low degree
