"""Acceptance suite: one test (or test group) per criterion.

Each criterion prints a PASS/FAIL line (run with ``pytest -s`` to see them
inline).  Three sub-criteria ask for a torsion-free normal frame on the
holomorphic graph surface; that surface's normal bundle is provably non-flat
(its shape operators do not commute), so no such frame exists and the
corresponding tests are marked as strict expected failures with the measured
holonomy defect in the report rather than being silently weakened.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.special import jn_zeros

from conftest import cached_analysis
from mustab.errors import NonFlatBundleError, PreconditionError
from mustab.compatibility import residual_suite
from mustab.hopf import (curvature_identity_residual, hopf_equation_residual,
                         hopf_field, holomorphy_defect)
from mustab.stability import (GraphBounds, barbosa_docarmo_certificate,
                              cap_eigenvalue, chi_pde_residual,
                              conformal_gauss_curvature, graph_mu_bound,
                              mu_stability_check, total_curvature_Q,
                              weighted_first_eigenvalue)
from mustab.surface_core import (build_grid, catalog, parallel_frame,
                                 total_torsion, analyze)
from mustab.surface_core.grid import convergence_order
from mustab.variation import (area_element_second_derivative_stencil,
                              bump_radial, bump_tensor, direction_angle,
                              direction_constant, fd_variation_oracle,
                              second_variation_area_element,
                              second_variation_fermat, weight_const,
                              weight_preset)

ALL_SURFACES = ("plane3", "plane4", "sphere_patch(2)", "enneper", "clifford",
                "holograph_w2", "cmc_graph(0.5)")
RESOLUTIONS = (64, 128, 256)
ORDER_FLOOR = 1e-8          # residuals below this sit at the roundoff floor
NONCONFORMAL = {"sphere_patch(2)", "cmc_graph(0.5)"}


def report(cid, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    line = f"ACCEPTANCE {cid}: {status} {detail}"
    print(line)
    import conftest
    conftest.ACCEPTANCE_LINES.append(line)
    return ok


# ----------------------------------------------------------------------------
# criterion 1: structural-identity suite
# ----------------------------------------------------------------------------

def test_criterion_1_structural_identities():
    # timed cold: every analysis is computed inside this test
    t0 = time.time()
    failures = []
    grids = {res: build_grid(res) for res in RESOLUTIONS}
    for name in ALL_SURFACES:
        suites = {}
        hs = {}
        for res in RESOLUTIONS:
            a = analyze(catalog(name), grids[res], with_christoffel=True)
            suites[res] = residual_suite(a)
            hs[res] = a.grid.h
        for key in ("gauss", "weingarten", "codazzi", "ricci"):
            reps = [suites[r][key] for r in RESOLUTIONS]
            if any(isinstance(r, PreconditionError) for r in reps):
                # the conformal-parameter identity is inapplicable on
                # non-conformal patches and must say so
                if name in NONCONFORMAL and key == "codazzi":
                    continue
                failures.append(f"{name}/{key}: unexpected precondition")
                continue
            finest = reps[-1]
            if finest.max_abs >= 1e-5:
                failures.append(
                    f"{name}/{key}: max {finest.max_abs:.2e} at 256")
            for (ra, rb, h_a, h_b) in zip(
                    reps, reps[1:],
                    [hs[r] for r in RESOLUTIONS],
                    [hs[r] for r in RESOLUTIONS[1:]]):
                order = convergence_order(ra.max_abs, rb.max_abs, h_a, h_b)
                if order < 1.9 and rb.max_abs >= ORDER_FLOOR:
                    failures.append(
                        f"{name}/{key}: order {order:.2f} "
                        f"({ra.max_abs:.1e} -> {rb.max_abs:.1e})")
    elapsed = time.time() - t0
    if elapsed >= 60.0:
        failures.append(f"runtime {elapsed:.1f}s >= 60s")
    ok = report("1 (structural identities, 7 surfaces x {64,128,256})",
                not failures, f"[{elapsed:.1f}s] " + "; ".join(failures))
    assert ok, failures


# ----------------------------------------------------------------------------
# criteria 2 and 3: second-variation oracle agreement
# ----------------------------------------------------------------------------

def _variation_cases(rng, count=24):
    """Randomized (surface, frame, weight, direction, phi, mode) tuples.

    The closed-form evaluator in its printed form presumes a critical
    configuration; samples that are not critical for their weight carry the
    exact off-critical correction (mode 'general').
    """
    surfaces = ("enneper", "clifford", "holograph_w2")
    cases = []
    while len(cases) < count:
        name = surfaces[rng.integers(len(surfaces))]
        frame_kind = "preferred" if name == "clifford" else "gram_schmidt"
        wname = ("const", "exp_x3")[rng.integers(2)]
        weight = weight_preset(wname)
        a = cached_analysis(name, 96, frame_kind=frame_kind)
        nn = a.frame.count
        if nn == 1:
            direction = direction_constant([1.0 if rng.random() < 0.5
                                            else -1.0])
        elif rng.random() < 0.5:
            vec = rng.normal(size=nn)
            direction = direction_constant(vec)
        else:
            direction = direction_angle(*rng.normal(size=3) * 0.8, count=nn)
        if rng.random() < 0.5:
            phi = bump_radial(rho=0.4 + 0.45 * rng.random(),
                              amplitude=0.5 + 1.5 * rng.random())
        else:
            phi = bump_tensor(rho=0.4 + 0.45 * rng.random(),
                              amplitude=0.5 + 1.5 * rng.random())
        critical = wname == "const" and name in ("enneper", "holograph_w2")
        mode = "printed" if critical else "general"
        cases.append((name, frame_kind, weight, direction, phi, mode))
    return cases


def test_criterion_2_second_variation_oracle(rng):
    t0 = time.time()
    grid = build_grid(96)
    worst = 0.0
    cases = _variation_cases(rng)
    for name, fk, weight, direction, phi, mode in cases:
        a = cached_analysis(name, 96, frame_kind=fk)
        closed = second_variation_fermat(
            a.patch, weight, a.frame, direction, a.torsion, a.shape, a.curv,
            a.metric, phi, grid, mode=mode)
        oracle = fd_variation_oracle(a.patch, weight, a.frame, direction,
                                     phi, grid, 2)
        rel = abs(closed - oracle) / (1.0 + abs(oracle))
        worst = max(worst, rel)
    elapsed = time.time() - t0
    ok = (worst < 1e-4) and elapsed < 120.0
    report(f"2 (second-variation oracle, {len(cases)} randomized cases)",
           ok, f"worst rel err {worst:.2e} [{elapsed:.1f}s]")
    assert ok


def test_criterion_3_area_element_second_variation(rng):
    grid = build_grid(96)
    worst = 0.0
    for name, fk, _w, direction, phi, _m in _variation_cases(rng):
        a = cached_analysis(name, 96, frame_kind=fk)
        closed = second_variation_area_element(
            a.patch, a.frame, direction, a.torsion, a.shape, a.metric, phi,
            grid)
        stencil = area_element_second_derivative_stencil(
            a.patch, a.frame, direction, phi, grid)
        scale = max(1.0, np.nanmax(np.abs(closed)))
        worst = max(worst, np.nanmax(np.abs(closed - stencil)) / scale)
    ok = worst < 1e-5
    report("3 (area-element second variation, nodewise)", ok,
           f"worst rel err {worst:.2e}")
    assert ok


# ----------------------------------------------------------------------------
# criterion 4: Hopf suite
# ----------------------------------------------------------------------------

def test_criterion_4_hopf_enneper():
    a = cached_analysis("enneper", 256, frame_kind="parallel")
    hf = hopf_field(a.shape)
    hol = holomorphy_defect(hf, a.grid)
    per, agg = curvature_identity_residual(hf, a.curv, a.metric, a.grid)
    ok = hol["defect"] < 1e-6 and hol["certifies"] \
        and per.max_abs < 1e-9 and agg.max_abs < 1e-9
    report("4a (holomorphy + curvature identities, enneper)", ok,
           f"defect {hol['defect']:.2e}, identity {per.max_abs:.2e}")
    assert ok


@pytest.mark.xfail(
    strict=True, raises=NonFlatBundleError,
    reason="the holomorphic graph has non-flat normal bundle (its shape "
           "operators do not commute), so no torsion-free frame exists and "
           "parallel transport is path dependent")
def test_criterion_4_hopf_holograph_parallel_frame():
    try:
        a = cached_analysis("holograph_w2", 256, frame_kind="parallel")
    except NonFlatBundleError as exc:
        report("4b (holomorphy with parallel frame, holograph_w2)", False,
               f"no torsion-free frame: holonomy defect "
               f"{exc.holonomy_defect:.3f}")
        raise
    hf = hopf_field(a.shape)
    hol = holomorphy_defect(hf, a.grid)
    assert hol["defect"] < 1e-6


def test_criterion_4_hopf_identities_and_dbar():
    # curvature identities on the holomorphic graph (frame independent)
    a = cached_analysis("holograph_w2", 256)
    hf = hopf_field(a.shape)
    per, agg = curvature_identity_residual(hf, a.curv, a.metric, a.grid)
    ok = per.max_abs < 1e-9 and agg.max_abs < 1e-9

    # dbar-equation residual convergence on both surfaces
    details = [f"identity {per.max_abs:.2e}"]
    for name in ("enneper", "holograph_w2"):
        reps, hs = [], []
        for res in (128, 256):
            b = cached_analysis(name, res)
            reps.append(hopf_equation_residual(
                hopf_field(b.shape), b.shape, b.torsion, b.curv, b.metric,
                b.patch, b.grid))
            hs.append(b.grid.h)
        order = convergence_order(reps[0].max_abs, reps[1].max_abs, *hs)
        good = order >= 1.9 or reps[1].max_abs < ORDER_FLOOR
        details.append(f"{name} dbar order {order:.2f}")
        ok = ok and good
    report("4c (curvature identities + dbar convergence)", ok,
           ", ".join(details))
    assert ok


# ----------------------------------------------------------------------------
# criterion 5: chi equation
# ----------------------------------------------------------------------------

def test_criterion_5_chi_enneper():
    reps, hs = [], []
    for res in (128, 256):
        a = cached_analysis("enneper", res)
        reps.append(chi_pde_residual(a, mode="general"))
        hs.append(a.grid.h)
    order = convergence_order(reps[0].max_abs, reps[1].max_abs, *hs)
    ok = order >= 1.9
    report("5a (chi equation, minimal n=3 specialization)", ok,
           f"order {order:.2f}")
    assert ok


@pytest.mark.xfail(
    strict=True, raises=(NonFlatBundleError, PreconditionError),
    reason="the graph form of the chi equation presumes a torsion-free "
           "frame; the holomorphic graph admits none (non-flat bundle)")
def test_criterion_5_chi_holograph_graph_form():
    reps, hs = [], []
    for res in (128, 256):
        patch = catalog("holograph_w2")
        grid = build_grid(res)
        frame = parallel_frame(patch, grid)   # raises: bundle is not flat
        a = analyze(patch, grid, frame=frame)
        reps.append(chi_pde_residual(a, mode="graph"))
        hs.append(grid.h)
    order = convergence_order(reps[0].max_abs, reps[1].max_abs, *hs)
    assert order >= 1.9


def test_criterion_5_report_line():
    # the graph-form half is unattainable; record it visibly
    try:
        parallel_frame(catalog("holograph_w2"), build_grid(64))
        unattainable = False
    except NonFlatBundleError as exc:
        unattainable = True
        report("5b (chi equation, graph form on holograph_w2)", False,
               f"no torsion-free frame: holonomy defect "
               f"{exc.holonomy_defect:.3f} (expected failure)")
    assert unattainable


# ----------------------------------------------------------------------------
# criteria 6 and 7: eigenvalue solvers
# ----------------------------------------------------------------------------

def test_criterion_6_eigensolver_calibration():
    target = float(jn_zeros(0, 1)[0] ** 2)
    res = weighted_first_eigenvalue(lambda x, y: np.ones_like(x),
                                    mesh_size=0.1, levels=3)
    rel = abs(res.lambda1 - target) / target
    scale_err = 0.0
    for c in (0.5, 2.0, 10.0):
        sc = weighted_first_eigenvalue(
            lambda x, y, c=c: c * np.ones_like(x), mesh_size=0.1, levels=3)
        scale_err = max(scale_err,
                        abs(sc.lambda1 * c - res.lambda1) / res.lambda1)
    ok = rel < 1e-3 and scale_err < 1e-8
    report("6 (eigensolver calibration)", ok,
           f"lambda1 rel err {rel:.2e} vs j01^2, scaling defect "
           f"{scale_err:.2e}")
    assert ok


def test_criterion_7_cap_eigenvalue():
    mu = cap_eigenvalue(2 * np.pi)
    vals = [cap_eigenvalue(w) for w in (np.pi, 2 * np.pi, 3 * np.pi,
                                        3.9 * np.pi)]
    mono = all(b < a for a, b in zip(vals, vals[1:]))
    ok = abs(mu - 2.0) < 1e-6 and mono
    report("7 (spherical-cap eigenvalue)", ok,
           f"mu(2pi) = {mu:.9f}, monotone {mono}")
    assert ok


# ----------------------------------------------------------------------------
# criterion 8: cap certificate end-to-end
# ----------------------------------------------------------------------------

def test_criterion_8_cap_certificates():
    a = cached_analysis("enneper", 128)
    Q = total_curvature_Q(a.curv, a.metric, 0.01, a.grid)
    cert = barbosa_docarmo_certificate(a, 0.01, 1.02 * Q)
    mu = cert.certified_mu
    _, khat_max = conformal_gauss_curvature(a.curv, a.metric, 0.01, a.patch,
                                            a.grid)
    direct = mu_stability_check(a.patch, a.metric, a.curv,
                                np.zeros_like(a.curv.K), mu, a.grid)
    ok_e = (cert.verdict == "certified" and 0.0 < mu < 2.0
            and khat_max <= 1.0 + 5.0 * a.grid.h ** 2
            and direct.verdict == "certified")

    p = cached_analysis("plane3", 128)
    cert_p = barbosa_docarmo_certificate(p, 1.0, 2 * np.pi)
    ok_p = cert_p.verdict == "certified" \
        and abs(cert_p.certified_mu - 2.0) < 1e-6
    ok = ok_e and ok_p
    report("8 (cap certificate end-to-end)", ok,
           f"enneper mu {mu:.4f}, khat_max {khat_max:.4f}, plane mu "
           f"{cert_p.certified_mu:.9f}")
    assert ok


# ----------------------------------------------------------------------------
# criterion 9: graph formula
# ----------------------------------------------------------------------------

def test_criterion_9_graph_formula():
    minimal = graph_mu_bound(GraphBounds(0.5, 0.0, 0.0, 0.0), 4)
    hand = graph_mu_bound(GraphBounds(1.0, 1.0, 0.1, 0.1), 4)
    expect = 2.0 - 0.6 * np.sqrt(2.0)
    ok = minimal.certified_mu == 2.0 \
        and abs(hand.certified_mu - expect) < 1e-12
    report("9 (graph-route formula)", ok,
           f"minimal mu {minimal.certified_mu}, hand value "
           f"{hand.certified_mu:.12f} vs {expect:.12f}")
    assert ok


# ----------------------------------------------------------------------------
# criterion 10: flat-minimal corollary on the holomorphic graph
# ----------------------------------------------------------------------------

@pytest.mark.xfail(
    strict=True, raises=NonFlatBundleError,
    reason="mu_max = 2/(n-2) needs a torsion-free frame; the holomorphic "
           "graph has a curved normal bundle, so the bound is never emitted")
def test_criterion_10a_flat_minimal_bound_emitted():
    patch = catalog("holograph_w2")
    grid = build_grid(96)
    try:
        frame = parallel_frame(patch, grid)
    except NonFlatBundleError as exc:
        report("10a (flat-minimal mu_max = 1 on holograph_w2)", False,
               f"no torsion-free frame: holonomy defect "
               f"{exc.holonomy_defect:.3f} (expected failure)")
        raise
    a = analyze(patch, grid, frame=frame)
    from mustab.variation import minimal_flat_bound
    bound = minimal_flat_bound(4, total_torsion(a.torsion, grid))
    assert bound.certified and bound.mu_max == pytest.approx(1.0)


def test_criterion_10b_direct_check_at_mu_1():
    a = cached_analysis("holograph_w2", 96)
    cert = mu_stability_check(a.patch, a.metric, a.curv,
                              np.zeros_like(a.curv.K), 1.0, a.grid)
    ok = cert.verdict == "certified"
    report("10b (direct stability check at mu = 1, holograph_w2)", ok,
           f"lambda1 = {cert.constants.get('lambda1'):.4f}")
    assert ok


# ----------------------------------------------------------------------------
# criterion 11: CLI determinism
# ----------------------------------------------------------------------------

ACCEPTANCE_CONFIGS = [
    ["analyze", "--surface", "clifford", "--resolution", "64"],
    ["residuals", "--surface", "enneper", "--resolution", "64,128"],
    ["variation", "--surface", "enneper", "--resolution", "64",
     "--order", "2"],
    ["variation", "--surface", "holograph_w2", "--resolution", "64",
     "--direction", "angle:0.9,0.5,-0.2"],
    ["hopf", "--surface", "holograph_w2", "--resolution", "64"],
    ["stability", "--route", "cap", "--surface", "plane3", "--kappa0", "1",
     "--omega0", "6.2831853", "--resolution", "64"],
    ["stability", "--route", "definition", "--surface", "enneper",
     "--mu", "2", "--resolution", "64"],
    ["stability", "--route", "graph", "--surface", "holograph_w2",
     "--resolution", "64"],
]


def test_criterion_11_cli_determinism():
    diffs = []
    for cfg in ACCEPTANCE_CONFIGS:
        runs = [subprocess.run(
            [sys.executable, "-m", "mustab.cli"] + cfg + ["--no-timestamp"],
            capture_output=True, text=True) for _ in range(2)]
        if runs[0].stdout != runs[1].stdout or not runs[0].stdout:
            diffs.append(" ".join(cfg))
        json.loads(runs[0].stdout)   # must be valid JSON
    ok = not diffs
    report("11 (CLI determinism)", ok,
           f"{len(ACCEPTANCE_CONFIGS)} configs byte-stable"
           + (f"; diffs: {diffs}" if diffs else ""))
    assert ok
