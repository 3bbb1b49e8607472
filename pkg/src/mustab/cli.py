"""Command-line interface: catalog analyses and machine-readable reports.

Subcommands
    analyze    field summary of one surface (metric, curvature, frame checks)
    residuals  structural-identity residual table across resolutions
    variation  closed-form vs finite-difference variation of the functional
    hopf       Hopf-function diagnostics and residuals
    stability  certification routes, emitting a certificate

Exit codes: 0 success/certified, 2 not-certified, 3 inapplicable/precondition,
4 input error, 5 internal error.  JSON reports are byte-deterministic under
``--no-timestamp`` (which also drops wall-clock timings).
"""

import argparse
import configparser
import csv
import datetime
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import (ConfigurationError, DegenerateImmersionError,
                     FrameConstructionError, MustabError, NonFlatBundleError,
                     OracleError, PreconditionError, WeightError)
from .surface_core import (analyze, build_grid, catalog, gram_schmidt_frame,
                           integrate, max_torsion, metric, parallel_frame,
                           patch_from_config, preferred_frame, total_torsion)
from .surface_core.frames import frame_orthonormality_residual
from .compatibility import compare_residuals, residual_suite
from .hopf import (curvature_identity_residual, gauss_zero_count, hopf_field,
                   hopf_equation_residual, holomorphy_defect)
from .variation import (PHI_PRESETS, direction_angle, direction_constant,
                        fd_variation_oracle, fermat_mu_bound, fermat_value,
                        first_variation, minimal_flat_bound,
                        second_variation_fermat, weight_preset)
from .stability import (GraphBounds, barbosa_docarmo_certificate, chi,
                        graph_mu_bound, mu_stability_check,
                        stability_threshold_check)

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_NOT_CERTIFIED = 2
EXIT_INAPPLICABLE = 3
EXIT_INPUT = 4
EXIT_INTERNAL = 5


def _resolve_surface(spec):
    if os.path.sep in spec or spec.endswith((".cfg", ".ini")):
        if not os.path.exists(spec):
            raise ConfigurationError(f"surface config {spec!r} not found")
        parser = configparser.ConfigParser()
        parser.read(spec)
        return patch_from_config(parser, name=os.path.basename(spec))
    return catalog(spec)


def _resolve_frame(patch, grid, kind):
    if kind == "gram_schmidt":
        return gram_schmidt_frame(patch, grid)
    if kind == "parallel":
        return parallel_frame(patch, grid)
    if kind == "preferred":
        return preferred_frame(patch, grid)
    raise ConfigurationError(f"unknown frame kind {kind!r}")


def _resolutions(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigurationError(
            f"bad resolution list {text!r}") from None
    if not vals:
        raise ConfigurationError("need at least one resolution")
    if len(vals) > 1 and any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigurationError(
            "resolutions must be strictly increasing for convergence runs")
    return vals


def _direction(preset, count):
    if preset.startswith("constant"):
        idx = 0
        if ":" in preset:
            idx = int(preset.split(":", 1)[1])
        coeffs = np.zeros(count)
        if not 0 <= idx < count:
            raise ConfigurationError(
                f"direction index {idx} out of range for {count} normals")
        coeffs[idx] = 1.0
        return direction_constant(coeffs)
    if preset.startswith("angle"):
        a, b, c = 1.0, 0.5, 0.0
        if ":" in preset:
            parts = preset.split(":", 1)[1].split(",")
            a, b, c = (float(x) for x in parts)
        return direction_angle(a, b, c, count=count)
    raise ConfigurationError(f"unknown direction preset {preset!r}")


def _phi(preset):
    name, _, arg = preset.partition(":")
    if name not in PHI_PRESETS:
        raise ConfigurationError(f"unknown test-function preset {name!r}")
    return PHI_PRESETS[name](float(arg)) if arg else PHI_PRESETS[name]()


def _f(x):
    """JSON-safe float."""
    if x is None:
        return None
    return float(x)


def _nanstat(field):
    vals = field[np.isfinite(field)]
    return {"min": _f(vals.min()), "max": _f(vals.max()),
            "mean": _f(vals.mean())}


# ----------------------------------------------------------------------------
# subcommand handlers, each returns (results_dict, exit_code)
# ----------------------------------------------------------------------------

def _cmd_analyze(args):
    patch = _resolve_surface(args.surface)
    grid = build_grid(args.resolution)
    frame = _resolve_frame(patch, grid, args.frame)
    a = analyze(patch, grid, frame=frame)
    chifld = chi(patch, a.metric, grid)
    results = {
        "surface": patch.name,
        "ambient_dim": patch.n,
        "node_count": int(grid.disc.sum()),
        "metric": {
            "W": _nanstat(a.metric.W),
            "conformality_defect": _f(a.metric.max_conformality_defect),
        },
        "frame": {
            "kind": args.frame,
            "orthonormality_residual":
                _f(frame_orthonormality_residual(patch, frame, grid)),
            "torsion_free": bool(frame.torsion_free),
            "max_torsion": _f(max_torsion(a.torsion, grid)),
            "shape_definition_discrepancy": _f(a.shape.alt_discrepancy),
        },
        "curvature": {
            "H": _nanstat(a.curv.H),
            "K": _nanstat(a.curv.K),
            "H_sigma_max": [_f(np.nanmax(np.abs(a.curv.H_sigma[s])))
                            for s in range(frame.count)],
        },
        "chi": _nanstat(chifld.chi),
        "area": _f(integrate(np.where(grid.disc, a.metric.W, np.nan), grid)),
    }
    return results, EXIT_OK


def _cmd_residuals(args):
    patch = _resolve_surface(args.surface)
    resolutions = _resolutions(args.resolution)
    rows = []
    prev = {}
    prev_h = None
    for res in resolutions:
        grid = build_grid(res)
        frame = _resolve_frame(patch, grid, args.frame)
        a = analyze(patch, grid, frame=frame, with_christoffel=True)
        suite = residual_suite(a)
        for name, rep in suite.items():
            if isinstance(rep, Exception):
                rows.append({"name": name, "resolution": res,
                             "error": str(rep)})
                continue
            if name in prev and prev_h is not None:
                rep = compare_residuals(prev[name], rep, prev_h, grid.h)
            rows.append(rep.to_dict())
            prev[name] = rep
        prev_h = grid.h
    return {"surface": patch.name, "residuals": rows}, EXIT_OK


def _cmd_variation(args):
    patch = _resolve_surface(args.surface)
    grid = build_grid(args.resolution)
    frame = _resolve_frame(patch, grid, args.frame)
    a = analyze(patch, grid, frame=frame)
    weight = weight_preset(args.weight)
    direction = _direction(args.direction, frame.count)
    phi = _phi(args.phi)
    if args.order == 1:
        closed = first_variation(patch, weight, frame, direction, phi,
                                 a.curv, grid)
    else:
        closed = second_variation_fermat(
            patch, weight, frame, direction, a.torsion, a.shape, a.curv,
            a.metric, phi, grid,
            mode="general" if args.general else "printed")
    results = {"surface": patch.name, "weight": weight.name,
               "direction": direction.name, "phi": phi.name,
               "order": args.order,
               "functional_value": _f(fermat_value(patch, weight, grid)),
               "closed_form": _f(closed)}
    if args.oracle:
        oracle = fd_variation_oracle(patch, weight, frame, direction, phi,
                                     grid, args.order)
        results["oracle"] = _f(oracle)
        results["rel_err"] = _f(abs(closed - oracle) / (1.0 + abs(oracle)))
    return results, EXIT_OK


def _cmd_hopf(args):
    patch = _resolve_surface(args.surface)
    grid = build_grid(args.resolution)
    frame = _resolve_frame(patch, grid, args.frame)
    a = analyze(patch, grid, frame=frame)
    hf = hopf_field(a.shape)
    minimal = bool(np.nanmax(np.abs(a.curv.H)) <= 1e-8)
    hol = holomorphy_defect(hf, grid, minimal=minimal,
                            torsion_free=frame.torsion_free)
    per = hopf_equation_residual(hf, a.shape, a.torsion, a.curv, a.metric,
                                 patch, grid, per_normal=True)
    results = {"surface": patch.name,
               "holomorphy": {"defect": _f(hol["defect"]),
                              "certifies": hol["certifies"]},
               "dbar_residual_per_normal": [r.to_dict() for r in per],
               "zero_count": gauss_zero_count(hf, grid,
                                              args.subdisc_radius)}
    if minimal:
        per, agg = curvature_identity_residual(hf, a.curv, a.metric, grid)
        results["curvature_identity"] = {"per_normal": per.to_dict(),
                                         "aggregate": agg.to_dict()}
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            nn = hf.values.shape[0]
            writer.writerow(["u", "v"] + [f"abs_hopf_{s+1}"
                                          for s in range(nn)])
            iu, iv = np.nonzero(grid.disc)
            for i, j in zip(iu, iv):
                writer.writerow(
                    [f"{grid.U[i, j]:.12g}", f"{grid.V[i, j]:.12g}"]
                    + [f"{abs(hf.values[s, i, j]):.12g}"
                       for s in range(nn)])
        results["csv"] = args.csv
    return results, EXIT_OK


def _verdict_exit(cert):
    if cert.verdict == "certified":
        return EXIT_OK
    if cert.verdict == "not-certified":
        return EXIT_NOT_CERTIFIED
    return EXIT_INAPPLICABLE


def _cmd_stability(args):
    patch = _resolve_surface(args.surface)
    grid = build_grid(args.resolution)
    route = args.route
    if route == "cap":
        frame = parallel_frame(patch, grid) if patch.n > 3 \
            else gram_schmidt_frame(patch, grid)
        a = analyze(patch, grid, frame=frame)
        cert = barbosa_docarmo_certificate(a, args.kappa0, args.omega0,
                                           mesh_size=args.mesh_size)
    elif route == "definition":
        frame = _resolve_frame(patch, grid, args.frame)
        a = analyze(patch, grid, frame=frame)
        if args.mu is None:
            raise ConfigurationError("--mu is required for the direct route")
        if args.q == "zero":
            q = np.zeros_like(a.curv.K)
        elif args.q == "cmc":
            q = 2.0 * a.curv.H ** 2
        else:
            raise ConfigurationError(f"unknown q preset {args.q!r}")
        cert = mu_stability_check(patch, a.metric, a.curv, q, args.mu, grid,
                                  mesh_size=args.mesh_size)
    elif route == "graph":
        frame = parallel_frame(patch, grid) if patch.n > 3 \
            else gram_schmidt_frame(patch, grid)
        a = analyze(patch, grid, frame=frame)
        from .surface_core.fields import require_conformal
        require_conformal(patch, a.metric, what="the graph route")
        if not patch.is_graph:
            raise PreconditionError(
                f"{patch.name!r} is not a graph; the graph route needs one")
        chifld = chi(patch, a.metric, grid)
        hmin = float(np.nanmin(a.curv.H))
        bounds = GraphBounds(chi_min=chifld.min_interior(grid),
                             h_min=max(hmin, 0.0), h1=args.h1, h2=args.h2)
        cert = graph_mu_bound(bounds, patch.n)
    elif route == "fermat":
        frame = _resolve_frame(patch, grid, args.frame)
        a = analyze(patch, grid, frame=frame)
        weight = weight_preset(args.weight)
        bound = fermat_mu_bound(weight, patch, frame, a.curv, grid)
        direct = mu_stability_check(patch, a.metric, a.curv, bound.q_field,
                                    bound.mu_max, grid,
                                    mesh_size=args.mesh_size)
        from .stability import StabilityCertificate
        cert = StabilityCertificate(
            route="fermat", verdict=direct.verdict,
            certified_mu=bound.mu_max if direct.certified else None,
            q_description=bound.describe(),
            constants={"gamma_min": bound.gamma_min,
                       "gamma_max": bound.gamma_max,
                       "mu_max": bound.mu_max,
                       "q_minus_K_min": bound.q_minus_K_min,
                       "direct_check": direct.to_dict()})
    elif route == "flat":
        frame = parallel_frame(patch, grid) if patch.n > 3 \
            else gram_schmidt_frame(patch, grid)
        a = analyze(patch, grid, frame=frame)
        hmax = float(np.nanmax(np.abs(a.curv.H)))
        if hmax > 1e-8:
            raise PreconditionError(
                f"the flat-minimal route needs a minimal patch; max H = "
                f"{hmax:.3e}")
        tt = total_torsion(a.torsion, grid)
        bound = minimal_flat_bound(patch.n, tt)
        from .stability import StabilityCertificate
        if not bound.certified:
            cert = StabilityCertificate(
                route="flat_minimal", verdict="not-certified",
                certified_mu=None, q_description=bound.describe(),
                constants={"total_torsion": tt, "n": patch.n})
        else:
            direct = mu_stability_check(
                patch, a.metric, a.curv, np.zeros_like(a.curv.K),
                bound.mu_max, grid, mesh_size=args.mesh_size)
            cert = StabilityCertificate(
                route="flat_minimal", verdict=direct.verdict,
                certified_mu=bound.mu_max if direct.certified else None,
                q_description="q = 0; mu = 2/(n-2) for flat minimal patches",
                constants={"total_torsion": tt, "n": patch.n,
                           "mu_max": bound.mu_max,
                           "direct_check": direct.to_dict()})
    elif route == "threshold":
        frame = _resolve_frame(patch, grid, args.frame)
        a = analyze(patch, grid, frame=frame)
        cert = stability_threshold_check(a, args.a, kappa0=args.kappa0)
    else:
        raise ConfigurationError(f"unknown route {route!r}")
    return {"surface": patch.name,
            "certificate": cert.to_dict()}, _verdict_exit(cert)


# ----------------------------------------------------------------------------
# driver
# ----------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(
        prog="mustab",
        description="curvature fields, variations and mu-stability of "
                    "immersed discs")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, multires=False):
        p.add_argument("--surface", required=True,
                       help="catalog name like enneper or sphere_patch(2), "
                            "or a path to a [surface] config file")
        if multires:
            p.add_argument("--resolution", default="64,128",
                           help="comma-separated increasing list")
        else:
            p.add_argument("--resolution", type=int, default=64)
        p.add_argument("--frame", default="gram_schmidt",
                       choices=("gram_schmidt", "parallel", "preferred"))
        p.add_argument("--output", default=None,
                       help="report path (default stdout); relative paths "
                            "land in $MUSTAB_OUT_DIR when set")
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit timestamp and timings for byte-stable "
                            "reports")

    p = sub.add_parser("analyze", help="field summary of one surface")
    common(p)
    p.set_defaults(handler=_cmd_analyze)

    p = sub.add_parser("residuals", help="structural-identity residuals")
    common(p, multires=True)
    p.set_defaults(handler=_cmd_residuals)

    p = sub.add_parser("variation", help="variations of the weighted area")
    common(p)
    p.add_argument("--weight", default="const",
                   choices=("const", "exp_x3", "radial"))
    p.add_argument("--direction", default="constant:0",
                   help="constant:k or angle:a,b,c")
    p.add_argument("--phi", default="radial",
                   help="radial[:rho] or tensor[:rho]")
    p.add_argument("--order", type=int, default=2, choices=(1, 2))
    p.add_argument("--general", action="store_true",
                   help="include the off-critical correction term")
    oracle = p.add_mutually_exclusive_group()
    oracle.add_argument("--oracle", dest="oracle", action="store_true",
                        default=True)
    oracle.add_argument("--no-oracle", dest="oracle", action="store_false")
    p.set_defaults(handler=_cmd_variation)

    p = sub.add_parser("hopf", help="Hopf-function diagnostics")
    common(p)
    p.add_argument("--subdisc-radius", type=float, default=0.9)
    p.add_argument("--csv", default=None,
                   help="optional CSV dump of |hopf| fields")
    p.set_defaults(handler=_cmd_hopf)

    p = sub.add_parser("stability", help="mu-stability certification")
    common(p)
    p.add_argument("--route", required=True,
                   choices=("definition", "graph", "cap", "fermat", "flat",
                            "threshold"))
    p.add_argument("--kappa0", type=float, default=0.01)
    p.add_argument("--omega0", type=float, default=2.0 * np.pi)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--mesh-size", type=float, default=0.1)
    p.add_argument("--q", default="zero", help="q preset: zero or cmc")
    p.add_argument("--a", type=float, default=1.0,
                   help="curvature bound for the threshold route")
    p.add_argument("--h1", type=float, default=0.0)
    p.add_argument("--h2", type=float, default=0.0)
    p.add_argument("--weight", default="const",
                   choices=("const", "exp_x3", "radial"))
    p.set_defaults(handler=_cmd_stability)

    return ap


def _emit(report, args):
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    out = getattr(args, "output", None)
    if out:
        if not os.path.isabs(out):
            out = os.path.join(os.environ.get("MUSTAB_OUT_DIR", "."), out)
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; remap to the input-error code,
        # keep 0 for --help/--version
        return EXIT_OK if exc.code == 0 else EXIT_INPUT

    t0 = time.time()
    config_echo = {k: v for k, v in sorted(vars(args).items())
                   if k not in ("handler",) and not callable(v)}
    report = {"schema_version": SCHEMA_VERSION,
              "tool": {"name": "mustab", "version": __version__},
              "config": config_echo}
    t1 = time.time()
    try:
        results, code = args.handler(args)
        report["results"] = results
    except ConfigurationError as exc:
        report["error"] = {"kind": "input", "message": str(exc)}
        code = EXIT_INPUT
    except (PreconditionError, NonFlatBundleError, WeightError,
            DegenerateImmersionError, FrameConstructionError,
            OracleError) as exc:
        report["error"] = {"kind": type(exc).__name__, "message": str(exc)}
        code = EXIT_INAPPLICABLE
    except MustabError as exc:
        report["error"] = {"kind": "internal", "message": str(exc)}
        code = EXIT_INTERNAL
    t2 = time.time()
    if not args.no_timestamp:
        report["timestamp"] = datetime.datetime.now(
            datetime.timezone.utc).isoformat()
        report["timings_sec"] = {"parse": t1 - t0, "execute": t2 - t1,
                                 "total": time.time() - t0}
    _emit(report, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
