"""Complex-analytic layer: Wirtinger derivatives and the Hopf functions.

Complex quantities are ordinary numpy complex fields built from paired real
fields; nothing here assumes the ambient dimension is even.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .compatibility import _report
from .surface_core.fields import require_conformal
from .surface_core.grid import d_du, d_dv, interior_max


@dataclass
class HopfField:
    """H_sigma = L_{s,11} - L_{s,22} - 2i L_{s,12} per normal direction."""

    values: np.ndarray      # complex, (n-2, R, R)


def wirtinger(field, grid):
    """(d/dw, d/dwbar) of a field: 0.5(f_u -+ i f_v) by centered stencils."""
    fu = d_du(field, grid)
    fv = d_dv(field, grid)
    return 0.5 * (fu - 1j * fv), 0.5 * (fu + 1j * fv)


def hopf_field(shape):
    L = shape.L
    return HopfField(values=L[:, 0, 0] - L[:, 1, 1] - 2j * L[:, 0, 1])


def hopf_equation_residual(hopf, shape, tors, curv, met, patch, grid,
                           per_normal=False):
    """Defect of the dbar-equation for the Hopf functions.

    H_{s,wbar} = 2 H_{s,w} W + sum_w {(L_{w,22}+iL_{w,12}) T^s_{w,1}
                                      - (L_{w,12}+iL_{w,11}) T^s_{w,2}}.

    With ``per_normal=True`` returns one report per normal direction instead
    of the aggregate.
    """
    require_conformal(patch, met, what="the Hopf dbar-equation")
    L, T, W = shape.L, tors.T, met.W
    nn = L.shape[0]
    acc = np.zeros(W.shape)
    singles = []
    for s in range(nn):
        _, lhs = wirtinger(hopf.values[s], grid)
        Hw, _ = wirtinger(curv.H_sigma[s], grid)
        rhs = 2.0 * Hw * W
        for w in range(nn):
            rhs = rhs + (L[w, 1, 1] + 1j * L[w, 0, 1]) * T[w, s, 0] \
                - (L[w, 0, 1] + 1j * L[w, 0, 0]) * T[w, s, 1]
        defect = np.abs(lhs - rhs)
        singles.append(_report(f"hopf_dbar[{s + 1}]", defect, grid))
        acc = np.maximum(acc, defect)
    if per_normal:
        return singles
    return _report("hopf_dbar", acc, grid)


def holomorphy_defect(hopf, grid, minimal=True, torsion_free=True):
    """Max |dH_sigma/dwbar| over interior nodes.

    A vanishing defect certifies holomorphy only for minimal patches with
    torsion-free frames; otherwise the number is returned as a diagnostic
    together with ``certifies=False``.
    """
    worst = 0.0
    for s in range(hopf.values.shape[0]):
        _, dbar = wirtinger(hopf.values[s], grid)
        worst = max(worst, interior_max(np.abs(dbar), grid))
    return {"defect": worst, "certifies": bool(minimal and torsion_free)}


def curvature_identity_residual(hopf, curv, met, grid, h_tol=1e-8):
    """Defect of |H_sigma|^2 = 4(-K_sigma) W^2 and of the aggregate identity.

    Both hold only for minimal immersions; a patch with |H_sigma| above
    ``h_tol`` is rejected.
    """
    hmax = float(np.nanmax(np.abs(curv.H_sigma)))
    if hmax > h_tol:
        raise PreconditionError(
            f"curvature identity requires a minimal patch; max |H_sigma| = "
            f"{hmax:.3e}")
    W2 = met.W ** 2
    per = np.abs(np.abs(hopf.values) ** 2 - 4.0 * (-curv.K_sigma) * W2)
    acc = per.max(axis=0)
    agg = np.abs(np.sum(np.abs(hopf.values) ** 2, axis=0)
                 - 4.0 * (-curv.K) * W2)
    report_per = _report("hopf_curvature_identity", acc, grid)
    report_agg = _report("hopf_curvature_aggregate", agg, grid)
    return report_per, report_agg


def hopf_aggregate(hopf):
    """Frame-invariant sum over normals of |H_sigma|^2."""
    return np.sum(np.abs(hopf.values) ** 2, axis=0)


def gauss_zero_count(hopf, grid, subdisc_radius=0.9, zero_tol_factor=1e-6):
    """Count clusters of near-zeros of sum |H_sigma|^2 inside a subdisc.

    Diagnostic for isolated Gauss-curvature zeros of minimal patches.  A
    field that is below threshold on more than half the subdisc is flagged
    as non-isolated (sentinel -1), which happens exactly in the totally
    flat case.
    """
    if not 0.0 < subdisc_radius < 1.0:
        raise PreconditionError("subdisc_radius must lie in (0, 1)")
    agg = hopf_aggregate(hopf)
    sub = grid.disc & (grid.U ** 2 + grid.V ** 2 <= subdisc_radius ** 2)
    vals = agg[sub]
    tol = zero_tol_factor * float(np.median(vals))
    low = sub & (agg <= tol)
    ncount = int(low.sum())
    if ncount == 0:
        return 0
    if ncount > 0.5 * int(sub.sum()):
        return -1   # non-isolated: the field vanishes on most of the subdisc
    # count 8-connected clusters with one BFS pass
    visited = np.zeros_like(low, dtype=bool)
    clusters = 0
    R = low.shape[0]
    for i, j in zip(*np.nonzero(low)):
        if visited[i, j]:
            continue
        clusters += 1
        stack = [(i, j)]
        visited[i, j] = True
        while stack:
            a, b = stack.pop()
            for da in (-1, 0, 1):
                for db in (-1, 0, 1):
                    x, y = a + da, b + db
                    if 0 <= x < R and 0 <= y < R and low[x, y] \
                            and not visited[x, y]:
                        visited[x, y] = True
                        stack.append((x, y))
    return clusters
