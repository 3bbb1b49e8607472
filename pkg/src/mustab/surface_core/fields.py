"""First-order geometric data of a patch as grid fields.

Everything here is pointwise algebra on exact patch/frame evaluations; the
only finite differences are the metric derivatives inside the Christoffel
symbols, which by construction come from centered stencils on the grid.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import DegenerateImmersionError, PreconditionError
from . import grid as gridmod
from .frames import NormalFrame, gram_schmidt_frame

W_TOL = 1e-10
CONFORMAL_TOL = 1e-8


@dataclass
class MetricData:
    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    W: np.ndarray
    conformality_defect: np.ndarray   # max(|g11-g22|, |g12|)/W nodewise

    @property
    def det(self):
        return self.g11 * self.g22 - self.g12 ** 2

    @property
    def max_conformality_defect(self):
        vals = self.conformality_defect[np.isfinite(self.conformality_defect)]
        return float(vals.max()) if vals.size else 0.0


@dataclass
class ShapeTensor:
    L: np.ndarray                 # (n-2, 2, 2, R, R)
    alt_discrepancy: float        # max |X_{ij}.N + X_i.N_j| over the disc


@dataclass
class TorsionField:
    T: np.ndarray                 # (n-2, n-2, 2, R, R); T[s,w,i] = N_{s,i}.N_w


@dataclass
class CurvatureSummary:
    H_sigma: np.ndarray           # (n-2, R, R)
    K_sigma: np.ndarray
    H: np.ndarray                 # (R, R)
    K: np.ndarray
    mean_curvature_vector: np.ndarray   # (n, R, R)


@dataclass
class ChristoffelSymbols:
    Gamma: np.ndarray             # (2, 2, 2, R, R), Gamma[k, i, j]


def metric(patch, grid, w_tol=W_TOL, conformal_tol=CONFORMAL_TOL):
    """First fundamental form, area element and conformality defect."""
    u, v = grid.U[grid.disc], grid.V[grid.disc]
    dX = patch.eval_dX(u, v)
    g11 = np.einsum("km,km->m", dX[:, 0], dX[:, 0])
    g12 = np.einsum("km,km->m", dX[:, 0], dX[:, 1])
    g22 = np.einsum("km,km->m", dX[:, 1], dX[:, 1])
    det = g11 * g22 - g12 ** 2
    scale = float(np.median(g11 + g22))
    bad = det <= w_tol * scale ** 2
    if np.any(bad):
        k = int(np.argmax(bad))
        raise DegenerateImmersionError(
            f"immersion {patch.name!r} degenerates at (u,v)=({u[k]:.6f},{v[k]:.6f}):"
            f" det g = {det[k]:.3e}", node=(float(u[k]), float(v[k])))
    W = np.sqrt(det)
    defect = np.maximum(np.abs(g11 - g22), np.abs(g12)) / W

    def scatter(a):
        out = grid.new_field()
        out[grid.disc] = a
        return out

    md = MetricData(g11=scatter(g11), g12=scatter(g12), g22=scatter(g22),
                    W=scatter(W), conformality_defect=scatter(defect))
    if patch.claims_conformal and md.max_conformality_defect > conformal_tol:
        raise PreconditionError(
            f"{patch.name!r} claims conformal parameters but the defect is "
            f"{md.max_conformality_defect:.3e}")
    return md


def require_conformal(patch, met, tol=CONFORMAL_TOL, what="this operation"):
    d = met.max_conformality_defect
    if d > tol:
        raise PreconditionError(
            f"{what} requires conformal parameters; {patch.name!r} has "
            f"conformality defect {d:.3e}")


def shape_tensor(patch, frame, grid):
    """L_{sigma,ij} = X_{u^i u^j} . N_sigma, with the -X_i.N_j cross-check."""
    u, v = grid.U[grid.disc], grid.V[grid.disc]
    d2X = patch.eval_d2X(u, v)          # (n, 3, m): uu, uv, vv
    dX = patch.eval_dX(u, v)
    N = frame.N[..., grid.disc]
    nn = N.shape[0]
    Lflat = np.einsum("kam,skm->sam", d2X, N)   # a in (uu, uv, vv)
    L = grid.new_field((nn, 2, 2))
    idx = {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 2}
    for (i, j), a in idx.items():
        L[:, i, j][..., grid.disc] = Lflat[:, a]

    # alternative definition -X_{u^i}.N_{sigma,u^j}
    Nu = frame.Nu[..., grid.disc]
    Nv = frame.Nv[..., grid.disc]
    alt = np.stack([
        -np.einsum("km,skm->sm", dX[:, 0], Nu),
        -0.5 * (np.einsum("km,skm->sm", dX[:, 0], Nv)
                + np.einsum("km,skm->sm", dX[:, 1], Nu)),
        -np.einsum("km,skm->sm", dX[:, 1], Nv)], axis=1)
    disc = float(np.abs(alt - Lflat).max())
    return ShapeTensor(L=L, alt_discrepancy=disc)


def torsion(frame, grid):
    """T[s,w,i] = N_{sigma,u^i} . N_omega with the diagonal forced to zero."""
    N = frame.N[..., grid.disc]
    nn = N.shape[0]
    Tu = np.einsum("skm,wkm->swm", frame.Nu[..., grid.disc], N)
    Tv = np.einsum("skm,wkm->swm", frame.Nv[..., grid.disc], N)
    eye = np.eye(nn, dtype=bool)
    Tu[eye] = 0.0
    Tv[eye] = 0.0
    T = grid.new_field((nn, nn, 2))
    T[:, :, 0][..., grid.disc] = Tu
    T[:, :, 1][..., grid.disc] = Tv
    return TorsionField(T=T)


def max_torsion(tors, grid):
    vals = tors.T[..., grid.disc]
    return float(np.abs(vals).max()) if vals.size else 0.0


def curvatures(met, shape, frame, grid):
    """Mean/Gauss curvature per normal and the frame-invariant aggregates.

    H_sigma is the mean of the principal curvatures, i.e. the trace of the
    shape operator divided by two.
    """
    L = shape.L
    det = met.det
    H_sigma = (L[:, 0, 0] * met.g22 - 2.0 * L[:, 0, 1] * met.g12
               + L[:, 1, 1] * met.g11) / (2.0 * det)
    K_sigma = (L[:, 0, 0] * L[:, 1, 1] - L[:, 0, 1] ** 2) / det
    H = np.sqrt(np.sum(H_sigma ** 2, axis=0))
    K = np.sum(K_sigma, axis=0)
    Nhat = np.einsum("s...,sk...->k...", H_sigma, frame.N)
    return CurvatureSummary(H_sigma=H_sigma, K_sigma=K_sigma, H=H, K=K,
                            mean_curvature_vector=Nhat)


def conformal_curvatures(met, shape):
    """Specialized conformal-parameter formulas (cross-check path)."""
    L, W = shape.L, met.W
    H_sigma = (L[:, 0, 0] + L[:, 1, 1]) / (2.0 * W)
    K_sigma = (L[:, 0, 0] * L[:, 1, 1] - L[:, 0, 1] ** 2) / W ** 2
    return H_sigma, K_sigma


def christoffel(met, grid):
    """Christoffel symbols from centered differences of the metric fields."""
    dg = np.empty((2, 2, 2) + met.g11.shape)   # dg[i,j,l] = g_{ij,u^l}
    comps = {(0, 0): met.g11, (0, 1): met.g12, (1, 0): met.g12, (1, 1): met.g22}
    for (i, j), g in comps.items():
        dg[i, j, 0] = gridmod.d_du(g, grid)
        dg[i, j, 1] = gridmod.d_dv(g, grid)
    det = met.det
    ginv = np.empty((2, 2) + met.g11.shape)
    ginv[0, 0] = met.g22 / det
    ginv[1, 1] = met.g11 / det
    ginv[0, 1] = ginv[1, 0] = -met.g12 / det
    Gamma = np.zeros((2, 2, 2) + met.g11.shape)
    for k in range(2):
        for i in range(2):
            for j in range(2):
                acc = 0.0
                for l in range(2):
                    acc = acc + ginv[k, l] * (dg[l, i, j] + dg[j, l, i]
                                              - dg[i, j, l])
                Gamma[k, i, j] = 0.5 * acc
    return ChristoffelSymbols(Gamma=Gamma)


def total_torsion(tors, grid):
    """Integral of sum_{s,w} |T^w_{s,.}|^2 over B (no area-element factor)."""
    T = np.where(np.isfinite(tors.T), tors.T, 0.0)
    dens = np.sum(T ** 2, axis=(0, 1, 2))
    dens = np.where(grid.disc, dens, 0.0)
    return float(np.sum(dens * grid.cell_weights))


@dataclass
class SurfaceAnalysis:
    """Bundle of all first-order data for one (patch, grid, frame) triple."""

    patch: object
    grid: object
    frame: NormalFrame
    metric: MetricData
    shape: ShapeTensor
    torsion: TorsionField
    curv: CurvatureSummary
    christoffel: Optional[ChristoffelSymbols] = field(default=None)

    @property
    def chris(self):
        if self.christoffel is None:
            self.christoffel = christoffel(self.metric, self.grid)
        return self.christoffel


def analyze(patch, grid, frame=None, with_christoffel=False):
    """Compute the standard field bundle for a patch on a grid."""
    if frame is None:
        frame = gram_schmidt_frame(patch, grid)
    met = metric(patch, grid)
    shp = shape_tensor(patch, frame, grid)
    tor = torsion(frame, grid)
    curv = curvatures(met, shp, frame, grid)
    chris = christoffel(met, grid) if with_christoffel else None
    return SurfaceAnalysis(patch=patch, grid=grid, frame=frame, metric=met,
                           shape=shp, torsion=tor, curv=curv,
                           christoffel=chris)
