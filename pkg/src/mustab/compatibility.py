"""Structural PDE system of surface theory as numerical residuals.

Each residual evaluates one integrability identity nodewise on the interior
mask, differencing the computed fields that the identity differentiates and
using stored (analytic-quality) data everywhere else.  Identities that the
input data satisfies exactly sit at the roundoff floor; the convergence-order
helper reports +inf for those.
"""

from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .errors import PreconditionError
from .surface_core.fields import require_conformal
from .surface_core.grid import (convergence_order, d_du, d_dv, interior_l2,
                                interior_max)


@dataclass
class ResidualReport:
    name: str
    max_abs: float
    l2: float
    resolution: int
    convergence_order: Optional[float] = None

    def to_dict(self):
        return asdict(self)


@dataclass
class NormalCurvatureTensor:
    """S[s,w] = S^w_{s,12}, the only independent slot in two parameters."""

    S: np.ndarray    # (n-2, n-2, R, R)


def _report(name, defect, grid):
    return ResidualReport(name=name, max_abs=interior_max(defect, grid),
                          l2=interior_l2(defect, grid),
                          resolution=grid.resolution)


def gauss_residual(patch, met, chris, frame, shape, grid):
    """Defect of X_{u^i u^j} = Gamma^k_{ij} X_{u^k} + sum_s L_{s,ij} N_s."""
    u, v = grid.U[grid.disc], grid.V[grid.disc]
    dX = patch.eval_dX(u, v)
    d2X = patch.eval_d2X(u, v)
    N = frame.N[..., grid.disc]
    L = shape.L[..., grid.disc]
    G = chris.Gamma[..., grid.disc]
    pairs = {(0, 0): 0, (0, 1): 1, (1, 1): 2}
    worst = np.zeros(d2X.shape[-1])
    for (i, j), a in pairs.items():
        rhs = (G[0, i, j] * dX[:, 0] + G[1, i, j] * dX[:, 1]
               + np.einsum("sm,skm->km", L[:, i, j], N))
        worst = np.maximum(worst, np.abs(d2X[:, a] - rhs).max(axis=0))
    defect = grid.new_field()
    defect[grid.disc] = worst
    return _report("gauss", defect, grid)


def weingarten_residual(patch, met, frame, shape, tors, grid):
    """Defect of N_{s,u^i} = -L_{s,ij} g^{jk} X_{u^k} + T^w_{s,i} N_w.

    The left side differences the frame value fields; the right side uses the
    stored shape/torsion data, so the defect measures the consistency of the
    frame as a differentiable field.
    """
    u, v = grid.U[grid.disc], grid.V[grid.disc]
    dX = patch.eval_dX(u, v)
    dXg = grid.new_field((patch.n, 2))
    dXg[..., grid.disc] = dX
    det = met.det
    ginv = np.stack([np.stack([met.g22, -met.g12]),
                     np.stack([-met.g12, met.g11])]) / det
    dN = (d_du(frame.N, grid), d_dv(frame.N, grid))
    L, T = shape.L, tors.T
    acc = np.zeros(frame.N.shape[-2:])
    for i in range(2):
        coef = -np.einsum("sj...,jk...->sk...", L[:, i, :], ginv)
        tang = np.einsum("sq...,qk...->sk...", coef,
                         np.moveaxis(dXg, 1, 0))
        nrm = np.einsum("sw...,wq...->sq...", T[:, :, i], frame.N)
        defect = dN[i] - tang - nrm
        acc = np.maximum(acc, np.abs(defect).max(axis=(0, 1)))
    worst = grid.new_field()
    worst[:] = acc
    return _report("weingarten", worst, grid)


def codazzi_residual(patch, shape, met, tors, curv, grid):
    """Defect of the two conformal-parameter Codazzi/Mainardi identities."""
    require_conformal(patch, met, what="the Codazzi residual")
    L, T, W = shape.L, tors.T, met.W
    Wu, Wv = d_du(W, grid), d_dv(W, grid)
    H = curv.H_sigma
    nn = L.shape[0]
    acc = np.zeros(W.shape)
    for s in range(nn):
        lhs_a = d_dv(L[s, 0, 1], grid) - d_du(L[s, 1, 1], grid)
        rhs_a = -H[s] * Wu
        lhs_b = d_dv(L[s, 0, 0], grid) - d_du(L[s, 0, 1], grid)
        rhs_b = H[s] * Wv
        for w in range(nn):
            rhs_a = rhs_a + L[w, 1, 1] * T[w, s, 0] - L[w, 0, 1] * T[w, s, 1]
            rhs_b = rhs_b + L[w, 0, 1] * T[w, s, 0] - L[w, 0, 0] * T[w, s, 1]
        acc = np.maximum(acc, np.abs(lhs_a - rhs_a))
        acc = np.maximum(acc, np.abs(lhs_b - rhs_b))
    return _report("codazzi", acc, grid)


def normal_curvature(tors, grid):
    """Curvature tensor of the normal connection, S^w_{s,12} (slot (1,2))."""
    T = tors.T
    nn = T.shape[0]
    S = np.empty((nn, nn) + T.shape[-2:])
    for s in range(nn):
        for w in range(nn):
            dS = d_dv(T[s, w, 0], grid) - d_du(T[s, w, 1], grid)
            quad = np.einsum("t...,t...->...", T[s, :, 0], T[:, w, 1]) \
                - np.einsum("t...,t...->...", T[s, :, 1], T[:, w, 0])
            S[s, w] = dS + quad
    return NormalCurvatureTensor(S=S)


def ricci_residual(ncurv, shape, met, grid):
    """Defect between the connection curvature and its Ricci-identity value."""
    det = met.det
    ginv = np.stack([np.stack([met.g22, -met.g12]),
                     np.stack([-met.g12, met.g11])]) / det
    L = shape.L
    rhs = np.einsum("jk...,sj...,wk...->sw...", ginv, L[:, 0, :], L[:, :, 1]) \
        - np.einsum("jk...,sj...,wk...->sw...", ginv, L[:, 1, :], L[:, :, 0])
    defect = np.abs(ncurv.S - rhs).max(axis=(0, 1))
    return _report("ricci", defect, grid)


RESIDUAL_NAMES = ("gauss", "weingarten", "codazzi", "ricci")


def residual_suite(analysis):
    """All four structural residuals for one analyzed surface.

    The Codazzi identity is stated in conformal parameters; on non-conformal
    patches its entry records the raised precondition instead of a value.
    """
    a = analysis
    out = {}
    out["gauss"] = gauss_residual(a.patch, a.metric, a.chris, a.frame,
                                  a.shape, a.grid)
    out["weingarten"] = weingarten_residual(a.patch, a.metric, a.frame,
                                            a.shape, a.torsion, a.grid)
    try:
        out["codazzi"] = codazzi_residual(a.patch, a.shape, a.metric,
                                          a.torsion, a.curv, a.grid)
    except PreconditionError as exc:
        out["codazzi"] = exc
    ncurv = normal_curvature(a.torsion, a.grid)
    out["ricci"] = ricci_residual(ncurv, a.shape, a.metric, a.grid)
    return out


def compare_residuals(coarse, fine, h_coarse, h_fine):
    """Fill convergence_order on the finer report from a coarse/fine pair."""
    order = convergence_order(coarse.max_abs, fine.max_abs, h_coarse, h_fine)
    return ResidualReport(name=fine.name, max_abs=fine.max_abs, l2=fine.l2,
                          resolution=fine.resolution, convergence_order=order)
