"""The mu-stability certification routes.

Three independent ways to certify the stability inequality

    int |grad phi|^2  >=  mu int (q - K) W phi^2,

for compactly supported phi: the direct route (first eigenvalue of the
weighted disc problem), the graph route (projection-function estimate), and
the cap route (total-curvature comparison with a spherical cap).  Every
certificate records the route, all intermediate constants, and the margins
on its strict inequalities; floating-point ties never certify.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..errors import PreconditionError
from ..surface_core.fields import require_conformal
from ..surface_core.grid import d_du, d_dv, integrate, interior_max, laplacian5
from ..compatibility import _report, normal_curvature
from .fem import weighted_first_eigenvalue
from .legendre import cap_eigenvalue

STRICT_GUARD = 1e-9      # relative guard on strict inequalities
MINIMAL_TOL = 1e-8


# ----------------------------------------------------------------------------
# projection function chi and its differential equation
# ----------------------------------------------------------------------------

@dataclass
class ChiField:
    chi: np.ndarray
    J: np.ndarray

    def min_interior(self, grid):
        vals = self.chi[grid.disc]
        return float(vals.min())


def chi(patch, met, grid):
    """chi = J/W with J the Jacobian of the first two components."""
    u, v = grid.U[grid.disc], grid.V[grid.disc]
    dX = patch.eval_dX(u, v)
    J = dX[0, 0] * dX[1, 1] - dX[1, 0] * dX[0, 1]
    Jf = grid.new_field()
    Jf[grid.disc] = J
    return ChiField(chi=Jf / met.W, J=Jf)


@dataclass
class MeanCurvatureOracle:
    """Prescribed mean curvature H_sigma(X, Z) with analytic gradients.

    ``value``, ``grad_X``, ``grad_Z`` receive (n, m) position and normal
    batches; value returns (m,), the gradients (n, m).
    """

    name: str
    value: Callable
    grad_X: Callable
    grad_Z: Callable


def zero_mean_curvature_oracle(n):
    z = lambda X, Z: np.zeros(X.shape[-1])
    zg = lambda X, Z: np.zeros_like(X)
    return MeanCurvatureOracle(name="minimal", value=z, grad_X=zg, grad_Z=zg)


def constant_mean_curvature_oracle(h0):
    return MeanCurvatureOracle(
        name=f"cmc({h0})",
        value=lambda X, Z: np.full(X.shape[-1], h0),
        grad_X=lambda X, Z: np.zeros_like(X),
        grad_Z=lambda X, Z: np.zeros_like(X))


def _wedge(a, b):
    """a^1 b^2 - a^2 b^1 for (n, m) vector batches (first two components)."""
    return a[0] * b[1] - a[1] * b[0]


def chi_pde_residual(analysis, ncurv=None, mode="general", h_oracle=None,
                     torsion_tol=1e-8):
    """Defect of the elliptic equation satisfied by the projection function.

    ``mode="general"`` uses the full identity (valid for any frame):
    5-point Delta chi against the curvature, normal-connection and
    mean-curvature-derivative terms.  ``mode="graph"`` uses the torsion-free
    graph form, with the mean-curvature derivatives supplied by a prescribed
    mean curvature oracle differentiated in both slots.
    """
    a = analysis
    patch, grid, met = a.patch, a.grid, a.metric
    require_conformal(patch, met, what="the chi equation")
    chifld = chi(patch, met, grid)
    lhs = laplacian5(chifld.chi, grid)

    u, v = grid.U[grid.disc], grid.V[grid.disc]
    dX = patch.eval_dX(u, v)
    N = a.frame.N[..., grid.disc]
    nn = N.shape[0]
    W = met.W[grid.disc]
    Hs = a.curv.H_sigma
    Ks = a.curv.K_sigma
    chiv = chifld.chi[grid.disc]

    # alpha_s = n_s^1 x_v^2 - n_s^2 x_v^1, beta_s likewise with x_u
    alpha = np.stack([_wedge(N[s], dX[:, 1]) for s in range(nn)])
    beta = np.stack([_wedge(N[s], dX[:, 0]) for s in range(nn)])

    if mode == "general":
        curv_term = -2.0 * np.sum(
            (2.0 * Hs ** 2 - Ks)[..., grid.disc], axis=0) * W * chiv
        if ncurv is None:
            ncurv = normal_curvature(a.torsion, grid)
        S = ncurv.S[..., grid.disc]
        nwedge = np.einsum("sm,wm->swm", N[:, 0], N[:, 1]) \
            - np.einsum("sm,wm->swm", N[:, 1], N[:, 0])
        s_term = np.einsum("swm,swm->m", S, nwedge)
        T = a.torsion.T[..., grid.disc]
        Hsd = Hs[..., grid.disc]
        t_term = 2.0 * np.einsum("wm,swm,sm->m", alpha, T[:, :, 0], Hsd) \
            - 2.0 * np.einsum("wm,swm,sm->m", beta, T[:, :, 1], Hsd)
        Hu = np.stack([d_du(Hs[s], grid) for s in range(nn)])
        Hv = np.stack([d_dv(Hs[s], grid) for s in range(nn)])
        h_term = 2.0 * np.einsum("sm,sm->m", Hu[..., grid.disc], alpha) \
            - 2.0 * np.einsum("sm,sm->m", Hv[..., grid.disc], beta)
        rhs_vals = curv_term + s_term + t_term + h_term
    elif mode == "graph":
        problems = []
        if not patch.is_graph:
            problems.append("patch is not a graph (x1=u, x2=v)")
        from ..surface_core.fields import max_torsion
        tmax = max_torsion(a.torsion, grid)
        if not (a.frame.torsion_free or tmax <= torsion_tol):
            problems.append(f"frame carries torsion (max |T| = {tmax:.3e})")
        if h_oracle is None:
            hmax = float(np.nanmax(np.abs(a.curv.H)))
            if hmax > MINIMAL_TOL:
                problems.append(
                    "no prescribed-mean-curvature oracle supplied and the "
                    f"patch is not minimal (max H = {hmax:.3e})")
            h_oracle = zero_mean_curvature_oracle(patch.n)
        if problems:
            raise PreconditionError(
                "graph-mode chi equation preconditions violated: "
                + "; ".join(problems))
        X = patch.eval_X(u, v)
        H2 = a.curv.H[grid.disc] ** 2
        K = a.curv.K[grid.disc]
        rhs_vals = -2.0 * (2.0 * H2 - K) * W * chiv
        Nu = a.frame.Nu[..., grid.disc]
        Nv = a.frame.Nv[..., grid.disc]
        for s in range(nn):
            gX = h_oracle.grad_X(X, N[s])
            gZ = h_oracle.grad_Z(X, N[s])
            du_H = np.einsum("km,km->m", gX, dX[:, 0]) \
                + np.einsum("km,km->m", gZ, Nu[s])
            dv_H = np.einsum("km,km->m", gX, dX[:, 1]) \
                + np.einsum("km,km->m", gZ, Nv[s])
            rhs_vals = rhs_vals + 2.0 * du_H * alpha[s] - 2.0 * dv_H * beta[s]
    else:
        raise ValueError(f"unknown mode {mode!r}")

    rhs = grid.new_field()
    rhs[grid.disc] = rhs_vals
    return _report(f"chi_pde[{mode}]", lhs - rhs, grid)


# ----------------------------------------------------------------------------
# graph route
# ----------------------------------------------------------------------------

@dataclass
class GraphBounds:
    chi_min: float
    h_min: float
    h1: float
    h2: float

    def validate(self):
        if min(self.h1, self.h2) < 0.0 or self.h_min < 0.0:
            raise PreconditionError("curvature bounds must be nonnegative")
        minimal = self.h1 == 0.0 and self.h2 == 0.0
        if not minimal and self.chi_min <= 0.0:
            raise PreconditionError(
                "the graph bound needs chi_min > 0 unless the patch is "
                "minimal")
        if not minimal and self.h_min <= 0.0:
            raise PreconditionError(
                "the graph bound needs h_min > 0 unless the patch is "
                "minimal")
        return minimal


def graph_mu_bound(bounds, n):
    """mu_max = 2 - sqrt(2)/chi_min [ (n-2)(h1+h2)/h_min + 2 h2 ].

    In the minimal case (h1 = h2 = 0) the bracket vanishes and the positive
    lower bound on chi is not needed; the bound is then mu_max = 2.
    """
    minimal = bounds.validate()
    if minimal:
        mu = 2.0
    else:
        bracket = (n - 2) * (bounds.h1 + bounds.h2) / bounds.h_min \
            + 2.0 * bounds.h2
        mu = 2.0 - np.sqrt(2.0) / bounds.chi_min * bracket
    certified = mu > 0.0
    return StabilityCertificate(
        route="graph_chi",
        verdict="certified" if certified else "not-certified",
        certified_mu=mu if certified else None,
        q_description="q = 2H^2 (graph of prescribed mean curvature)",
        constants={"chi_min": bounds.chi_min, "h_min": bounds.h_min,
                   "h1": bounds.h1, "h2": bounds.h2, "n": n,
                   "mu_formula": mu})


# ----------------------------------------------------------------------------
# cap route pieces
# ----------------------------------------------------------------------------

def total_curvature_Q(curv, met, kappa0, grid, k_tol=1e-8):
    """Q = int (kappa0 - K) W over B; the area in the rescaled metric."""
    if kappa0 <= 0.0:
        raise PreconditionError(f"kappa0 must be positive, got {kappa0}")
    K = curv.K
    kmax = float(np.nanmax(K))
    if kmax > k_tol:
        raise PreconditionError(
            f"the cap route needs K <= 0 (minimal context); max K = "
            f"{kmax:.3e}")
    dens = np.where(grid.disc, (kappa0 - K) * met.W, np.nan)
    return integrate(dens, grid)


def conformal_gauss_curvature(curv, met, kappa0, patch, grid):
    """Gauss curvature of the conformally rescaled metric (kappa0 - K) g.

    K_hat = (K - (1/W) Delta log sqrt(kappa0 - K)) / (kappa0 - K), computed
    with the 5-point Laplacian.  Returns the field and its interior max.
    """
    require_conformal(patch, met, what="the rescaled-curvature bound")
    gamma = kappa0 - curv.K
    gmin = float(np.nanmin(gamma))
    if gmin <= 0.0:
        raise PreconditionError(
            f"kappa0 - K must stay positive (min {gmin:.3e})")
    lg = laplacian5(np.log(np.sqrt(gamma)), grid)
    khat = (curv.K - lg / met.W) / gamma
    return khat, interior_max(np.where(grid.interior, khat, np.nan), grid)


# ----------------------------------------------------------------------------
# certificates
# ----------------------------------------------------------------------------

@dataclass
class StabilityCertificate:
    route: str
    verdict: str                     # certified | not-certified | inapplicable
    certified_mu: Optional[float]
    q_description: str
    constants: dict = field(default_factory=dict)

    @property
    def certified(self):
        return self.verdict == "certified"

    def to_dict(self):
        consts = {}
        for k, val in self.constants.items():
            if isinstance(val, (np.floating, np.integer)):
                val = val.item()
            consts[k] = val
        return {"route": self.route, "verdict": self.verdict,
                "certified_mu": self.certified_mu,
                "q_description": self.q_description, "constants": consts}


def grid_field_to_fn(field_vals, grid):
    """Bilinear interpolant of a disc field, nearest-filled outside B."""
    filled = np.array(field_vals, dtype=float)
    hole = ~np.isfinite(filled)
    # simple deterministic dilation fill: average of finite 4-neighbours
    for _ in range(grid.resolution):
        if not hole.any():
            break
        nb_sum = np.zeros_like(filled)
        nb_cnt = np.zeros_like(filled)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            sh = np.roll(np.roll(np.where(hole, 0.0, filled), di, axis=0),
                         dj, axis=1)
            ok = np.roll(np.roll(~hole, di, axis=0), dj, axis=1)
            nb_sum += np.where(ok, sh, 0.0)
            nb_cnt += ok
        newly = hole & (nb_cnt > 0)
        filled[newly] = nb_sum[newly] / nb_cnt[newly]
        hole[newly] = False
    interp = RegularGridInterpolator((grid.us, grid.us), filled,
                                     method="linear", bounds_error=False,
                                     fill_value=None)

    def fn(x, y):
        pts = np.column_stack([np.asarray(x).ravel(), np.asarray(y).ravel()])
        return interp(pts)

    return fn


def mu_stability_check(patch, met, curv, q_field, mu, grid, mesh_size=0.1,
                       levels=3, guard=STRICT_GUARD):
    """Direct check of the stability definition by a first-eigenvalue solve.

    The weight is (q - K) W; certification requires lambda_1 >= mu up to the
    strict-inequality guard, or a vacuous (identically ~0) weight.
    """
    q = np.where(grid.disc, q_field, np.nan)
    diff = q - curv.K
    dmin = float(np.nanmin(diff))
    if dmin < -1e-10:
        return StabilityCertificate(
            route="definition", verdict="inapplicable", certified_mu=None,
            q_description="q - K < 0 somewhere",
            constants={"min_q_minus_K": dmin, "mu_requested": mu})
    weight = diff * met.W
    fn = grid_field_to_fn(weight, grid)
    res = weighted_first_eigenvalue(fn, mesh_size=mesh_size, levels=levels)
    consts = {"mu_requested": mu, "mesh_size": mesh_size,
              "min_q_minus_K": dmin}
    if res.vacuous:
        return StabilityCertificate(
            route="definition", verdict="certified", certified_mu=mu,
            q_description="vacuous weight: (q-K)W ~ 0, every mu certifiable",
            constants=dict(consts, vacuous=True))
    consts["lambda1"] = res.lambda1
    consts["refinement_history"] = [list(map(float, hw))
                                    for hw in res.refinement_history]
    ok = res.lambda1 >= mu * (1.0 + guard)
    return StabilityCertificate(
        route="definition", verdict="certified" if ok else "not-certified",
        certified_mu=mu if ok else None,
        q_description="first eigenvalue of the (q-K)W-weighted disc problem",
        constants=consts)


def barbosa_docarmo_certificate(analysis, kappa0, omega0, mesh_size=0.1,
                                crit_tol=MINIMAL_TOL, guard=STRICT_GUARD):
    """Cap-comparison certificate for minimal patches with torsion-free frames.

    Computes the rescaled area Q, requires Q < omega0 < 4 pi strictly, takes
    mu as the cap eigenvalue, corroborates the rescaled-curvature bound
    K_hat <= 1, and independently validates the conclusion through the
    direct eigenvalue check with q = 0.
    """
    a = analysis
    patch, grid = a.patch, a.grid
    consts = {"kappa0": kappa0, "omega0": omega0}
    hmax = float(np.nanmax(np.abs(a.curv.H)))
    consts["max_H"] = hmax
    if hmax > crit_tol:
        return StabilityCertificate(
            route="cap_eigenvalue", verdict="inapplicable", certified_mu=None,
            q_description="patch is not minimal", constants=consts)
    if patch.n > 3 and not a.frame.torsion_free:
        from ..surface_core.fields import max_torsion
        tmax = max_torsion(a.torsion, grid)
        consts["max_torsion"] = tmax
        if tmax > 1e-8:
            return StabilityCertificate(
                route="cap_eigenvalue", verdict="inapplicable",
                certified_mu=None,
                q_description="frame carries torsion; a torsion-free frame "
                              "is required", constants=consts)
    if not 0.0 < omega0 < 4.0 * np.pi:
        return StabilityCertificate(
            route="cap_eigenvalue", verdict="not-certified", certified_mu=None,
            q_description="omega0 outside (0, 4 pi)", constants=consts)
    Q = total_curvature_Q(a.curv, a.metric, kappa0, grid)
    consts["Q"] = Q
    if not Q < omega0 * (1.0 - guard):
        consts["deficit"] = Q - omega0
        return StabilityCertificate(
            route="cap_eigenvalue", verdict="not-certified", certified_mu=None,
            q_description="rescaled area does not stay below the cap area",
            constants=consts)
    mu = cap_eigenvalue(omega0)
    consts["mu_cap"] = mu
    _, khat_max = conformal_gauss_curvature(a.curv, a.metric, kappa0, patch,
                                            grid)
    consts["khat_max"] = khat_max
    consts["khat_bound"] = 1.0 + 5.0 * grid.h ** 2
    direct = mu_stability_check(patch, a.metric, a.curv,
                                np.zeros_like(a.curv.K), mu, grid,
                                mesh_size=mesh_size)
    consts["direct_check"] = direct.to_dict()
    ok = direct.certified and khat_max <= 1.0 + 5.0 * grid.h ** 2
    return StabilityCertificate(
        route="cap_eigenvalue", verdict="certified" if ok else "not-certified",
        certified_mu=mu if ok else None,
        q_description="q = 0; mu from the spherical-cap eigenvalue",
        constants=consts)


def stability_threshold_check(analysis, a_bound, kappa0=0.01,
                              guard=STRICT_GUARD):
    """Total-curvature threshold: stable with mu = 2 when
    int (-K) W <= 4 pi / (1 + a), given the rescaled curvature stays <= a."""
    an = analysis
    if not 0.0 < a_bound <= 2.0:
        raise PreconditionError(f"a must lie in (0, 2], got {a_bound}")
    hmax = float(np.nanmax(np.abs(an.curv.H)))
    if hmax > MINIMAL_TOL:
        return StabilityCertificate(
            route="cap_eigenvalue", verdict="inapplicable", certified_mu=None,
            q_description="threshold check requires a minimal patch",
            constants={"max_H": hmax})
    _, khat_max = conformal_gauss_curvature(an.curv, an.metric, kappa0,
                                            an.patch, an.grid)
    consts = {"a": a_bound, "kappa0": kappa0, "khat_max": khat_max}
    slack = 5.0 * an.grid.h ** 2
    if khat_max > a_bound + slack:
        return StabilityCertificate(
            route="cap_eigenvalue", verdict="inapplicable", certified_mu=None,
            q_description="rescaled curvature exceeds the assumed bound",
            constants=consts)
    tc = integrate(np.where(an.grid.disc, (-an.curv.K) * an.metric.W, np.nan),
                   an.grid)
    threshold = 4.0 * np.pi / (1.0 + a_bound)
    consts["total_curvature"] = tc
    consts["threshold"] = threshold
    ok = tc < threshold * (1.0 - guard)
    # the integral carries O(h^2) quadrature error; flag near-ties as such
    near = max(1e-6, 10.0 * an.grid.h ** 2) * threshold
    if not ok and abs(tc - threshold) <= near:
        consts["boundary_case"] = True
    return StabilityCertificate(
        route="cap_eigenvalue", verdict="certified" if ok else "not-certified",
        certified_mu=2.0 if ok else None,
        q_description="total-curvature threshold with mu = 2",
        constants=consts)
