"""Weighted-area functional: value, first/second variation, and bounds.

The closed-form variation formulas here are pointwise identities in the
integrand (no integration by parts is involved), so the finite-difference
oracle — which differentiates the functional through the actual perturbed
immersion — must agree with them node by node up to stencil error.  That
agreement is the main correctness instrument of this module.

Normal variations X + eps*phi*N_gamma only; tangential variations are out of
scope.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import OracleError, PreconditionError, WeightError
from .surface_core.fields import require_conformal

CRIT_TOL = 1e-6


# ----------------------------------------------------------------------------
# weights, test functions, variation directions
# ----------------------------------------------------------------------------

@dataclass
class Weight:
    """Positive C^2 weight on R^n with analytic gradient.

    ``value`` maps (n, m) point batches to (m,), ``grad`` to (n, m).  The
    Hessian quadratic form needed by the second variation is produced by one
    finite-difference level on the analytic gradient.
    """

    name: str
    value: Callable
    grad: Callable

    def bounds_on(self, X):
        vals = self.value(X)
        lo, hi = float(vals.min()), float(vals.max())
        if lo <= 0.0:
            raise WeightError(
                f"weight {self.name!r} is nonpositive on the patch "
                f"(min {lo:.3e})")
        return lo, hi

    def hess_quad(self, X, Z, delta=1e-4):
        """Z^T Gamma_XX(X) Z by central differences of the gradient."""
        step = delta * (1.0 + np.abs(X).max())
        gp = self.grad(X + step * Z)
        gm = self.grad(X - step * Z)
        return np.einsum("km,km->m", Z, (gp - gm) / (2.0 * step))


def weight_const():
    return Weight(name="const",
                  value=lambda X: np.ones(X.shape[-1]),
                  grad=lambda X: np.zeros_like(X))


def weight_exp_coord(axis, c=1.0, name=None):
    """Gamma(X) = exp(c * x^axis); axis counts from 0."""
    def val(X):
        return np.exp(c * X[axis])

    def grad(X):
        g = np.zeros_like(X)
        g[axis] = c * np.exp(c * X[axis])
        return g

    return Weight(name=name or f"exp_x{axis + 1}", value=val, grad=grad)


def weight_radial():
    """Gamma(X) = 1 + |X|^2."""
    return Weight(name="radial",
                  value=lambda X: 1.0 + np.einsum("km,km->m", X, X),
                  grad=lambda X: 2.0 * X)


WEIGHT_PRESETS = {
    "const": weight_const,
    "exp_x3": lambda: weight_exp_coord(2, 1.0, name="exp_x3"),
    "radial": weight_radial,
}


def weight_preset(name):
    if name not in WEIGHT_PRESETS:
        raise WeightError(f"unknown weight preset {name!r}; "
                          f"have {sorted(WEIGHT_PRESETS)}")
    return WEIGHT_PRESETS[name]()


@dataclass
class TestFunction:
    """Compactly supported C^1 test function with analytic gradient."""

    name: str
    value: Callable           # (u, v) -> (m,)
    grad: Callable            # (u, v) -> (2, m)
    support_radius: float


def bump_radial(rho=0.8, amplitude=1.0, center=(0.0, 0.0)):
    """phi = A (1 - r^2/rho^2)^2 inside the support disc, 0 outside."""
    cu, cv = center
    if rho + np.hypot(cu, cv) >= 1.0:
        raise PreconditionError("bump support must stay inside the unit disc")

    def val(u, v):
        s = ((u - cu) ** 2 + (v - cv) ** 2) / rho ** 2
        return amplitude * np.where(s < 1.0, (1.0 - s) ** 2, 0.0)

    def grad(u, v):
        s = ((u - cu) ** 2 + (v - cv) ** 2) / rho ** 2
        f = np.where(s < 1.0, -4.0 * amplitude * (1.0 - s) / rho ** 2, 0.0)
        return np.stack([f * (u - cu), f * (v - cv)])

    return TestFunction(name=f"radial(rho={rho})", value=val, grad=grad,
                        support_radius=rho + np.hypot(cu, cv))


def bump_tensor(rho=0.8, amplitude=1.0):
    """phi = A b(u/a) b(v/a), b(t) = (1-t^2)^2, with a = rho/sqrt(2)."""
    a = rho / np.sqrt(2.0)

    def b(t):
        return np.where(np.abs(t) < 1.0, (1.0 - t ** 2) ** 2, 0.0)

    def db(t):
        return np.where(np.abs(t) < 1.0, -4.0 * t * (1.0 - t ** 2), 0.0)

    def val(u, v):
        return amplitude * b(u / a) * b(v / a)

    def grad(u, v):
        return np.stack([amplitude * db(u / a) * b(v / a) / a,
                         amplitude * b(u / a) * db(v / a) / a])

    return TestFunction(name=f"tensor(rho={rho})", value=val, grad=grad,
                        support_radius=rho)


PHI_PRESETS = {
    "radial": bump_radial,
    "tensor": bump_tensor,
}


@dataclass
class VariationDirection:
    """Unit coefficient field gamma^sigma selecting the variation normal."""

    name: str
    gamma: Callable           # (u, v) -> (nn, m)
    dgamma: Callable          # (u, v) -> (nn, 2, m)
    count: int

    def check_unit(self, u, v, tol=1e-12):
        g = self.gamma(u, v)
        err = np.abs(np.einsum("sm,sm->m", g, g) - 1.0).max()
        if err > tol:
            raise PreconditionError(
                f"direction {self.name!r} is not unit: defect {err:.3e}")


def direction_constant(coeffs):
    """Constant direction; coefficients are normalized exactly."""
    c = np.asarray(coeffs, dtype=float)
    c = c / np.linalg.norm(c)
    nn = c.size

    def gamma(u, v):
        return np.repeat(c[:, None], u.size, axis=1)

    def dgamma(u, v):
        return np.zeros((nn, 2, u.size))

    return VariationDirection(name=f"constant{tuple(np.round(c, 6))}",
                              gamma=gamma, dgamma=dgamma, count=nn)


def direction_angle(a=1.0, b=0.0, c0=0.0, count=2):
    """gamma = (cos alpha, sin alpha, 0, ...) with alpha = a*u + b*v + c0."""
    if count < 2:
        raise PreconditionError("angle directions need at least two normals")

    def gamma(u, v):
        al = a * u + b * v + c0
        g = np.zeros((count, u.size))
        g[0], g[1] = np.cos(al), np.sin(al)
        return g

    def dgamma(u, v):
        al = a * u + b * v + c0
        d = np.zeros((count, 2, u.size))
        d[0, 0], d[0, 1] = -a * np.sin(al), -b * np.sin(al)
        d[1, 0], d[1, 1] = a * np.cos(al), b * np.cos(al)
        return d

    return VariationDirection(name=f"angle({a},{b},{c0})", gamma=gamma,
                              dgamma=dgamma, count=count)


# ----------------------------------------------------------------------------
# functional value and variations
# ----------------------------------------------------------------------------

def _disc_points(patch, grid):
    u, v = grid.U[grid.disc], grid.V[grid.disc]
    return u, v, patch.eval_X(u, v)


def _disc_integral(vals, grid):
    w = grid.cell_weights[grid.disc]
    return float(np.sum(vals * w))


def fermat_value(patch, weight, grid):
    """Quadrature of Gamma(X) W over the disc."""
    u, v, X = _disc_points(patch, grid)
    gamma = weight.value(X)
    if gamma.min() <= 0.0:
        raise WeightError(
            f"weight {weight.name!r} sampled nonpositive on {patch.name!r}")
    dX = patch.eval_dX(u, v)
    g11 = np.einsum("km,km->m", dX[:, 0], dX[:, 0])
    g12 = np.einsum("km,km->m", dX[:, 0], dX[:, 1])
    g22 = np.einsum("km,km->m", dX[:, 1], dX[:, 1])
    W = np.sqrt(g11 * g22 - g12 ** 2)
    return _disc_integral(gamma * W, grid)


def prescribed_mean_curvature(weight, patch, frame, direction, grid):
    """H(X, N_gamma) = Gamma_X(X) . N_gamma / (2 Gamma(X)) as a grid field."""
    u, v, X = _disc_points(patch, grid)
    gam = direction.gamma(u, v)
    N = np.einsum("sm,skm->km", gam, frame.N[..., grid.disc])
    H = np.einsum("km,km->m", weight.grad(X), N) / (2.0 * weight.value(X))
    out = grid.new_field()
    out[grid.disc] = H
    return out


def criticality_defect(patch, weight, frame, direction, curv, grid):
    """Sup-norm of the Euler-Lagrange defect along the chosen direction."""
    u, v = grid.U[grid.disc], grid.V[grid.disc]
    gam = direction.gamma(u, v)
    Hgeo = np.einsum("sm,sm->m", gam, curv.H_sigma[..., grid.disc])
    Hw = prescribed_mean_curvature(weight, patch, frame, direction, grid)
    return float(np.abs(Hw[grid.disc] - Hgeo).max())


def first_variation(patch, weight, frame, direction, phi, curv, grid):
    """d/deps of the weighted area along phi*N_gamma (valid for any patch)."""
    u, v, X = _disc_points(patch, grid)
    direction.check_unit(u, v)
    gam = direction.gamma(u, v)
    N = np.einsum("sm,skm->km", gam, frame.N[..., grid.disc])
    Hgeo = np.einsum("sm,sm->m", gam, curv.H_sigma[..., grid.disc])
    gm = weight.value(X)
    integrand = (np.einsum("km,km->m", weight.grad(X), N)
                 - 2.0 * gm * Hgeo)
    # metric area element from the analysis would do; recompute keeps the
    # function self-contained
    dX = patch.eval_dX(u, v)
    W = np.sqrt(np.einsum("km,km->m", dX[:, 0], dX[:, 0])
                * np.einsum("km,km->m", dX[:, 1], dX[:, 1])
                - np.einsum("km,km->m", dX[:, 0], dX[:, 1]) ** 2)
    return _disc_integral(integrand * W * phi.value(u, v), grid)


def _direction_gradient_terms(direction, tors, grid):
    """sum_s (gamma_u^s + gamma^w T^s_{w,1})^2 + (gamma_v^s + ...)^2 field."""
    u, v = grid.U[grid.disc], grid.V[grid.disc]
    gam = direction.gamma(u, v)
    dgam = direction.dgamma(u, v)
    T = tors.T[..., grid.disc]
    out = np.zeros(u.size)
    for i in range(2):
        term = dgam[:, i] + np.einsum("wm,wsm->sm", gam, T[:, :, i])
        out = out + np.einsum("sm,sm->m", term, term)
    field_ = grid.new_field()
    field_[grid.disc] = out
    return field_


def second_variation_area_element(patch, frame, direction, tors, shape, met,
                                  phi, grid):
    """Pointwise second variation of the area element (conformal parameters).

    Returns the field |grad phi|^2 + 2 K_gamma W phi^2 + (direction-gradient
    + torsion coupling) phi^2, which equals d^2/deps^2 of the perturbed area
    element at eps = 0 node by node.
    """
    require_conformal(patch, met, what="the area-element second variation")
    u, v = grid.U[grid.disc], grid.V[grid.disc]
    gam = direction.gamma(u, v)
    L = shape.L[..., grid.disc]
    Lg = np.einsum("sm,sijm->ijm", gam, L)
    W = met.W[grid.disc]
    Kg = (Lg[0, 0] * Lg[1, 1] - Lg[0, 1] ** 2) / W ** 2
    gphi = phi.grad(u, v)
    pv = phi.value(u, v)
    tterm = _direction_gradient_terms(direction, tors, grid)[grid.disc]
    vals = (np.einsum("im,im->m", gphi, gphi) + 2.0 * Kg * W * pv ** 2
            + tterm * pv ** 2)
    out = grid.new_field()
    out[grid.disc] = vals
    return out


def second_variation_fermat(patch, weight, frame, direction, tors, shape,
                            curv, met, phi, grid, mode="printed",
                            torsion_measure="printed", check_critical=True,
                            crit_tol=CRIT_TOL, return_parts=False):
    """Second variation of the weighted area functional.

    ``mode="printed"`` evaluates the critical-point formula: the weighted
    Dirichlet term, the curvature block 2{H_X.N - 2H_gamma^2 + K_gamma} with
    the geometric H_gamma, and the torsion/direction integral (without an
    area-element factor; ``torsion_measure="area"`` switches the W factor on
    for diagnostics).  ``mode="general"`` adds 4 (H_w - H_gamma)^2 Gamma W
    phi^2, which turns the formula into the exact second eps-derivative for
    arbitrary, not necessarily critical, configurations.
    """
    require_conformal(patch, met, what="the second variation")
    if mode not in ("printed", "general"):
        raise ValueError(f"unknown mode {mode!r}")
    u, v, X = _disc_points(patch, grid)
    direction.check_unit(u, v)
    gam = direction.gamma(u, v)
    Nfr = frame.N[..., grid.disc]
    Ng = np.einsum("sm,skm->km", gam, Nfr)
    gm = weight.value(X)
    Hw = np.einsum("km,km->m", weight.grad(X), Ng) / (2.0 * gm)
    Hgeo = np.einsum("sm,sm->m", gam, curv.H_sigma[..., grid.disc])

    if check_critical and mode == "printed":
        defect = float(np.abs(Hw - Hgeo).max())
        if defect > crit_tol:
            raise PreconditionError(
                f"{patch.name!r} is not critical for weight {weight.name!r} "
                f"along {direction.name!r}: Euler-Lagrange defect "
                f"{defect:.3e} exceeds {crit_tol:.1e}; use mode='general' "
                "for off-critical configurations")

    # H_X(X, N_gamma) . N_gamma from the weight, direction frozen
    HX_N = weight.hess_quad(X, Ng) / (2.0 * gm) - 2.0 * Hw ** 2

    W = met.W[grid.disc]
    L = shape.L[..., grid.disc]
    Lg = np.einsum("sm,sijm->ijm", gam, L)
    Kg = (Lg[0, 0] * Lg[1, 1] - Lg[0, 1] ** 2) / W ** 2

    pv = phi.value(u, v)
    gphi = phi.grad(u, v)
    wcell = grid.cell_weights[grid.disc]

    dirichlet = float(np.sum(gm * np.einsum("im,im->m", gphi, gphi) * wcell))
    curv_coef = HX_N - 2.0 * Hgeo ** 2 + Kg
    if mode == "general":
        curv_coef = curv_coef + 2.0 * (Hw - Hgeo) ** 2
    curvature = float(np.sum(2.0 * curv_coef * gm * W * pv ** 2 * wcell))
    tdens = _direction_gradient_terms(direction, tors, grid)[grid.disc]
    tfactor = W if torsion_measure == "area" else 1.0
    torsional = float(np.sum(tdens * gm * pv ** 2 * tfactor * wcell))

    total = dirichlet + curvature + torsional
    if return_parts:
        return total, {"dirichlet": dirichlet, "curvature": curvature,
                       "torsion": torsional}
    return total


# ----------------------------------------------------------------------------
# finite-difference oracle
# ----------------------------------------------------------------------------

def _perturbed_area_element(patch, weight, frame, direction, phi, grid, eps):
    """(Gamma(X~) W~, W~) of X~ = X + eps phi N_gamma at the disc nodes."""
    u, v, X = _disc_points(patch, grid)
    dX = patch.eval_dX(u, v)
    gam = direction.gamma(u, v)
    dgam = direction.dgamma(u, v)
    Nfr = frame.N[..., grid.disc]
    Ng = np.einsum("sm,skm->km", gam, Nfr)
    dN = [np.einsum("sm,skm->km", dgam[:, i], Nfr)
          + np.einsum("sm,skm->km", gam,
                      (frame.Nu if i == 0 else frame.Nv)[..., grid.disc])
          for i in range(2)]
    pv = phi.value(u, v)
    gphi = phi.grad(u, v)
    Xu = dX[:, 0] + eps * (gphi[0] * Ng + pv * dN[0])
    Xv = dX[:, 1] + eps * (gphi[1] * Ng + pv * dN[1])
    g11 = np.einsum("km,km->m", Xu, Xu)
    g12 = np.einsum("km,km->m", Xu, Xv)
    g22 = np.einsum("km,km->m", Xv, Xv)
    det = g11 * g22 - g12 ** 2
    if det.min() <= 0.0:
        raise OracleError(
            f"perturbed immersion degenerates at eps={eps:.3e}; "
            "use a smaller stencil step")
    Wt = np.sqrt(det)
    Xt = X + eps * pv * Ng
    return weight.value(Xt) * Wt, Wt


def fd_variation_oracle(patch, weight, frame, direction, phi, grid, order,
                        eps=None, richardson=True):
    """Centered eps-stencil derivative of the weighted area functional.

    5-point stencils (4th order) with one Richardson level by default.
    ``order`` is 1 or 2.
    """
    if order not in (1, 2):
        raise OracleError(f"order must be 1 or 2, got {order}")
    u, v = grid.U[grid.disc], grid.V[grid.disc]
    pv = phi.value(u, v)
    gphi = phi.grad(u, v)
    scale = 1.0 + max(np.abs(pv).max(), np.abs(gphi).max())
    if eps is None:
        eps = 0.02 / scale

    wcell = grid.cell_weights[grid.disc]

    def F(e):
        dens, _ = _perturbed_area_element(patch, weight, frame, direction,
                                          phi, grid, e)
        return float(np.sum(dens * wcell))

    for _ in range(8):
        try:
            _perturbed_area_element(patch, weight, frame, direction, phi,
                                    grid, 2.0 * eps)
            _perturbed_area_element(patch, weight, frame, direction, phi,
                                    grid, -2.0 * eps)
            break
        except OracleError:
            eps *= 0.5
    else:
        raise OracleError("could not find a stencil step keeping the "
                          "immersion nondegenerate")

    def stencil(e):
        if order == 1:
            return (F(-2 * e) - 8 * F(-e) + 8 * F(e) - F(2 * e)) / (12 * e)
        return (-F(-2 * e) + 16 * F(-e) - 30 * F(0.0) + 16 * F(e)
                - F(2 * e)) / (12 * e * e)

    a = stencil(eps)
    if not richardson:
        return a
    b = stencil(0.5 * eps)
    return (16.0 * b - a) / 15.0


def area_element_second_derivative_stencil(patch, frame, direction, phi,
                                           grid, eps=1e-3):
    """Nodewise d^2/deps^2 of W~ by a 5-point stencil (oracle for the
    area-element second variation)."""
    weight = weight_const()

    def Wfield(e):
        _, Wt = _perturbed_area_element(patch, weight, frame, direction,
                                        phi, grid, e)
        return Wt

    vals = (-Wfield(-2 * eps) + 16 * Wfield(-eps) - 30 * Wfield(0.0)
            + 16 * Wfield(eps) - Wfield(2 * eps)) / (12 * eps * eps)
    out = grid.new_field()
    out[grid.disc] = vals
    return out


# ----------------------------------------------------------------------------
# mu bounds from the variational corollaries
# ----------------------------------------------------------------------------

@dataclass
class FermatBound:
    mu_max: float
    q_field: np.ndarray
    q_minus_K_min: float
    gamma_min: float
    gamma_max: float

    def describe(self):
        return (f"q = 2 H(X,N)^2 - H_X(X,N).N from weight; "
                f"mu_max = 2*{self.gamma_min:.6g}/{self.gamma_max:.6g}")


def fermat_mu_bound(weight, patch, frame, curv, grid):
    """Stability bound for weighted-minimal surfaces in R^3.

    mu_max = 2 Gamma_min / Gamma_max with q = 2H^2 - H_X . N computed from
    the weight; requires q - K >= 0 nodewise.
    """
    if patch.n != 3:
        raise PreconditionError(
            f"the weighted bound applies to n = 3 only; {patch.name!r} has "
            f"n = {patch.n}")
    u, v, X = _disc_points(patch, grid)
    N = frame.N[0][..., grid.disc]
    gm = weight.value(X)
    lo, hi = weight.bounds_on(X)
    Hw = np.einsum("km,km->m", weight.grad(X), N) / (2.0 * gm)
    HX_N = weight.hess_quad(X, N) / (2.0 * gm) - 2.0 * Hw ** 2
    q = 2.0 * Hw ** 2 - HX_N
    K = curv.K[grid.disc]
    margin = float((q - K).min())
    if margin < -1e-10:
        raise PreconditionError(
            f"q - K is negative somewhere (min {margin:.3e}); the weighted "
            "bound does not apply")
    qf = grid.new_field()
    qf[grid.disc] = q
    return FermatBound(mu_max=2.0 * lo / hi, q_field=qf, q_minus_K_min=margin,
                       gamma_min=lo, gamma_max=hi)


@dataclass
class FlatMinimalBound:
    mu_max: Optional[float]
    n: int
    total_torsion: float
    certified: bool
    note: str = ""

    def describe(self):
        if self.certified:
            return f"mu_max = 2/(n-2) = {self.mu_max:.6g} (torsion-free frame)"
        return self.note


def minimal_flat_bound(n, total_torsion_value, torsion_tol=1e-8):
    """mu bound for stable minimal immersions with flat normal bundle.

    With a torsion-free frame the bound is 2/(n-2).  A frame carrying
    torsion yields only the correction-report form: the stability inequality
    picks up -1/(n-2) times the total torsion and no certificate is issued.
    """
    if n < 3:
        raise PreconditionError(f"ambient dimension must be >= 3, got {n}")
    if total_torsion_value <= torsion_tol:
        return FlatMinimalBound(mu_max=2.0 / (n - 2), n=n,
                                total_torsion=total_torsion_value,
                                certified=True)
    return FlatMinimalBound(
        mu_max=None, n=n, total_torsion=total_torsion_value, certified=False,
        note=(f"frame carries total torsion {total_torsion_value:.6g}; "
              f"stability inequality weakens by {1.0/(n-2):.6g} * total "
              "torsion * sup phi^2 and no certificate is issued"))
