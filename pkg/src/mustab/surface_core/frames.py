"""Orthonormal sections of the normal bundle and their derivative fields.

A frame here is always carried together with its first-derivative fields,
because every downstream identity (Weingarten, torsion, variation formulas)
consumes N_{sigma,u^i}.  Derivatives are propagated analytically through the
Gram-Schmidt recursion as forward-mode jets seeded by the patch's first and
second derivatives, so frame quality is limited only by the patch closures.

Frames are evaluable on arbitrary point batches (needed by the parallel
transport ODE, which leaves the lattice), and are sampled onto a grid as a
:class:`NormalFrame` for field work.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import FrameConstructionError, NonFlatBundleError
from .surfaces import _as_batch

FRAME_TOL = 1e-10
TORSION_TOL = 1e-8

# a "jet" is a (value, d/du, d/dv) triple of (n, m) arrays (vector jets)
# or of (m,) arrays (scalar jets)


def _jdot(a, b):
    return tuple(np.einsum("km,km->m", a[i], b[0])
                 + (np.einsum("km,km->m", a[0], b[i]) if i else 0.0)
                 for i in range(3))


def _jsub_scaled(x, c, y):
    """x - c*y for scalar jet c and vector jets x, y."""
    return (x[0] - c[0] * y[0],
            x[1] - c[1] * y[0] - c[0] * y[1],
            x[2] - c[2] * y[0] - c[0] * y[2])


def _jnormalize(x):
    n2 = _jdot(x, x)
    n = np.sqrt(n2[0])
    inv = (1.0 / n, -0.5 * n2[1] / (n * n2[0]), -0.5 * n2[2] / (n * n2[0]))
    return ((x[0] * inv[0],
             x[1] * inv[0] + x[0] * inv[1],
             x[2] * inv[0] + x[0] * inv[2]), n)


def _tangent_jets(patch, u, v):
    dX = patch.eval_dX(u, v)
    d2X = patch.eval_d2X(u, v)
    Xu = (dX[:, 0], d2X[:, 0], d2X[:, 1])
    Xv = (dX[:, 1], d2X[:, 1], d2X[:, 2])
    return Xu, Xv


def _jcross(a, b):
    """Cross product of 3-vector jets."""
    def cr(x, y):
        return np.stack([x[1] * y[2] - x[2] * y[1],
                         x[2] * y[0] - x[0] * y[2],
                         x[0] * y[1] - x[1] * y[0]])
    return (cr(a[0], b[0]),
            cr(a[1], b[0]) + cr(a[0], b[1]),
            cr(a[2], b[0]) + cr(a[0], b[2]))


class GramSchmidtField:
    """Pointwise frame evaluator: ambient basis orthonormalized past the tangent.

    Candidate seeds are e_3,...,e_n followed by e_1, e_2; a candidate whose
    projection norm drops below ``frame_tol`` anywhere in the batch is skipped
    deterministically (this happens e.g. when an ambient axis is everywhere
    tangent-plus-used-normals, as on the Clifford patch).

    For n = 3 the unique normal line is realized as the normalized cross
    product X_u x X_v, oriented to agree with the e_3-seeded branch; this
    avoids the isolated renormalization breakdowns the seeded recursion has
    where the normal is orthogonal to e_3.
    """

    def __init__(self, patch, frame_tol=FRAME_TOL):
        self.patch = patch
        self.frame_tol = frame_tol
        self._sign3 = None

    def _cross_sign(self):
        # one global orientation choice: agree with the e_3 branch at the center
        if self._sign3 is None:
            z = np.zeros(1)
            Xu, Xv = _tangent_jets(self.patch, z, z)
            c3 = float(_jcross(Xu, Xv)[0][2, 0])
            self._sign3 = -1.0 if c3 < 0 else 1.0
        return self._sign3

    def __call__(self, u, v):
        u, v = _as_batch(u, v)
        patch = self.patch
        n, m = patch.n, u.size
        Xu, Xv = _tangent_jets(patch, u, v)
        if n == 3:
            cross = _jcross(Xu, Xv)
            sign = self._cross_sign()
            nrm, _ = _jnormalize((sign * cross[0], sign * cross[1],
                                  sign * cross[2]))
            return (nrm[0][None], nrm[1][None], nrm[2][None])
        t1, _ = _jnormalize(Xu)
        t2, _ = _jnormalize(_jsub_scaled(Xv, _jdot(Xv, t1), t1))
        basis = [t1, t2]
        normals = []
        zero = np.zeros((n, m))
        for idx in list(range(2, n)) + [0, 1]:
            if len(normals) == n - 2:
                break
            e = zero.copy()
            e[idx] = 1.0
            cand = (e, zero, zero)
            for b in basis:
                cand = _jsub_scaled(cand, _jdot(cand, b), b)
            norm = np.sqrt(np.einsum("km,km->m", cand[0], cand[0]))
            if norm.min() < self.frame_tol:
                continue
            nrm, _ = _jnormalize(cand)
            basis.append(nrm)
            normals.append(nrm)
        if len(normals) != n - 2:
            raise FrameConstructionError(
                f"Gram-Schmidt exhausted the ambient basis on {patch.name!r}; "
                "try a different seed order or supply a frame")
        N = np.stack([a[0] for a in normals])
        Nu = np.stack([a[1] for a in normals])
        Nv = np.stack([a[2] for a in normals])
        return N, Nu, Nv


class PreferredField:
    """Wraps a patch's analytic preferred frame closure."""

    def __init__(self, patch):
        if patch.preferred_frame is None:
            raise FrameConstructionError(
                f"{patch.name!r} carries no preferred frame")
        self.patch = patch

    def __call__(self, u, v):
        u, v = _as_batch(u, v)
        return self.patch.preferred_frame(u, v)


class RotatedField:
    """Base frame rotated pointwise by an angle field in a normal 2-plane.

    ``theta`` is a triple of callables (value, d/du, d/dv) so the rotated
    derivative fields stay analytic.
    """

    def __init__(self, base, theta, plane=(0, 1)):
        self.base = base
        self.theta = theta
        self.plane = plane

    def __call__(self, u, v):
        u, v = _as_batch(u, v)
        N, Nu, Nv = self.base(u, v)
        N, Nu, Nv = N.copy(), Nu.copy(), Nv.copy()
        i, j = self.plane
        th = self.theta[0](u, v)
        thu = self.theta[1](u, v)
        thv = self.theta[2](u, v)
        c, s = np.cos(th), np.sin(th)
        Ai, Aj = N[i].copy(), N[j].copy()
        Aiu, Aju = Nu[i].copy(), Nu[j].copy()
        Aiv, Ajv = Nv[i].copy(), Nv[j].copy()
        N[i] = c * Ai + s * Aj
        N[j] = -s * Ai + c * Aj
        Nu[i] = c * Aiu + s * Aju + thu * (-s * Ai + c * Aj)
        Nu[j] = -s * Aiu + c * Aju - thu * (c * Ai + s * Aj)
        Nv[i] = c * Aiv + s * Ajv + thv * (-s * Ai + c * Aj)
        Nv[j] = -s * Aiv + c * Ajv - thv * (c * Ai + s * Aj)
        return N, Nu, Nv


@dataclass
class NormalFrame:
    """Orthonormal normal frame sampled on a grid, with derivative fields."""

    N: np.ndarray            # (n-2, n, R, R)
    Nu: np.ndarray
    Nv: np.ndarray
    torsion_free: bool = False
    source: str = "gram_schmidt"
    field: Optional[Callable] = None   # pointwise evaluator when available

    @property
    def count(self):
        return self.N.shape[0]


def frame_on_grid(field, grid, torsion_free=False, source="gram_schmidt"):
    u = grid.U[grid.disc]
    v = grid.V[grid.disc]
    N, Nu, Nv = field(u, v)
    nn, n = N.shape[0], N.shape[1]

    def scatter(A):
        out = grid.new_field((nn, n))
        out[..., grid.disc] = A
        return out

    return NormalFrame(N=scatter(N), Nu=scatter(Nu), Nv=scatter(Nv),
                       torsion_free=torsion_free, source=source, field=field)


def gram_schmidt_frame(patch, grid, frame_tol=FRAME_TOL):
    """Deterministic Gram-Schmidt frame on the grid (see GramSchmidtField)."""
    fld = GramSchmidtField(patch, frame_tol=frame_tol)
    tf = patch.n == 3   # a single normal has no torsion
    return frame_on_grid(fld, grid, torsion_free=tf)


def preferred_frame(patch, grid):
    """The patch's catalog frame sampled on the grid (error if absent)."""
    fld = PreferredField(patch)
    return frame_on_grid(fld, grid, torsion_free=False, source="preferred")


def rotated_frame(base_frame, grid, theta, plane=(0, 1)):
    """Rotate a frame that carries a pointwise evaluator by an angle field."""
    if base_frame.field is None:
        raise FrameConstructionError("base frame has no pointwise evaluator")
    fld = RotatedField(base_frame.field, theta, plane=plane)
    return frame_on_grid(fld, grid, torsion_free=False, source="rotated")


def frame_orthonormality_residual(patch, frame, grid):
    """Max violation of tangency/orthonormality and of unit-length derivatives."""
    u, v = grid.U[grid.disc], grid.V[grid.disc]
    dX = patch.eval_dX(u, v)
    N = frame.N[..., grid.disc]
    Nu = frame.Nu[..., grid.disc]
    Nv = frame.Nv[..., grid.disc]
    res = 0.0
    for i in range(2):
        res = max(res, np.abs(np.einsum("skm,km->sm", N, dX[:, i])).max())
    gram = np.einsum("skm,wkm->swm", N, N)
    gram -= np.eye(N.shape[0])[:, :, None]
    res = max(res, np.abs(gram).max())
    for D in (Nu, Nv):
        res = max(res, np.abs(np.einsum("skm,skm->sm", D, N)).max())
    return float(res)


# ----------------------------------------------------------------------------
# parallel transport
# ----------------------------------------------------------------------------

def _torsion_matrices(field, u, v):
    """T_i[s, w] = N_{s,u^i} . N_w at each point; shapes (m, nn, nn)."""
    N, Nu, Nv = field(u, v)
    Tu = np.einsum("skm,wkm->msw", Nu, N)
    Tv = np.einsum("skm,wkm->msw", Nv, N)
    # enforce the exact antisymmetry the continuous object has
    Tu = 0.5 * (Tu - np.swapaxes(Tu, 1, 2))
    Tv = 0.5 * (Tv - np.swapaxes(Tv, 1, 2))
    return Tu, Tv


def holonomy_defect(field, radii=(0.3, 0.6, 0.9), steps=1024):
    """Transport around concentric circles; Frobenius defect of the loop map."""
    radii = np.asarray(radii, dtype=float)
    m = radii.size
    nn = field(np.zeros(1), np.zeros(1))[0].shape[0]
    R = np.broadcast_to(np.eye(nn), (m, nn, nn)).copy()
    dth = 2.0 * np.pi / steps

    def rhs(theta, R):
        u = radii * np.cos(theta)
        v = radii * np.sin(theta)
        Tu, Tv = _torsion_matrices(field, u, v)
        Tdir = (-radii * np.sin(theta))[:, None, None] * Tu \
            + (radii * np.cos(theta))[:, None, None] * Tv
        return -np.matmul(R, Tdir)

    theta = 0.0
    for _ in range(steps):
        k1 = rhs(theta, R)
        k2 = rhs(theta + 0.5 * dth, R + 0.5 * dth * k1)
        k3 = rhs(theta + 0.5 * dth, R + 0.5 * dth * k2)
        k4 = rhs(theta + dth, R + dth * k3)
        R = R + (dth / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        theta += dth
    return float(np.abs(R - np.eye(nn)).max())


def parallel_frame(patch, grid, seed=None, steps=None, holonomy_tol=1e-6,
                   torsion_tol=TORSION_TOL):
    """Torsion-free frame via radial parallel transport of a seed frame.

    The seed's torsion connection is integrated along rays from the disc
    center with RK4; the rotation field R then satisfies dR/du^i = -R T_i,
    which is integrable exactly when the normal bundle is flat.  Flatness is
    decided by the holonomy of transport around concentric circles; a
    path-dependent transport raises :class:`NonFlatBundleError` with the
    measured defect.
    """
    if seed is None:
        seed = GramSchmidtField(patch)
    elif isinstance(seed, NormalFrame):
        if seed.field is None:
            raise FrameConstructionError(
                "seed frame must be pointwise evaluable for transport")
        seed = seed.field

    if patch.n == 3:
        return frame_on_grid(seed, grid, torsion_free=True, source="parallel")

    defect = holonomy_defect(seed)
    if defect > holonomy_tol:
        raise NonFlatBundleError(
            f"normal bundle of {patch.name!r} is not flat: holonomy defect "
            f"{defect:.3e} exceeds {holonomy_tol:.1e}", holonomy_defect=defect)

    if steps is None:
        steps = 2 * grid.resolution
    u0 = grid.U[grid.disc]
    v0 = grid.V[grid.disc]
    m = u0.size
    nn = patch.n - 2
    R = np.broadcast_to(np.eye(nn), (m, nn, nn)).copy()
    ds = 1.0 / steps

    def rhs(s, R):
        Tu, Tv = _torsion_matrices(seed, s * u0, s * v0)
        Tdir = u0[:, None, None] * Tu + v0[:, None, None] * Tv
        return -np.matmul(R, Tdir)

    s = 0.0
    for _ in range(steps):
        k1 = rhs(s, R)
        k2 = rhs(s + 0.5 * ds, R + 0.5 * ds * k1)
        k3 = rhs(s + 0.5 * ds, R + 0.5 * ds * k2)
        k4 = rhs(s + ds, R + ds * k3)
        R = R + (ds / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        s += ds

    # re-orthogonalize against RK drift (projection onto SO(nn))
    Uq, _, Vt = np.linalg.svd(R)
    R = np.matmul(Uq, Vt)

    N, Nu, Nv = seed(u0, v0)
    Tu, Tv = _torsion_matrices(seed, u0, v0)
    Ru = -np.matmul(R, Tu)
    Rv = -np.matmul(R, Tv)
    M = np.einsum("msw,wkm->skm", R, N)
    Mu = np.einsum("msw,wkm->skm", Ru, N) + np.einsum("msw,wkm->skm", R, Nu)
    Mv = np.einsum("msw,wkm->skm", Rv, N) + np.einsum("msw,wkm->skm", R, Nv)

    nflat = patch.n

    def scatter(A):
        out = grid.new_field((nn, nflat))
        out[..., grid.disc] = A
        return out

    frame = NormalFrame(N=scatter(M), Nu=scatter(Mu), Nv=scatter(Mv),
                        torsion_free=True, source="parallel", field=None)

    # diagonal entries N_{s,i}.N_s vanish only up to unit-norm roundoff;
    # the off-diagonal (true torsion) entries are zero by construction
    offu = np.einsum("skm,wkm->swm", Mu, M)
    offv = np.einsum("skm,wkm->swm", Mv, M)
    eye = np.eye(nn, dtype=bool)
    tmax = max(np.abs(offu[~eye]).max(initial=0.0),
               np.abs(offv[~eye]).max(initial=0.0))
    if tmax > torsion_tol:
        raise NonFlatBundleError(
            f"parallel transport left residual torsion {tmax:.3e} on "
            f"{patch.name!r}", holonomy_defect=defect)
    return frame
