"""P1 finite elements on a triangulated disc and the weighted eigenproblem.

The discrete problem is the generalized symmetric pencil A x = lambda M_w x
with A the stiffness matrix, M_w the weighted mass matrix and homogeneous
Dirichlet values on the unit circle.  Conforming elements make every discrete
lambda_1 an upper bound for the continuous Rayleigh minimum, so values must
decrease monotonically under refinement; the refinement history plus one
Richardson step is the reported eigenvalue.

The solve is a deterministic inverse iteration on a prefactored sparse LU;
no black-box spectral routines are involved.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import splu
from scipy.spatial import Delaunay

from ..errors import PreconditionError

BOUNDARY_TOL = 1e-12
VACUOUS_TOL = 1e-12
RAYLEIGH_TOL = 1e-10


@dataclass
class DiscMesh:
    points: np.ndarray       # (m, 2)
    triangles: np.ndarray    # (t, 3)
    boundary: np.ndarray     # (m,) bool, node on the unit circle
    mesh_size: float         # longest edge


def build_disc_mesh(mesh_size=0.1):
    """Quasi-uniform Delaunay triangulation with boundary nodes on the circle."""
    K = max(3, int(round(1.0 / mesh_size)))
    pts = [(0.0, 0.0)]
    for k in range(1, K + 1):
        r = k / K
        nk = 6 * k
        offs = 0.5 * (k % 2)
        ang = 2.0 * np.pi * (np.arange(nk) + offs) / nk
        pts.extend(zip(r * np.cos(ang), r * np.sin(ang)))
    points = np.array(pts)
    tri = Delaunay(points)
    triangles = tri.simplices.copy()
    boundary = np.abs(np.hypot(points[:, 0], points[:, 1]) - 1.0) < 1e-9
    mesh = DiscMesh(points=points, triangles=triangles, boundary=boundary,
                    mesh_size=_longest_edge(points, triangles))
    return mesh


def _longest_edge(points, triangles):
    e = 0.0
    for a, b in ((0, 1), (1, 2), (2, 0)):
        d = points[triangles[:, a]] - points[triangles[:, b]]
        e = max(e, float(np.sqrt((d ** 2).sum(axis=1)).max()))
    return e


def refine(mesh):
    """Midpoint subdivision; midpoints of boundary edges snap to the circle."""
    points = [tuple(p) for p in mesh.points]
    index = {p: i for i, p in enumerate(points)}
    boundary = list(mesh.boundary)

    def midpoint(i, j):
        pi, pj = mesh.points[i], mesh.points[j]
        q = 0.5 * (pi + pj)
        on_bnd = mesh.boundary[i] and mesh.boundary[j]
        if on_bnd:
            q = q / np.hypot(q[0], q[1])
        key = (round(q[0], 14), round(q[1], 14))
        if key not in index:
            index[key] = len(points)
            points.append(key)
            boundary.append(on_bnd)
        return index[key]

    tris = []
    for t in mesh.triangles:
        a, b, c = int(t[0]), int(t[1]), int(t[2])
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        tris.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    pts = np.array(points)
    triangles = np.array(tris, dtype=int)
    return DiscMesh(points=pts, triangles=triangles,
                    boundary=np.array(boundary, dtype=bool),
                    mesh_size=_longest_edge(pts, triangles))


def assemble(mesh, weight_fn):
    """Stiffness and weighted mass matrices (3-point edge-midpoint rule)."""
    p, t = mesh.points, mesh.triangles
    m = p.shape[0]
    rows, cols, a_vals, m_vals = [], [], [], []
    x = p[t]                      # (nt, 3, 2)
    d1 = x[:, 1] - x[:, 0]
    d2 = x[:, 2] - x[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * np.abs(det)
    if area.min() <= 0.0:
        raise PreconditionError("degenerate triangle in disc mesh")
    # P1 gradients: grad phi_i constant per triangle
    b = np.stack([x[:, 1, 1] - x[:, 2, 1],
                  x[:, 2, 1] - x[:, 0, 1],
                  x[:, 0, 1] - x[:, 1, 1]], axis=1)
    c = np.stack([x[:, 2, 0] - x[:, 1, 0],
                  x[:, 0, 0] - x[:, 2, 0],
                  x[:, 1, 0] - x[:, 0, 0]], axis=1)
    # edge midpoints and weights there; the edge-midpoint rule is exact for
    # quadratics, so only the midpoint sampling of w limits accuracy
    mids = 0.5 * (x[:, [0, 1, 2]] + x[:, [1, 2, 0]])    # (nt, 3, 2)
    wm = weight_fn(mids[..., 0].ravel(), mids[..., 1].ravel()).reshape(-1, 3)
    edges = ((0, 1), (1, 2), (2, 0))
    phi_at_mid = np.array([[0.5 if i in e else 0.0 for e in edges]
                           for i in range(3)])
    for i in range(3):
        for j in range(3):
            rows.append(t[:, i])
            cols.append(t[:, j])
            a_vals.append((b[:, i] * b[:, j] + c[:, i] * c[:, j])
                          / (4.0 * area))
            pij = phi_at_mid[i] * phi_at_mid[j]
            m_vals.append(area / 3.0 * (wm @ pij))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    A = sps.csr_matrix((np.concatenate(a_vals), (rows, cols)), shape=(m, m))
    M = sps.csr_matrix((np.concatenate(m_vals), (rows, cols)), shape=(m, m))
    return A, M


def smallest_eigenpair(A, M, tol=RAYLEIGH_TOL, max_iter=500):
    """Inverse iteration for the smallest eigenvalue of A x = lambda M x.

    Deterministic all-ones start; converged when successive Rayleigh
    quotients differ by less than ``tol`` relatively.
    """
    lu = splu(A.tocsc())
    x = np.ones(A.shape[0])
    lam_old = np.inf
    for _ in range(max_iter):
        y = lu.solve(M @ x)
        nrm = np.sqrt(y @ (M @ y))
        if nrm <= 0.0 or not np.isfinite(nrm):
            raise PreconditionError("indefinite weighted mass matrix")
        x = y / nrm
        lam = (x @ (A @ x)) / (x @ (M @ x))
        if abs(lam - lam_old) < tol * max(1.0, abs(lam)):
            return float(lam), x
        lam_old = lam
    return float(lam), x


@dataclass
class EigenResult:
    lambda1: Optional[float]              # Richardson-extrapolated value
    eigenfunction: Optional[np.ndarray]   # finest-level interior solution
    mesh: Optional[DiscMesh]
    mesh_size: float
    refinement_history: List[Tuple[float, float]]
    vacuous: bool = False

    @property
    def lambda_finest(self):
        return self.refinement_history[-1][1] if self.refinement_history else None


def weighted_first_eigenvalue(weight_fn, mesh_size=0.1, levels=3):
    """First Dirichlet eigenvalue of -Laplace u = lambda w u on the disc.

    ``weight_fn`` maps coordinate arrays (x, y) to weight values (>= 0).
    Returns the refinement history over ``levels`` conforming meshes and a
    Richardson-extrapolated value (O(h^2) elements).
    """
    if levels < 1:
        raise PreconditionError("need at least one refinement level")
    mesh = build_disc_mesh(mesh_size)
    history = []
    x = None
    for _ in range(levels):
        A, M = assemble(mesh, weight_fn)
        free = ~mesh.boundary
        Aff = A[free][:, free]
        Mff = M[free][:, free]
        total_weight = float(Mff.sum())
        if total_weight < VACUOUS_TOL * np.pi:
            return EigenResult(lambda1=None, eigenfunction=None, mesh=mesh,
                               mesh_size=mesh.mesh_size,
                               refinement_history=[], vacuous=True)
        lam, xf = smallest_eigenpair(Aff.tocsc(), Mff.tocsc())
        x = np.zeros(mesh.points.shape[0])
        x[free] = xf
        history.append((mesh.mesh_size, lam))
        if len(history) < levels:
            mesh = refine(mesh)
    if len(history) >= 2:
        # h halves per level: one Richardson step at order 2
        lam_ext = history[-1][1] + (history[-1][1] - history[-2][1]) / 3.0
    else:
        lam_ext = history[-1][1]
    return EigenResult(lambda1=float(lam_ext), eigenfunction=x, mesh=mesh,
                       mesh_size=history[-1][0], refinement_history=history)
