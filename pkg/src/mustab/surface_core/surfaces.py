"""Immersed patches over the unit disc: catalog surfaces and config-defined ones.

An :class:`ImmersionPatch` evaluates the map X(u,v) in R^n together with its
first and second parametric derivatives on arbitrary point batches.  Catalog
surfaces carry hand-written analytic derivatives; config-defined surfaces get
theirs from symbolic differentiation.  A 4th-order centered finite-difference
fallback (step tied to the working grid) exists for externally supplied maps
without derivative closures.

Array convention: point batches are flat arrays u, v of shape (m,); values
come back with the ambient axis first, X -> (n, m), dX -> (n, 2, m),
d2X -> (n, 3, m) ordered (uu, uv, vv).
"""

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import sympy as sp

from ..errors import ConfigurationError


@dataclass
class ImmersionPatch:
    """A C^2 map X: B -> R^n of rank 2 with derivative closures."""

    name: str
    n: int
    eval_X: Callable        # (u, v) -> (n, m)
    eval_dX: Callable       # (u, v) -> (n, 2, m)
    eval_d2X: Callable      # (n, 3, m), columns (uu, uv, vv)
    is_graph: bool = False
    claims_conformal: bool = False
    # optional analytic preferred normal frame: (u,v) -> (N, Nu, Nv),
    # each of shape (n-2, n, m)
    preferred_frame: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def with_fd_second_derivatives(self, h):
        """Copy of the patch whose d2X uses 4th-order differences of dX."""
        return ImmersionPatch(
            name=self.name + "+fd2", n=self.n, eval_X=self.eval_X,
            eval_dX=self.eval_dX,
            eval_d2X=_fd_second(self.eval_dX, 0.5 * h),
            is_graph=self.is_graph, claims_conformal=self.claims_conformal,
            preferred_frame=self.preferred_frame, params=dict(self.params))


def _fd_second(eval_dX, step):
    c = np.array([1.0, -8.0, 8.0, -1.0]) / (12.0 * step)
    offs = np.array([-2.0, -1.0, 1.0, 2.0]) * step

    def d2X(u, v):
        du_stack = sum(ci * eval_dX(u + oi, v) for ci, oi in zip(c, offs))
        dv_stack = sum(ci * eval_dX(u, v + oi) for ci, oi in zip(c, offs))
        # du_stack[:, k] = d/du of X_{u^k}; assemble (uu, uv, vv)
        return np.stack([du_stack[:, 0], du_stack[:, 1], dv_stack[:, 1]], axis=1)

    return d2X


def _as_batch(u, v):
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    return u, v


# ----------------------------------------------------------------------------
# catalog
# ----------------------------------------------------------------------------

def _plane(n):
    def X(u, v):
        u, v = _as_batch(u, v)
        out = np.zeros((n, u.size))
        out[0], out[1] = u, v
        return out

    def dX(u, v):
        u, v = _as_batch(u, v)
        out = np.zeros((n, 2, u.size))
        out[0, 0] = 1.0
        out[1, 1] = 1.0
        return out

    def d2X(u, v):
        u, v = _as_batch(u, v)
        return np.zeros((n, 3, u.size))

    return ImmersionPatch(name=f"plane{n}", n=n, eval_X=X, eval_dX=dX,
                          eval_d2X=d2X, is_graph=True, claims_conformal=True)


def _sphere_graph(r, name, extra):
    if r <= 1.0:
        raise ConfigurationError(
            f"{name}: radius must exceed 1 so the graph covers the disc (got {r})")

    def w(u, v):
        return np.sqrt(r * r - u * u - v * v)

    def X(u, v):
        u, v = _as_batch(u, v)
        return np.stack([u, v, w(u, v)])

    def dX(u, v):
        u, v = _as_batch(u, v)
        ww = w(u, v)
        out = np.zeros((3, 2, u.size))
        out[0, 0] = 1.0
        out[1, 1] = 1.0
        out[2, 0] = -u / ww
        out[2, 1] = -v / ww
        return out

    def d2X(u, v):
        u, v = _as_batch(u, v)
        ww = w(u, v)
        w3 = ww**3
        out = np.zeros((3, 3, u.size))
        out[2, 0] = -(r * r - v * v) / w3
        out[2, 1] = -u * v / w3
        out[2, 2] = -(r * r - u * u) / w3
        return out

    return ImmersionPatch(name=name, n=3, eval_X=X, eval_dX=dX, eval_d2X=d2X,
                          is_graph=True, claims_conformal=False,
                          params=dict(extra, r=r))


def _enneper():
    def X(u, v):
        u, v = _as_batch(u, v)
        return np.stack([u - u**3 / 3 + u * v**2,
                         -v + v**3 / 3 - u**2 * v,
                         u**2 - v**2])

    def dX(u, v):
        u, v = _as_batch(u, v)
        out = np.empty((3, 2, u.size))
        out[0, 0] = 1 - u**2 + v**2
        out[0, 1] = 2 * u * v
        out[1, 0] = -2 * u * v
        out[1, 1] = -1 + v**2 - u**2
        out[2, 0] = 2 * u
        out[2, 1] = -2 * v
        return out

    def d2X(u, v):
        u, v = _as_batch(u, v)
        out = np.empty((3, 3, u.size))
        out[0] = np.stack([-2 * u, 2 * v, 2 * u])
        out[1] = np.stack([-2 * v, -2 * u, 2 * v])
        out[2] = np.stack([2 * np.ones_like(u), np.zeros_like(u),
                           -2 * np.ones_like(u)])
        return out

    return ImmersionPatch(name="enneper", n=3, eval_X=X, eval_dX=dX,
                          eval_d2X=d2X, claims_conformal=True)


def _clifford():
    s2 = np.sqrt(2.0)

    def X(u, v):
        u, v = _as_batch(u, v)
        return np.stack([np.cos(u), np.sin(u), np.cos(v), np.sin(v)]) / s2

    def dX(u, v):
        u, v = _as_batch(u, v)
        z = np.zeros_like(u)
        out = np.empty((4, 2, u.size))
        out[:, 0] = np.stack([-np.sin(u), np.cos(u), z, z]) / s2
        out[:, 1] = np.stack([z, z, -np.sin(v), np.cos(v)]) / s2
        return out

    def d2X(u, v):
        u, v = _as_batch(u, v)
        z = np.zeros_like(u)
        out = np.empty((4, 3, u.size))
        out[:, 0] = np.stack([-np.cos(u), -np.sin(u), z, z]) / s2
        out[:, 1] = 0.0
        out[:, 2] = np.stack([z, z, -np.cos(v), -np.sin(v)]) / s2
        return out

    def frame(u, v):
        # torsion-free analytic frame of the Clifford patch
        u, v = _as_batch(u, v)
        z = np.zeros_like(u)
        N = np.empty((2, 4, u.size))
        N[0] = np.stack([np.cos(u), np.sin(u), -np.cos(v), -np.sin(v)]) / s2
        N[1] = np.stack([np.cos(u), np.sin(u), np.cos(v), np.sin(v)]) / s2
        Nu = np.empty_like(N)
        Nu[0] = np.stack([-np.sin(u), np.cos(u), z, z]) / s2
        Nu[1] = np.stack([-np.sin(u), np.cos(u), z, z]) / s2
        Nv = np.empty_like(N)
        Nv[0] = np.stack([z, z, np.sin(v), -np.cos(v)]) / s2
        Nv[1] = np.stack([z, z, -np.sin(v), np.cos(v)]) / s2
        return N, Nu, Nv

    return ImmersionPatch(name="clifford", n=4, eval_X=X, eval_dX=dX,
                          eval_d2X=d2X, claims_conformal=True,
                          preferred_frame=frame)


def _holograph_w2():
    def X(u, v):
        u, v = _as_batch(u, v)
        return np.stack([u, v, u**2 - v**2, 2 * u * v])

    def dX(u, v):
        u, v = _as_batch(u, v)
        one, z = np.ones_like(u), np.zeros_like(u)
        out = np.empty((4, 2, u.size))
        out[:, 0] = np.stack([one, z, 2 * u, 2 * v])
        out[:, 1] = np.stack([z, one, -2 * v, 2 * u])
        return out

    def d2X(u, v):
        u, v = _as_batch(u, v)
        z, two = np.zeros_like(u), 2 * np.ones_like(u)
        out = np.empty((4, 3, u.size))
        out[:, 0] = np.stack([z, z, two, z])
        out[:, 1] = np.stack([z, z, z, two])
        out[:, 2] = np.stack([z, z, -two, z])
        return out

    return ImmersionPatch(name="holograph_w2", n=4, eval_X=X, eval_dX=dX,
                          eval_d2X=d2X, is_graph=True, claims_conformal=True)


_CATALOG_RE = re.compile(r"^([a-z0-9_]+)(?:\(([^)]*)\))?$")


def catalog(name):
    """Resolve a catalog surface by name, e.g. ``sphere_patch(2.0)``."""
    m = _CATALOG_RE.match(name.strip())
    if not m:
        raise ConfigurationError(f"cannot parse surface name {name!r}")
    base, arg = m.group(1), m.group(2)
    val = None
    if arg is not None and arg.strip():
        try:
            val = float(arg)
        except ValueError:
            raise ConfigurationError(f"bad numeric argument in {name!r}") from None

    if base == "plane3":
        return _plane(3)
    if base == "plane4":
        return _plane(4)
    if base == "enneper":
        return _enneper()
    if base == "clifford":
        return _clifford()
    if base == "holograph_w2":
        return _holograph_w2()
    if base == "sphere_patch":
        return _sphere_graph(2.0 if val is None else val, "sphere_patch", {})
    if base == "cmc_graph":
        h0 = 0.5 if val is None else val
        if not 0.0 < h0 < 1.0:
            raise ConfigurationError(
                f"cmc_graph: h0 must lie in (0,1), got {h0}")
        return _sphere_graph(1.0 / h0, "cmc_graph", {"h0": h0})
    raise ConfigurationError(f"unknown surface {name!r}")


CATALOG_NAMES = ("plane3", "plane4", "sphere_patch(r)", "enneper", "clifford",
                 "holograph_w2", "cmc_graph(h0)")


# ----------------------------------------------------------------------------
# config-defined surfaces (small arithmetic expression grammar via sympy)
# ----------------------------------------------------------------------------

_ALLOWED_FUNCS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp,
                  "sqrt": sp.sqrt, "log": sp.log}
_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


def _parse_component(text, u, v):
    names = set(_TOKEN_RE.findall(text))
    bad = names - set(_ALLOWED_FUNCS) - {"u", "v"}
    if bad:
        raise ConfigurationError(
            f"expression {text!r} uses unknown names {sorted(bad)}; allowed: "
            "u, v, +, -, *, /, ^, sin, cos, exp, sqrt, log")
    local = dict(_ALLOWED_FUNCS, u=u, v=v)
    try:
        expr = sp.sympify(text.replace("^", "**"), locals=local, rational=False)
    except (sp.SympifyError, SyntaxError) as exc:
        raise ConfigurationError(f"cannot parse expression {text!r}: {exc}") from None
    return expr


def patch_from_expressions(components, name="custom", is_graph=False,
                           claims_conformal=False):
    """Build a patch from component expressions in u, v.

    ``components`` is a list of strings, one per ambient coordinate, using
    the grammar +, -, *, /, ^, sin, cos, exp, sqrt, log.
    """
    n = len(components)
    if n < 3:
        raise ConfigurationError(f"ambient dimension must be >= 3, got {n}")
    u, v = sp.symbols("u v", real=True)
    exprs = [_parse_component(t, u, v) for t in components]
    dus = [e.diff(u) for e in exprs]
    dvs = [e.diff(v) for e in exprs]
    d2s = [(e.diff(u, 2), e.diff(u, v), e.diff(v, 2)) for e in exprs]

    def lamb(e):
        f = sp.lambdify((u, v), e, modules="numpy")

        def g(uu, vv):
            out = np.asarray(f(uu, vv), dtype=float)
            return np.broadcast_to(out, uu.shape).copy() if out.shape != uu.shape else out
        return g

    fX = [lamb(e) for e in exprs]
    fdu = [lamb(e) for e in dus]
    fdv = [lamb(e) for e in dvs]
    f2 = [[lamb(e) for e in row] for row in d2s]

    def X(uu, vv):
        uu, vv = _as_batch(uu, vv)
        return np.stack([f(uu, vv) for f in fX])

    def dX(uu, vv):
        uu, vv = _as_batch(uu, vv)
        return np.stack([np.stack([a(uu, vv), b(uu, vv)])
                         for a, b in zip(fdu, fdv)])

    def d2X(uu, vv):
        uu, vv = _as_batch(uu, vv)
        return np.stack([np.stack([g(uu, vv) for g in row]) for row in f2])

    return ImmersionPatch(name=name, n=n, eval_X=X, eval_dX=dX, eval_d2X=d2X,
                          is_graph=is_graph, claims_conformal=claims_conformal)


def patch_from_config(parser, name="custom"):
    """Build a patch from a parsed config file (configparser object).

    Expects a ``[surface]`` section with ``ambient_dim`` and components
    ``x1 .. xn``, plus optional boolean flags ``graph`` and ``conformal``.
    """
    if "surface" not in parser:
        raise ConfigurationError("config file is missing a [surface] section")
    sec = parser["surface"]
    try:
        n = int(sec.get("ambient_dim", ""))
    except ValueError:
        raise ConfigurationError("ambient_dim must be an integer") from None
    comps = []
    for k in range(1, n + 1):
        key = f"x{k}"
        if key not in sec:
            raise ConfigurationError(f"config is missing component {key}")
        comps.append(sec[key])
    return patch_from_expressions(
        comps, name=name,
        is_graph=sec.getboolean("graph", fallback=False),
        claims_conformal=sec.getboolean("conformal", fallback=False))
