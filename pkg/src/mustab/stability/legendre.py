"""First Dirichlet eigenvalue of a spherical cap by Legendre shooting.

A cap of area omega0 on the unit sphere has colatitude theta0 with
2 pi (1 - cos theta0) = omega0.  Its first eigenvalue is mu = nu (nu + 1)
where nu is the smallest positive degree for which the Legendre function
P_nu vanishes at cos theta0.  P_nu has no elementary closed form for
non-integer nu, so the Legendre ODE is integrated in the colatitude from a
series start at the pole and the zero in nu is bracketed and bisected.
"""

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from ..errors import ConfigurationError

_NU_LO, _NU_HI = 0.01, 200.0
_THETA_START = 1e-3


def cap_colatitude(omega0):
    if not 0.0 < omega0 < 4.0 * np.pi:
        raise ConfigurationError(
            f"cap area must lie in (0, 4*pi), got {omega0}")
    return float(np.arccos(1.0 - omega0 / (2.0 * np.pi)))


def legendre_at(nu, theta0, rtol=1e-12, atol=1e-14):
    """P_nu(cos theta0) by integrating y'' + cot(theta) y' + nu(nu+1) y = 0.

    Starts from the regular series at the pole:
    y = 1 - lam/4 th^2 + lam(3 lam - 2)/192 th^4 + O(th^6), lam = nu(nu+1).
    """
    lam = nu * (nu + 1.0)
    th = _THETA_START
    y0 = 1.0 - lam / 4.0 * th * th + lam * (3.0 * lam - 2.0) / 192.0 * th**4
    dy0 = -lam / 2.0 * th + lam * (3.0 * lam - 2.0) / 48.0 * th**3
    if theta0 <= th:
        return y0

    def rhs(t, y):
        return [y[1], -y[1] / np.tan(t) - lam * y[0]]

    sol = solve_ivp(rhs, (th, theta0), [y0, dy0], method="RK45",
                    rtol=rtol, atol=atol, dense_output=False)
    if not sol.success:
        raise ConfigurationError(f"Legendre integration failed: {sol.message}")
    return float(sol.y[0, -1])


def cap_eigenvalue(omega0, nu_tol=1e-10):
    """Smallest Dirichlet eigenvalue mu = nu(nu+1) of the cap of area omega0."""
    theta0 = cap_colatitude(omega0)

    def f(nu):
        return legendre_at(nu, theta0)

    # scan for the first sign change; P_nu at fixed theta is positive for
    # small nu and its first zero in nu is the fundamental mode
    lo = _NU_LO
    flo = f(lo)
    if flo <= 0.0:
        raise ConfigurationError("unexpected sign at the lower bracket")
    hi = None
    nu = lo
    step = 0.25
    while nu < _NU_HI:
        nu_next = nu + step
        fn = f(nu_next)
        if fn <= 0.0:
            hi = nu_next
            break
        nu, flo = nu_next, fn
        if nu > 4.0:
            step = 1.0
    if hi is None:
        raise ConfigurationError(
            f"no Legendre zero with nu <= {_NU_HI}; cap too small")
    root = brentq(f, nu, hi, xtol=nu_tol, rtol=1e-14)
    return float(root * (root + 1.0))
