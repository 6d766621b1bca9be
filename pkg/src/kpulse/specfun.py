"""Special functions used by the pulse families.

Elliptic integrals and amplitudes (standard and with several moduli),
Chebyshev and Jacobi polynomials, Anger and Weber functions. Everything is
vectorised over the real argument and pure.
"""
from functools import lru_cache

import numpy as np

from ._quad import Tabulated, integrate, invert_increasing
from .errors import DomainError

DEFAULT_TOL = 1e-10


def _check_modulus(m):
    m = float(m)
    if not np.isfinite(m) or m < 0.0:
        raise DomainError(f"modulus must lie in [0, 1), got {m}")
    if m >= 1.0:
        raise DomainError(f"modulus m={m} >= 1: the elliptic integral diverges")
    return m


def _check_moduli(moduli):
    moduli = tuple(float(m) for m in np.atleast_1d(moduli))
    if not moduli:
        raise DomainError("at least one modulus is required")
    for m in moduli:
        _check_modulus(m)
    return moduli


def complete_elliptic_K(m):
    """K(m) = F(pi/2 | m) by the arithmetic-geometric mean."""
    m = _check_modulus(m)
    a, b = 1.0, np.sqrt(1.0 - m)
    for _ in range(64):
        if abs(a - b) <= 1e-16 * a:
            break
        a, b = 0.5 * (a + b), np.sqrt(a * b)
    return np.pi / (2.0 * a)


def _carlson_rf(x, y, z):
    # duplication algorithm, relative error ~1e-16 after convergence
    x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))
    x, y, z = x.copy(), y.copy(), z.copy()
    for _ in range(40):
        a = (x + y + z) / 3.0
        dev = np.max(np.abs(np.stack([a - x, a - y, a - z])) / a, initial=0.0)
        if dev < 1e-4:
            break
        lam = np.sqrt(x * y) + np.sqrt(y * z) + np.sqrt(z * x)
        x, y, z = 0.25 * (x + lam), 0.25 * (y + lam), 0.25 * (z + lam)
    a = (x + y + z) / 3.0
    dx, dy = 1.0 - x / a, 1.0 - y / a
    dz = -(dx + dy)
    e2 = dx * dy - dz * dz
    e3 = dx * dy * dz
    return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / np.sqrt(a)


def elliptic_F(phi, m):
    """Incomplete elliptic integral of the first kind F(phi | m), any real phi."""
    m = _check_modulus(m)
    phi = np.asarray(phi, dtype=float)
    k = np.round(phi / np.pi)
    r = phi - k * np.pi
    s, c = np.sin(r), np.cos(r)
    val = s * _carlson_rf(c * c, 1.0 - m * s * s, 1.0)
    return 2.0 * k * complete_elliptic_K(m) + val


def jacobi_amplitude(u, m, tol=DEFAULT_TOL):
    """am(u | m): the inverse of ``elliptic_F`` in its first argument."""
    m = _check_modulus(m)
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("argument of the Jacobi amplitude must be finite")
    K = complete_elliptic_K(m)
    k = np.round(u / (2.0 * K))
    r = (u - 2.0 * k * K).ravel()
    # F is odd and increasing on [-pi/2, pi/2]; start from the m=0 guess
    guess = np.clip(r * np.pi / (2.0 * K), -np.pi / 2, np.pi / 2)
    am = invert_increasing(
        lambda p: elliptic_F(p, m),
        lambda p: 1.0 / np.sqrt(1.0 - m * np.sin(p) ** 2),
        r, -np.pi / 2, np.pi / 2, guess, ftol=min(tol, 1e-14) * max(1.0, K),
    )
    return (k * np.pi + am.reshape(u.shape)) if u.ndim else float(k * np.pi + am[0])


@lru_cache(maxsize=64)
def _generalized_table(moduli, tol):
    ms = np.asarray(moduli)

    def integrand(phi):
        s2 = np.sin(phi) ** 2
        out = np.ones_like(phi)
        for m in ms:
            out = out / np.sqrt(1.0 - m * s2)
        return out

    return Tabulated(integrand, 0.0, np.pi / 2, n_table=128, tol=min(tol, 1e-13), smooth=True), integrand


def generalized_F(u, moduli, tol=DEFAULT_TOL):
    """int_0^u dphi / prod_i sqrt(1 - m_i sin^2 phi), any real u."""
    moduli = _check_moduli(moduli)
    table, _ = _generalized_table(moduli, tol)
    u = np.asarray(u, dtype=float)
    k = np.round(u / np.pi)
    r = u - k * np.pi
    val = np.sign(r) * table(np.abs(r))
    out = 2.0 * k * table.total + val
    return float(out) if out.ndim == 0 else out


def generalized_K(moduli, tol=DEFAULT_TOL):
    moduli = _check_moduli(moduli)
    return float(_generalized_table(moduli, tol)[0].total)


def generalized_amplitude(t, moduli, tol=DEFAULT_TOL):
    """Inverse of ``generalized_F``: am_N(t | m_1..m_N)."""
    moduli = _check_moduli(moduli)
    table, integrand = _generalized_table(moduli, tol)
    t = np.asarray(t, dtype=float)
    K = table.total
    k = np.round(t / (2.0 * K))
    r = t - 2.0 * k * K
    phi = np.sign(r) * table.inverse(np.abs(r), integrand)
    out = k * np.pi + phi
    return float(out) if out.ndim == 0 else out


_KINDS = {"first": "T", "T": "T", 1: "T", "second": "U", "U": "U", 2: "U"}


def chebyshev(kind, n, x):
    """Chebyshev polynomial T_n (kind='first') or U_n (kind='second') at x."""
    if kind not in _KINDS:
        raise DomainError(f"unknown Chebyshev kind {kind!r}")
    n = int(n)
    if n < 0:
        raise DomainError("polynomial degree must be non-negative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev
    cur = x.copy() if _KINDS[kind] == "T" else 2.0 * x
    for _ in range(n - 1):
        prev, cur = cur, 2.0 * x * cur - prev
    return cur


def _jacobi(n, a, b, x):
    x = np.asarray(x, dtype=float)
    if n < 0:
        return np.zeros_like(x)
    p0 = np.ones_like(x)
    if n == 0:
        return p0
    p1 = 0.5 * ((a + b + 2.0) * x + (a - b))
    for k in range(2, n + 1):
        c = 2.0 * k + a + b
        a1 = 2.0 * k * (k + a + b) * (c - 2.0)
        a2 = (c - 1.0) * (a * a - b * b)
        a3 = (c - 2.0) * (c - 1.0) * c
        a4 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * c
        p0, p1 = p1, ((a2 + a3 * x) * p1 - a4 * p0) / a1
    return p1


def jacobi_polynomial(n, a, b, x):
    """Jacobi polynomial P_n^(a,b)(x) by the three-term recurrence."""
    n = int(n)
    if n < 0:
        raise DomainError("polynomial degree must be non-negative")
    if a <= -1 or b <= -1:
        raise DomainError("Jacobi parameters must exceed -1")
    return _jacobi(n, float(a), float(b), x)


def jacobi_polynomial_derivative(n, a, b, x, order=1):
    """d^order/dx^order P_n^(a,b)(x); zero when order > n."""
    n = int(n)
    if n < 0:
        raise DomainError("polynomial degree must be non-negative")
    coef = 1.0
    for j in range(order):
        coef *= 0.5 * (n + a + b + 1 + j)
    return coef * _jacobi(n - order, a + order, b + order, x)


def _anger_weber_scalar(nu, z, tol):
    panels = int(np.ceil((abs(nu) + abs(z)) / 2.0)) + 1

    def f(theta):
        arg = nu * theta - z * np.sin(theta)
        return np.stack([np.cos(arg), np.sin(arg)])

    J, E = integrate(f, 0.0, np.pi, tol=tol * np.pi, panels=panels) / np.pi
    return J, E


def anger_weber(nu, z, tol=DEFAULT_TOL):
    """Anger function J_nu(z) and Weber function E_nu(z) as a pair."""
    nu_a, z_a = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(z, dtype=float))
    if not (np.all(np.isfinite(nu_a)) and np.all(np.isfinite(z_a))):
        raise DomainError("Anger/Weber arguments must be finite")
    if nu_a.ndim == 0:
        return _anger_weber_scalar(float(nu_a), float(z_a), tol)
    J = np.empty(nu_a.shape)
    E = np.empty(nu_a.shape)
    for idx in np.ndindex(nu_a.shape):
        J[idx], E[idx] = _anger_weber_scalar(float(nu_a[idx]), float(z_a[idx]), tol)
    return J, E
