"""Analytic pulse and curve families, and scaling to physical units.

Inversion families (target flip angle pi):

* Anger-Weber: ``Omega = sqrt(1 + nu^2 sin^2 t)`` on ``[0, pi]``;
* Jacobi / generalized Jacobi: the same curve traversed with the speed
  ``1 / prod_i sqrt(1 - m_i sin^2 s)``;
* amplitude-fixed: ``Omega = 1`` with a logarithmic phase;
* Chebyshev: polynomial curve with vanishing low-order moments.

The excitation family reaches an arbitrary flip angle ``theta_T`` and is
only available through the generic curve synthesis.
"""
import numpy as np
from numpy.polynomial import Chebyshev

from . import specfun
from .bloch import Pulse
from .errors import DomainError
from .kcurve import KCurve, pulse_from_kcurve

# nu giving an amplitude-fixed pulse of duration exactly 5 pi
NU_250US = np.sqrt(24.0)


def _check_nu(nu):
    nu = float(nu)
    if not np.isfinite(nu) or nu < 0:
        raise DomainError(f"nu must be a finite non-negative number, got {nu}")
    return nu


def _aw_vectors(nu, s):
    """``(a, a', a'', a''')`` for ``a = (sin s cos nu s, sin s sin nu s, cos s)``."""
    s = np.asarray(s, dtype=float)
    e = np.exp(1j * nu * s)
    sn, cs = np.sin(s), np.cos(s)
    n2 = nu * nu
    xy = [sn * e,
          (cs + 1j * nu * sn) * e,
          (-(1 + n2) * sn + 2j * nu * cs) * e,
          (-(1 + 3 * n2) * cs - 1j * nu * (3 + n2) * sn) * e]
    z = [cs, -sn, -cs, sn]
    return [np.stack([c.real, c.imag, zz]) for c, zz in zip(xy, z)]


def _aw_phase(nu, s):
    x = nu * np.sin(s)
    return x + np.arctan(x)


def anger_weber_curve(nu):
    """Curve ``dk/ds = (sin s cos nu s, sin s sin nu s, cos s)``, ``s in [0, pi]``."""
    nu = _check_nu(nu)
    return KCurve(
        0.0, np.pi,
        d1=lambda s: _aw_vectors(nu, s)[0],
        d2=lambda s: _aw_vectors(nu, s)[1],
        d3=lambda s: _aw_vectors(nu, s)[2],
        kz=np.sin, name=f"anger-weber(nu={nu:g})",
    )


def anger_weber_pulse(nu, phase_offset=0.0):
    """``Omega = sqrt(1 + nu^2 sin^2 t)``, ``phi = nu sin t + arctan(nu sin t)``, ``T = pi``."""
    nu = _check_nu(nu)

    def sampler(t):
        t = np.asarray(t, dtype=float)
        return np.sqrt(1.0 + (nu * np.sin(t)) ** 2), _aw_phase(nu, t) + phase_offset

    return Pulse(np.pi, sampler=sampler)


def anger_weber_transfer(nu, delta):
    """Closed-form small-tip-angle transfer of the Anger-Weber curve."""
    nu = _check_nu(nu)
    delta = np.asarray(delta, dtype=float)
    Jp, Ep = specfun.anger_weber(nu + 1, delta)
    Jm, Em = specfun.anger_weber(nu - 1, delta)
    ell = -(delta * np.pi * np.exp(1j * nu * np.pi) / 2) * (Jp - Jm - 1j * (Ep - Em))
    return complex(ell) if np.ndim(ell) == 0 else ell


def _check_moduli(moduli):
    moduli = tuple(float(m) for m in np.atleast_1d(moduli))
    if not moduli:
        raise DomainError("at least one modulus is required")
    for m in moduli:
        if not (0.0 <= m < 1.0):
            raise DomainError(f"modulus must lie in [0, 1), got {m}")
    return moduli


def _speed_factors(moduli, s):
    """``g = 1/P_N``, ``g'`` and ``g''`` with ``P_N = prod sqrt(1 - m_i sin^2 s)``."""
    s = np.asarray(s, dtype=float)
    s2, sin2s, cos2s = np.sin(s) ** 2, np.sin(2 * s), np.cos(2 * s)
    g = np.ones_like(s)
    w = np.zeros_like(s)
    dw = np.zeros_like(s)
    for m in moduli:
        D = 1.0 - m * s2
        g = g / np.sqrt(D)
        w = w + m * sin2s / (2 * D)
        dw = dw + m * cos2s / D + (m * sin2s) ** 2 / (2 * D * D)
    return g, g * w, g * (w * w + dw)


def generalized_jacobi_curve(nu, moduli):
    """Anger-Weber curve direction with speed ``1 / prod_i sqrt(1 - m_i sin^2 s)``."""
    nu = _check_nu(nu)
    moduli = _check_moduli(moduli)

    def d1(s):
        g = _speed_factors(moduli, s)[0]
        return g * _aw_vectors(nu, s)[0]

    def d2(s):
        g, g1, _ = _speed_factors(moduli, s)
        a = _aw_vectors(nu, s)
        return g1 * a[0] + g * a[1]

    def d3(s):
        g, g1, g2 = _speed_factors(moduli, s)
        a = _aw_vectors(nu, s)
        return g2 * a[0] + 2 * g1 * a[1] + g * a[2]

    kz = None
    if len(moduli) == 1:
        m = moduli[0]
        if m == 0.0:
            kz = np.sin
        else:
            r = np.sqrt(m)
            kz = lambda s: np.arcsin(r * np.sin(s)) / r  # noqa: E731
    name = f"gen-jacobi(nu={nu:g}, m={list(moduli)})"
    return KCurve(0.0, np.pi, d1, d2, d3, kz=kz, name=name)


def jacobi_curve(nu, m):
    return generalized_jacobi_curve(nu, [m])


def generalized_jacobi_pulse(nu, moduli, phase_offset=0.0):
    """``s = am_N(t)``, ``Omega = P_N(s) sqrt(1 + nu^2 sin^2 s)``, ``T = 2 K_N``."""
    nu = _check_nu(nu)
    moduli = _check_moduli(moduli)
    T = 2.0 * specfun.generalized_K(moduli)

    def sampler(t):
        s = np.asarray(specfun.generalized_amplitude(t, moduli))
        P = 1.0 / _speed_factors(moduli, s)[0]
        return P * np.sqrt(1.0 + (nu * np.sin(s)) ** 2), _aw_phase(nu, s) + phase_offset

    return Pulse(T, sampler=sampler)


def jacobi_pulse(nu, m, phase_offset=0.0):
    """``s = am(t, m)``, ``Omega = sqrt(1 - m sin^2 s) sqrt(1 + nu^2 sin^2 s)``, ``T = 2K(m)``."""
    nu = _check_nu(nu)
    specfun._check_modulus(m)
    T = 2.0 * specfun.complete_elliptic_K(m)

    def sampler(t):
        s = np.asarray(specfun.jacobi_amplitude(t, m))
        sn2 = np.sin(s) ** 2
        return np.sqrt(1.0 - m * sn2) * np.sqrt(1.0 + nu * nu * sn2), _aw_phase(nu, s) + phase_offset

    return Pulse(T, sampler=sampler)


def flat_modulus(nu):
    """Modulus ``nu^2 / (2 nu^2 + 1)`` making the Jacobi amplitude flat at ``T/2``."""
    nu = _check_nu(nu)
    return nu * nu / (2 * nu * nu + 1)


def amplitude_fixed_pulse(nu, eps_trunc=0.0, phase_offset=0.0):
    """``Omega = 1``, ``phi = nu ln sin(t / sqrt(1 + nu^2))``, ``T = pi sqrt(1 + nu^2)``.

    The phase diverges logarithmically at both ends. With ``eps_trunc > 0``
    it is held constant on ``[0, eps T]`` and ``[(1 - eps) T, T]``; this
    bounds the phase rate but the pulse no longer inverts exactly.
    """
    nu = _check_nu(nu)
    eps_trunc = float(eps_trunc)
    if not 0.0 <= eps_trunc < 0.5:
        raise DomainError(f"eps_trunc must lie in [0, 0.5), got {eps_trunc}")
    root = np.sqrt(1.0 + nu * nu)
    T = np.pi * root

    def sampler(t):
        t = np.clip(np.asarray(t, dtype=float), eps_trunc * T, (1.0 - eps_trunc) * T)
        sn = np.maximum(np.sin(t / root), np.finfo(float).tiny)
        return np.ones_like(t), nu * np.log(sn) + phase_offset

    return Pulse(T, sampler=sampler)


def _check_n(n, minimum=1):
    if int(n) != n or n < minimum:
        raise DomainError(f"polynomial index must be an integer >= {minimum}, got {n}")
    return int(n)


def chebyshev_curve(n):
    """``dk/ds = ((1-s^2)^(3/2) U_2n, (1-s^2) T_2n+1, -2s)`` on ``[-1, 1]``, ``kz = 1 - s^2``."""
    n = _check_n(n)
    k = 2 * n + 1
    Tk = Chebyshev.basis(k)
    # U_{k-1} = T_k' / k
    U = [Tk.deriv(j + 1) / k for j in range(3)]
    Tp = [Tk.deriv(j) for j in range(3)]

    def parts(s):
        s = np.asarray(s, dtype=float)
        q = np.maximum((1.0 - s) * (1.0 + s), 0.0)
        r = np.sqrt(q)
        return s, q, r, [p(s) for p in U], [p(s) for p in Tp]

    def d1(s):
        s, q, r, u, t = parts(s)
        return np.stack([q * r * u[0], q * t[0], -2 * s])

    def d2(s):
        s, q, r, u, t = parts(s)
        return np.stack([q * r * u[1] - 3 * s * r * u[0],
                         q * t[1] - 2 * s * t[0],
                         np.full_like(s, -2.0)])

    def d3(s):
        s, q, r, u, t = parts(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = q * r * u[2] - 6 * s * r * u[1] + (3 * s * s / r - 3 * r) * u[0]
        return np.stack([x, q * t[2] - 4 * s * t[1] - 2 * t[0], np.zeros_like(s)])

    return KCurve(-1.0, 1.0, d1, d2, d3, kz=lambda s: 1.0 - np.asarray(s) ** 2,
                  name=f"chebyshev(n={n})")


def chebyshev_s_of_t(t):
    """Real root of ``s + s^3/3 + 4/3 = t`` by Cardano's formula."""
    c = (4.0 - 3.0 * np.asarray(t, dtype=float)) / 2.0
    r = np.sqrt(1.0 + c * c)
    return np.cbrt(r - c) - np.cbrt(r + c)


def chebyshev_pulse(n, phase_offset=0.0):
    """Closed-form Chebyshev inversion pulse of duration ``8/3``."""
    n = _check_n(n)
    k = 2 * n + 1

    def sampler(t):
        s = np.clip(chebyshev_s_of_t(t), -1.0, 1.0)
        q = (1.0 - s) * (1.0 + s)
        om = np.sqrt(4.0 + k * k * q) / (1.0 + s * s) ** 2
        ph = np.sqrt(2.0) * k * np.arctanh(np.sqrt(q / 2.0)) + np.arctan(k * np.sqrt(q) / 2.0)
        return om, ph + phase_offset

    return Pulse(8.0 / 3.0, sampler=sampler)


def excitation_curve(theta_T, n):
    """Jacobi-polynomial curve on ``[-1, 1]`` ending along ``(sin theta_T, 0, cos theta_T)``.

    ``n = 2N - 1`` cancels the first ``N`` moments. ``dk/ds(1) = 2 (sin theta_T, 0, cos theta_T)``.
    """
    theta_T = float(theta_T)
    if not 0.0 < theta_T < np.pi:
        raise DomainError(f"theta_T must lie in (0, pi), got {theta_T}")
    n = _check_n(n)
    if n % 2 == 0:
        raise DomainError(f"excitation curves need an odd polynomial index, got {n}")
    sin_t = np.sin(theta_T)
    c2, s2 = np.cos(theta_T / 2) ** 2, np.sin(theta_T / 2) ** 2
    P = specfun.jacobi_polynomial_derivative

    def combos(s, order):
        a = P(n, 0, 1, s, order)
        b = P(n + 1, 0, 1, s, order)
        return sin_t / 2 * (a + b), (n + 1) / 2 * (a - b)

    def d1(s):
        s = np.asarray(s, dtype=float)
        x, y = combos(s, 0)
        return np.stack([(1 + s) * x, (1 + s) * y, 2 * (c2 - s * s2)])

    def d2(s):
        s = np.asarray(s, dtype=float)
        x0, y0 = combos(s, 0)
        x1, y1 = combos(s, 1)
        return np.stack([x0 + (1 + s) * x1, y0 + (1 + s) * y1, np.full_like(s, -2 * s2)])

    def d3(s):
        s = np.asarray(s, dtype=float)
        x1, y1 = combos(s, 1)
        x2, y2 = combos(s, 2)
        return np.stack([2 * x1 + (1 + s) * x2, 2 * y1 + (1 + s) * y2, np.zeros_like(s)])

    def kz(s):
        s = np.asarray(s, dtype=float)
        return (1 + s) ** 2 * c2 + 1 - s * s

    return KCurve(-1.0, 1.0, d1, d2, d3, kz=kz, theta_T=theta_T, scale=2.0,
                  name=f"excitation(theta={theta_T:g}, n={n})")


def excitation_pulse(theta_T, n, n_samples=1024, phase_offset=0.0):
    return pulse_from_kcurve(excitation_curve(theta_T, n), n_samples, phase_offset)


def scale_pulse(pulse, omega_max):
    """Physical-unit pulse: ``Omega_p(tau) = omega_max Omega(omega_max tau)``, ``T_p = T/omega_max``."""
    w = float(omega_max)
    if not (np.isfinite(w) and w > 0):
        raise DomainError(f"omega_max must be positive, got {omega_max}")
    if pulse.is_piecewise:
        dt, om, ph = pulse.segments
        return Pulse(pulse.duration / w, segments=(dt / w, om * w, ph), omega_max=w,
                     rule=pulse.rule)
    inner = pulse.sampler

    def sampler(tau):
        om, ph = inner(np.asarray(tau, dtype=float) * w)
        return om * w, ph

    return Pulse(pulse.duration / w, sampler=sampler, omega_max=w, rule=pulse.rule)


FAMILIES = ("anger-weber", "jacobi", "gen-jacobi", "amp-fixed", "chebyshev", "excitation")


def make_pulse(family, nu=0.0, m=0.0, moduli=None, n=1, theta=np.pi / 2, eps_trunc=0.0,
               n_samples=1024, phase_offset=0.0):
    """Pulse for a family name; only the parameters relevant to the family are read."""
    if family == "anger-weber":
        return anger_weber_pulse(nu, phase_offset)
    if family == "jacobi":
        return jacobi_pulse(nu, m, phase_offset)
    if family == "gen-jacobi":
        return generalized_jacobi_pulse(nu, moduli if moduli is not None else [m], phase_offset)
    if family == "amp-fixed":
        return amplitude_fixed_pulse(nu, eps_trunc, phase_offset)
    if family == "chebyshev":
        return chebyshev_pulse(n, phase_offset)
    if family == "excitation":
        return excitation_pulse(theta, n, n_samples, phase_offset)
    raise DomainError(f"unknown family {family!r}; expected one of {FAMILIES}")


def make_curve(family, nu=0.0, m=0.0, moduli=None, n=1, theta=np.pi / 2, **_):
    """KCurve for a family name, or ``None`` for families defined only as pulses."""
    if family == "anger-weber":
        return anger_weber_curve(nu)
    if family == "jacobi":
        return jacobi_curve(nu, m)
    if family == "gen-jacobi":
        return generalized_jacobi_curve(nu, moduli if moduli is not None else [m])
    if family == "chebyshev":
        return chebyshev_curve(n)
    if family == "excitation":
        return excitation_curve(theta, n)
    if family == "amp-fixed":
        return None
    raise DomainError(f"unknown family {family!r}; expected one of {FAMILIES}")
