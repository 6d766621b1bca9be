"""k-space curves: arc-length time map, pulse synthesis and offset response.

A curve is described by its first three derivatives with respect to a
parameter ``s`` on ``[s0, sT]``. Its unit tangent is the toggling-frame axis
``v``; the pulse amplitude is the curvature and the phase rate the torsion
of the curve after reparameterisation by arc length ``t``.

Integrals over ``s`` are taken in the variable ``theta`` with
``s = c - h cos(theta)``, which removes the square-root endpoint behaviour
of the polynomial families.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from ._quad import Tabulated, integrate
from .bloch import Pulse, TogglingTrajectory
from .errors import CurvatureError, DegenerateCurveError, DomainError, UsageError

DEFAULT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class KCurve:
    """Curve ``s -> k(s)`` given through ``d1 = dk/ds``, ``d2``, ``d3``.

    Each derivative maps an array of ``s`` values to an array of shape
    ``(3,) + s.shape``. ``kz`` optionally gives ``k_z(s)`` in closed form
    (with ``k_z(s0) = 0``). ``scale`` is the endpoint factor ``A`` in
    ``d1(sT) = A (sin theta_T, 0, cos theta_T)``.
    """

    s0: float
    sT: float
    d1: Callable
    d2: Callable
    d3: Callable
    kz: Optional[Callable] = None
    theta_T: float = np.pi
    scale: Optional[float] = None
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.sT > self.s0:
            raise DomainError("curve bounds must satisfy s0 < sT")

    # cosine map s = c - h cos(theta)
    @property
    def _c(self):
        return 0.5 * (self.s0 + self.sT)

    @property
    def _h(self):
        return 0.5 * (self.sT - self.s0)

    def s_of_theta(self, theta):
        return self._c - self._h * np.cos(theta)

    def jacobian(self, s):
        """``ds/dtheta = sqrt((s - s0)(sT - s))``, evaluated from the rounded ``s``."""
        s = np.asarray(s, dtype=float)
        return np.sqrt(np.maximum((s - self.s0) * (self.sT - s), 0.0))

    def theta_of_s(self, s):
        return np.arccos(np.clip((self._c - np.asarray(s, dtype=float)) / self._h, -1.0, 1.0))

    def speed(self, s):
        return np.linalg.norm(self.d1(s), axis=0)

    def curvature(self, s):
        """Pulse amplitude ``|d1 x d2| / |d1|^3``."""
        d1, d2 = self.d1(s), self.d2(s)
        return np.linalg.norm(np.cross(d1, d2, axis=0), axis=0) / np.linalg.norm(d1, axis=0) ** 3

    def phase_rate(self, s):
        """``d phi / ds = [(d1 x d2) . d3] |d1| / |d1 x d2|^2``."""
        d1, d2, d3 = self.d1(s), self.d2(s), self.d3(s)
        b = np.cross(d1, d2, axis=0)
        return np.sum(b * d3, axis=0) * np.linalg.norm(d1, axis=0) / np.sum(b * b, axis=0)

    def _table(self, key, rate):
        if key not in self._cache:
            def f(theta):
                s = self.s_of_theta(theta)
                return rate(s) * self.jacobian(s)

            self._cache[key] = (Tabulated(f, 0.0, np.pi, n_table=256, tol=1e-14, smooth=True), f)
        return self._cache[key]

    def _time_table(self):
        if "time" not in self._cache:
            theta = np.linspace(0.0, np.pi, 2049)[1:-1]
            small = self.speed(self.s_of_theta(theta)) < 1e-12
            if np.any(small[1:] & small[:-1]):
                raise DegenerateCurveError("|dk/ds| vanishes on a subinterval of the curve")
        return self._table("time", self.speed)

    def kz_of_s(self, s):
        """``k_z(s)``, closed form if available, otherwise by quadrature of ``d1_z``."""
        if self.kz is not None:
            return np.asarray(self.kz(np.asarray(s, dtype=float)), dtype=float)
        table, _ = self._table("kz", lambda x: self.d1(x)[2])
        return table(self.theta_of_s(s))

    @property
    def duration(self):
        return float(self._time_table()[0].total)


def _check_s(curve, s):
    s = np.asarray(s, dtype=float)
    tol = 1e-12 * max(1.0, abs(curve.s0), abs(curve.sT))
    if np.any(s < curve.s0 - tol) | np.any(s > curve.sT + tol) or not np.all(np.isfinite(s)):
        raise DomainError(f"s outside [{curve.s0}, {curve.sT}]")
    return np.clip(s, curve.s0, curve.sT)


def time_of_s(curve, s):
    """Arc length ``t(s) = int_{s0}^{s} |d1| ds'``."""
    s = _check_s(curve, s)
    table, _ = curve._time_table()
    out = table(curve.theta_of_s(s))
    return float(out) if out.ndim == 0 else out


def duration(curve):
    return curve.duration


def s_of_t(curve, t):
    """Inverse of ``time_of_s`` by safeguarded Newton on the tabulated arc length."""
    t = np.asarray(t, dtype=float)
    table, f = curve._time_table()
    T = table.total
    tol = 1e-12 * max(1.0, T)
    if not np.all(np.isfinite(t)) or np.any(t < -tol) or np.any(t > T + tol):
        raise DomainError(f"t outside [0, {T}]")
    theta = table.inverse(np.clip(t, 0.0, T), f, ftol=1e-15)
    out = curve.s_of_theta(theta)
    return float(out) if out.ndim == 0 else out


def phase_of_s(curve, s):
    """Pulse phase ``phi(s)`` with ``phi(s0) = 0``."""
    s = _check_s(curve, s)
    table, _ = curve._table("phase", curve.phase_rate)
    out = table(curve.theta_of_s(s))
    return float(out) if out.ndim == 0 else out


def pulse_from_kcurve(curve, n_samples=1024, phase_offset=0.0, eps=1e-10):
    """Pulse whose toggling-frame axis follows the unit tangent of ``curve``.

    The amplitude is the curvature and the phase the integrated torsion of
    the arc-length parameterised curve. ``n_samples`` uniform times are used
    to screen for vanishing ``|d1 x d2|``; the returned pulse evaluates the
    exact formulas at any time. ``phase_offset`` rotates the azimuth of the
    toggling frame.
    """
    T = curve.duration
    if n_samples < 2:
        raise UsageError("n_samples must be at least 2")
    s = s_of_t(curve, np.linspace(0.0, T, n_samples)[1:-1])
    b = np.linalg.norm(np.cross(curve.d1(s), curve.d2(s), axis=0), axis=0)
    if np.any(b < eps):
        i = int(np.argmax(b < eps))
        raise CurvatureError(f"|d1 x d2| < {eps:g} at s={s[i]:.6g}: phase undefined")

    def sampler(t):
        s = s_of_t(curve, t)
        return curve.curvature(s), phase_of_s(curve, s) + phase_offset

    return Pulse(T, sampler=sampler)


def _panels_for(curve, delta):
    kz = curve.kz_of_s(curve.s_of_theta(np.linspace(0.0, np.pi, 65)))
    span = float(np.ptp(kz))
    return int(np.ceil(np.max(np.abs(delta), initial=0.0) * span / np.pi)) + 4


def sta_transfer(curve, delta, tol=DEFAULT_TOL):
    """Small-tip-angle transfer ``l(delta, T)``.

    ``l = i delta exp(-i delta kz(sT)) int (d1_x + i d1_y) exp(i delta kz) ds``;
    ``delta`` may be an array.
    """
    delta = np.asarray(delta, dtype=float)
    d = delta.ravel()

    def f(theta):
        s = curve.s_of_theta(theta)
        d1 = curve.d1(s)
        w = (d1[0] + 1j * d1[1]) * curve.jacobian(s)
        return w * np.exp(1j * d[:, None, None] * curve.kz_of_s(s))

    I = integrate(f, 0.0, np.pi, tol=tol / max(1.0, np.max(np.abs(d), initial=0.0)),
                  panels=_panels_for(curve, d))
    kzT = curve.kz_of_s(curve.sT)
    ell = 1j * d * np.exp(-1j * d * kzT) * I
    return complex(ell[0]) if delta.ndim == 0 else ell.reshape(delta.shape)


def sta_transfer_from_v(traj, delta):
    """Small-tip-angle transfer from a sampled trajectory (trapezoidal rule)."""
    t = np.asarray(traj.t, dtype=float)
    v = np.asarray(traj.v, dtype=float)
    delta = np.asarray(delta, dtype=float)
    d = delta.ravel()[:, None]
    h = np.diff(t)
    kz = np.concatenate([[0.0], np.cumsum(0.5 * h * (v[1:, 2] + v[:-1, 2]))])
    g = (v[:, 0] + 1j * v[:, 1]) * np.exp(1j * d * kz)
    I = np.sum(0.5 * h * (g[:, 1:] + g[:, :-1]), axis=1)
    ell = 1j * d[:, 0] * np.exp(-1j * d[:, 0] * kz[-1]) * I
    return complex(ell[0]) if delta.ndim == 0 else ell.reshape(delta.shape)


def sta_cost(ell, return_wrap=False):
    """``J_STA = 1 - cos|l|``.

    With ``return_wrap`` also returns a flag that is true where
    ``|l| >= 2 pi``: the cost has wrapped and the approximation is not valid.
    """
    a = np.abs(np.asarray(ell))
    J = 1.0 - np.cos(a)
    J = float(J) if J.ndim == 0 else J
    if return_wrap:
        wrap = a >= 2.0 * np.pi
        return J, (bool(wrap) if np.ndim(wrap) == 0 else wrap)
    return J


def sta_profile(source, grid):
    """STA ``CostProfile`` from a ``KCurve`` or a ``TogglingTrajectory``."""
    from .bloch import CostProfile

    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise UsageError("offset grid is empty")
    if isinstance(source, TogglingTrajectory):
        ell = sta_transfer_from_v(source, grid)
    elif isinstance(source, KCurve):
        ell = sta_transfer(source, grid)
    else:
        raise UsageError("STA costs need a k-space curve or a toggling trajectory")
    J, wrap = sta_cost(ell, return_wrap=True)
    return CostProfile(grid, np.atleast_1d(J), "sta", np.atleast_1d(wrap))


@dataclass(frozen=True)
class MomentVector:
    """Local-robustness moments ``C_0..C_N``.

    ``C_n`` multiplies ``delta^n`` in the expansion of the transfer ``l``:
    ``C_n = int (d1_x + i d1_y) kz^(n-1) ds`` for ``n >= 1`` and ``C_0 = 0``.
    A curve is robust to order ``N`` when ``C_1..C_N`` vanish.
    """

    values: np.ndarray

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @property
    def N(self):
        return len(self.values) - 1

    def order(self, tol=1e-9):
        """Largest ``N`` with ``|C_1..C_N| < tol``."""
        k = 0
        for c in self.values[1:]:
            if abs(c) >= tol:
                break
            k += 1
        return k


def kz_moments(curve, N, tol=1e-12):
    """Raw moments ``int (d1_x + i d1_y) kz^j ds`` for ``j = 0..N``."""
    N = int(N)
    if N < 0:
        raise UsageError("moment order must be non-negative")
    j = np.arange(N + 1)[:, None, None]

    def f(theta):
        s = curve.s_of_theta(theta)
        d1 = curve.d1(s)
        w = (d1[0] + 1j * d1[1]) * curve.jacobian(s)
        return w * curve.kz_of_s(s) ** j

    return integrate(f, 0.0, np.pi, tol=tol, panels=8)


def local_moments(curve, N, tol=1e-12):
    """``MomentVector`` ``C_0..C_N`` (see :class:`MomentVector` for the indexing)."""
    N = int(N)
    if N < 0:
        raise UsageError("moment order must be non-negative")
    raw = kz_moments(curve, max(N - 1, 0), tol) if N else np.zeros(0, complex)
    return MomentVector(np.concatenate([[0j], raw[:N]]))


def tf_exact_cost(curve, delta, rtol=1e-12):
    """Exact inversion cost ``1 - L_z(T)`` in the toggling frame of ``curve``.

    Integrates ``dL/ds = -delta d1(s) x L`` from ``L = z`` with the transverse
    part scaled by ``1/delta`` and returns ``|L_perp|^2 / (1 + L_z)``, which
    keeps full relative precision when the cost is far below machine epsilon.
    For an inversion curve this equals ``1 + M_z(delta, T)``.
    """
    delta = np.asarray(delta, dtype=float)
    out = np.empty(delta.shape)
    for idx in np.ndindex(delta.shape):
        d = float(delta[idx])
        if d == 0.0:
            out[idx] = 0.0
            continue

        def rhs(theta, y):
            s = curve.s_of_theta(theta)
            a = curve.d1(np.asarray(s)) * curve.jacobian(s)
            px, py, lz = y
            return [-(a[1] * lz - d * a[2] * py),
                    -(d * a[2] * px - a[0] * lz),
                    -d * d * (a[0] * py - a[1] * px)]

        sol = solve_ivp(rhs, (0.0, np.pi), [0.0, 0.0, 1.0], method="DOP853",
                        rtol=rtol, atol=1e-30)
        px, py, lz = sol.y[:, -1]
        out[idx] = d * d * (px * px + py * py) / (1.0 + lz)
    return float(out) if out.ndim == 0 else out


def v_of_t(curve, t):
    """Unit tangent of the curve at arc-length times ``t``, shape ``t.shape + (3,)``."""
    s = s_of_t(curve, t)
    d1 = curve.d1(np.asarray(s))
    return np.moveaxis(d1 / np.linalg.norm(d1, axis=0), 0, -1)


__all__ = [
    "KCurve", "MomentVector", "time_of_s", "s_of_t", "duration", "phase_of_s",
    "pulse_from_kcurve", "sta_transfer", "sta_transfer_from_v", "sta_cost",
    "sta_profile", "kz_moments", "local_moments", "tf_exact_cost", "v_of_t",
]
