"""Bloch propagation, toggling-frame trajectories and offset cost profiles.

The model is ``dM/dt = -w x M`` with effective field ``w = (u_x, u_y, delta)``
and control ``u_x + i u_y = Omega exp(i phi)``. Over a step where the field
is constant the solution is an exact rotation about ``w`` by ``-|w| dt``.
Analytic pulses are stepped with a fourth-order Magnus rotation built from
the exact integrals of ``u`` and ``(t - t_mid) u`` over each step.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._quad import integrate_panels
from .errors import CurvatureError, NumericalError, UsageError

Z_AXIS = np.array([0.0, 0.0, 1.0])
RULES = ("magnus4", "average", "midpoint")
METHODS = ("exact", "toggling", "aht")


@dataclass(frozen=True, eq=False)
class Pulse:
    """A control waveform on ``[0, duration]``.

    Either ``sampler`` (a vectorised map ``t -> (omega, phi)``) or
    ``segments`` (arrays ``dt, omega, phi`` of a piecewise-constant pulse)
    must be given. ``omega_max`` records the unit scale of a pulse exported
    to physical units.
    """

    duration: float
    sampler: Optional[Callable] = None
    segments: Optional[tuple] = None
    omega_max: Optional[float] = None
    rule: str = "magnus4"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise UsageError(f"pulse duration must be positive, got {self.duration}")
        if (self.sampler is None) == (self.segments is None):
            raise UsageError("a pulse needs exactly one of sampler or segments")
        if self.rule not in RULES:
            raise UsageError(f"unknown discretization rule {self.rule!r}")
        if self.segments is not None:
            dt, om, ph = (np.asarray(a, dtype=float) for a in self.segments)
            if not (dt.shape == om.shape == ph.shape and dt.ndim == 1 and dt.size):
                raise UsageError("segment arrays must be non-empty and of equal length")
            if np.any(dt <= 0):
                raise UsageError("segment durations must be positive")
            object.__setattr__(self, "segments", (dt, om, ph))

    @classmethod
    def piecewise(cls, dt, omega, phi, omega_max=None):
        """Piecewise-constant pulse; ``dt`` may be a scalar (uniform segments)."""
        omega = np.asarray(omega, dtype=float)
        dt = np.broadcast_to(np.asarray(dt, dtype=float), omega.shape).copy()
        return cls(float(dt.sum()), segments=(dt, omega, np.asarray(phi, dtype=float)),
                   omega_max=omega_max)

    @classmethod
    def from_samples(cls, t, omega, phi, **kw):
        """Analytic-style pulse interpolating ``(omega, phi)`` linearly between samples."""
        t = np.asarray(t, dtype=float)
        omega = np.asarray(omega, dtype=float)
        phi = np.asarray(phi, dtype=float)

        def sampler(x):
            return np.interp(x, t, omega), np.interp(x, t, phi)

        return cls(float(t[-1] - t[0]), sampler=sampler, **kw)

    @property
    def is_piecewise(self):
        return self.segments is not None

    @property
    def edges(self):
        """Segment boundaries of a piecewise pulse."""
        return np.concatenate([[0.0], np.cumsum(self.segments[0])])

    def sample(self, t):
        """Amplitude and phase at times ``t``."""
        t = np.asarray(t, dtype=float)
        if self.sampler is not None:
            om, ph = self.sampler(t)
            return np.broadcast_to(om, t.shape) * 1.0, np.broadcast_to(ph, t.shape) * 1.0
        dt, om, ph = self.segments
        k = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, dt.size - 1)
        return om[k], ph[k]

    def control(self, t):
        """Complex control ``u_x + i u_y``."""
        om, ph = self.sample(t)
        return om * np.exp(1j * ph)

    def ux(self, t):
        return self.control(t).real

    def uy(self, t):
        return self.control(t).imag

    def discretize(self, n_steps=4096, rule=None):
        """Piecewise-constant representation ``(dt, omega, phi)``.

        Piecewise pulses are returned unchanged. For analytic pulses the
        interval is cut into ``n_steps`` equal steps and each step takes either
        the exact average of the complex control over the step (``'average'``
        and ``'magnus4'``) or its value at the step midpoint (``'midpoint'``).
        """
        return self.steps(n_steps, rule)[:3]

    def steps(self, n_steps=4096, rule=None):
        """``(dt, omega, phi, b1)`` per step, ``b1 = int (t - t_mid) u dt / dt``.

        ``b1`` is the first moment of the control used by the fourth-order
        Magnus step; it is zero except for analytic pulses under ``'magnus4'``.
        """
        rule = self.rule if rule is None else rule
        if rule not in RULES:
            raise UsageError(f"unknown discretization rule {rule!r}")
        if self.segments is not None:
            dt, om, ph = self.segments
            return dt, om, ph, np.zeros(dt.size, complex)
        n_steps = int(n_steps)
        if n_steps < 1:
            raise UsageError("n_steps must be at least 1")
        key = (n_steps, "average" if rule == "magnus4" else rule)
        if key not in self._cache:
            edges = np.linspace(0.0, self.duration, n_steps + 1)
            dt = np.diff(edges)
            b1 = np.zeros(n_steps, complex)
            if rule == "midpoint":
                om, ph = self.sample(0.5 * (edges[:-1] + edges[1:]))
            else:
                def f(t):
                    u = self.control(t)
                    return np.stack([u, t * u])

                I0, I1 = integrate_panels(f, edges[:-1], edges[1:], tol=1e-13 * dt[0])
                avg = I0 / dt
                b1 = (I1 - 0.5 * (edges[:-1] + edges[1:]) * I0) / dt
                om, ph = np.abs(avg), np.angle(avg)
            if not all(np.all(np.isfinite(a)) for a in (om, ph, b1)):
                raise NumericalError("pulse samples are not finite")
            self._cache[key] = (dt, om, ph, b1)
        dt, om, ph, b1 = self._cache[key]
        return dt, om, ph, (b1 if rule == "magnus4" else np.zeros_like(b1))

    def to_piecewise(self, n_steps=4096, rule=None):
        dt, om, ph = self.discretize(n_steps, rule)
        return Pulse(self.duration, segments=(dt, om, ph), omega_max=self.omega_max)


def rotation_matrices(axis_angle):
    """Rodrigues matrices for rotation vectors ``axis_angle`` of shape (..., 3)."""
    w = np.asarray(axis_angle, dtype=float)
    theta = np.linalg.norm(w, axis=-1)
    safe = np.where(theta > 0, theta, 1.0)
    n = w / safe[..., None]
    c, s = np.cos(theta), np.sin(theta)
    nx, ny, nz = n[..., 0], n[..., 1], n[..., 2]
    K = np.zeros(w.shape + (3,))
    K[..., 0, 1], K[..., 0, 2] = -nz, ny
    K[..., 1, 0], K[..., 1, 2] = nz, -nx
    K[..., 2, 0], K[..., 2, 1] = -ny, nx
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + s[..., None, None] * K + (1.0 - c)[..., None, None] * (K @ K)


def step_rotations(dt, omega, phi, delta, b1=None):
    """Per-step propagators, shape ``(len(delta), K, 3, 3)`` (or ``(K, 3, 3)``).

    Without ``b1`` each step rotates by ``-W0`` with ``W0 = w dt``. With the
    first moments ``b1`` the rotation vector is ``-W0 + W1 x W0``,
    ``W1 = (Re b1, Im b1, 0)``: the Magnus expansion truncated at fourth order.
    """
    delta = np.asarray(delta, dtype=float)
    ux = omega * np.cos(phi)
    uy = omega * np.sin(phi)
    d = delta[..., None]
    W0 = np.stack(np.broadcast_arrays(ux, uy, d + 0.0 * ux), axis=-1) * dt[:, None]
    r = -W0
    if b1 is not None and np.any(b1):
        W1 = np.stack([b1.real, b1.imag, np.zeros(b1.shape)], axis=-1)
        r = r + np.cross(W1, W0)
    return rotation_matrices(r)


def compose(R):
    """Ordered product ``R[K-1] @ ... @ R[0]`` over the step axis (-3)."""
    while R.shape[-3] > 1:
        if R.shape[-3] % 2:
            pad = np.broadcast_to(np.eye(3), R.shape[:-3] + (1, 3, 3))
            R = np.concatenate([R, pad], axis=-3)
        R = R[..., 1::2, :, :] @ R[..., 0::2, :, :]
    return R[..., 0, :, :]


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalError("pulse samples are not finite")


def propagate(pulse, delta, M0=Z_AXIS, n_steps=4096, rule=None):
    """Final Bloch vector ``M(delta, T)`` starting from ``M0``.

    ``delta`` may be a scalar or an array of offsets; the result has shape
    ``delta.shape + (3,)``.
    """
    dt, om, ph, b1 = pulse.steps(n_steps, rule)
    _check_finite(om, ph)
    delta = np.asarray(delta, dtype=float)
    R = compose(step_rotations(dt, om, ph, delta.ravel(), b1))
    M = R @ np.asarray(M0, dtype=float)
    return M.reshape(delta.shape + (3,))


@dataclass(frozen=True)
class TogglingTrajectory:
    """Control-only propagator ``R0`` on a time grid and the rows ``v = R0^T z``."""

    t: np.ndarray
    R: np.ndarray
    v: np.ndarray

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0])


def toggling_trajectory(pulse, n_steps=4096, rule=None):
    """``R0(t_i)`` obtained by composing the exact resonant step rotations.

    For piecewise pulses every segment is split into equal substeps so that
    the grid has about ``n_steps`` intervals.
    """
    if n_steps < 2:
        raise UsageError("n_steps must be at least 2")
    dt, om, ph, b1 = pulse.steps(n_steps, rule)
    if pulse.is_piecewise:
        sub = max(1, int(np.ceil(n_steps / dt.size)))
        dt, om, ph, b1 = (np.repeat(a, sub) for a in (dt / sub, om, ph, b1))
    _check_finite(om, ph)
    steps = step_rotations(dt, om, ph, 0.0, b1)
    R = np.empty((dt.size + 1, 3, 3))
    R[0] = np.eye(3)
    for k in range(dt.size):
        R[k + 1] = steps[k] @ R[k]
    t = np.concatenate([[0.0], np.cumsum(dt)])
    return TogglingTrajectory(t, R, R[:, 2, :].copy())


def pulse_from_v(traj, eps_omega=1e-8):
    """Recover amplitude and phase from a toggling-frame trajectory.

    ``Omega = |dv/dt|`` and ``phi = int (v x dv/dt) . d2v/dt2 / Omega^2 dt``
    with second-order finite differences and the trapezoidal rule; ``phi(0) = 0``.
    """
    t = np.asarray(traj.t, dtype=float)
    v = np.asarray(traj.v, dtype=float)
    if t.size < 5:
        raise UsageError("pulse_from_v needs at least 5 samples")
    h = np.diff(t)
    if not np.allclose(h, h[0], rtol=1e-8, atol=0):
        raise UsageError("pulse_from_v needs a uniform time grid")
    h = h[0]
    if np.max(np.abs(np.linalg.norm(v, axis=1) - 1.0)) > 1e-6:
        raise UsageError("trajectory rows must be unit vectors")
    # a jump between neighbouring samples leaves the derivatives undefined
    if np.min(np.sum(v[1:] * v[:-1], axis=1)) < 0.5:
        raise CurvatureError("trajectory is discontinuous: curvature and phase are undefined")
    dv = np.gradient(v, h, axis=0, edge_order=2)
    d2v = np.empty_like(v)
    d2v[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    d2v[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h**2
    d2v[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h**2
    omega = np.linalg.norm(dv, axis=1)
    if np.any(omega[1:-1] < eps_omega):
        i = 1 + int(np.argmax(omega[1:-1] < eps_omega))
        raise CurvatureError(f"|dv/dt| < {eps_omega:g} at t={t[i]:.6g}: phase undefined")
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.sum(np.cross(v, dv) * d2v, axis=1) / omega**2
    rate = np.where(omega > 0, rate, 0.0)
    phi = np.concatenate([[0.0], np.cumsum(0.5 * h * (rate[1:] + rate[:-1]))])
    return Pulse.from_samples(t - t[0], omega, phi)


@dataclass(frozen=True)
class CostProfile:
    """Cost ``J`` per offset for one method.

    ``wrapped`` flags offsets where the small-tip-angle transfer has
    ``|l| >= 2 pi`` and its cost has wrapped back towards zero.
    """

    offsets: np.ndarray
    costs: np.ndarray
    method: str
    wrapped: Optional[np.ndarray] = None


def aht_cost(traj, delta):
    """First-order average-Hamiltonian cost from ``K = int v dt`` (trapezoid)."""
    v = traj.v
    K = np.sum(0.5 * np.diff(traj.t)[:, None] * (v[1:] + v[:-1]), axis=0)
    norm2 = float(K @ K)
    delta = np.asarray(delta, dtype=float)
    if norm2 == 0.0:
        return np.zeros(delta.shape)
    return 2.0 * np.sin(0.5 * delta * np.sqrt(norm2)) ** 2 * (K[0] ** 2 + K[1] ** 2) / norm2


def cost_profile(pulse, grid, method="exact", n_steps=4096, rule=None):
    """``J(delta)`` over ``grid`` for ``method`` in {exact, toggling, aht}.

    exact: ``1 + M_z``; toggling: ``1 - L_z`` with ``L = R0(T)^T M``;
    aht: ``1 - L_z`` for the first-order Magnus propagator.
    """
    if method not in METHODS:
        raise UsageError(f"unknown cost method {method!r}; expected one of {METHODS}")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise UsageError("offset grid is empty")
    if method == "aht":
        J = aht_cost(toggling_trajectory(pulse, n_steps, rule), grid)
    else:
        M = propagate(pulse, grid, n_steps=n_steps, rule=rule)
        if method == "exact":
            J = 1.0 + M[:, 2]
        else:
            dt, om, ph, b1 = pulse.steps(n_steps, rule)
            R0 = compose(step_rotations(dt, om, ph, 0.0, b1))
            J = 1.0 - M @ R0[:, 2]
    return CostProfile(grid, J, method)
