"""Phase-only GRAPE for piecewise-constant inversion pulses.

The cost is the mean of ``1 + M_z(delta, T)`` over an offset grid. Its
gradient with respect to the segment phases is computed exactly by an
adjoint pass: with forward states ``M_k`` and costates ``lam_k`` (propagated
backwards from ``z``),

    dJ/dphi_k = lam_{k+1} . (z x M_{k+1}) - lam_k . (z x M_k),

because rotating the phase of segment ``k`` conjugates its propagator by a
rotation about ``z``.
"""
from dataclasses import dataclass, field

import numpy as np

from .bloch import Pulse, Z_AXIS, propagate, step_rotations
from .errors import NumericalError, UsageError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class GrapeConfig:
    """Optimizer settings; times in seconds, frequencies in rad/s."""

    dt: float
    omega_max: float
    grid: np.ndarray
    max_iters: int = 200
    grad_tol: float = 1e-8
    armijo: float = 1e-4
    shrink: float = 0.5
    max_phase_step: float = 0.1

    def __post_init__(self):
        if not self.dt > 0:
            raise UsageError("segment duration dt must be positive")
        if not self.omega_max > 0:
            raise UsageError("omega_max must be positive")
        grid = np.atleast_1d(np.asarray(self.grid, dtype=float))
        if grid.size == 0:
            raise UsageError("offset grid is empty")
        object.__setattr__(self, "grid", grid)
        if self.max_iters < 0:
            raise UsageError("max_iters must be non-negative")

    @classmethod
    def from_units(cls, dt_us, omega_max_hz, grid_min_hz, grid_max_hz, grid_points, **kw):
        """Build from microseconds and hertz (the config-file units)."""
        if int(grid_points) < 1:
            raise UsageError("grid_points must be at least 1")
        grid = TWO_PI * np.linspace(grid_min_hz, grid_max_hz, int(grid_points))
        return cls(dt=dt_us * 1e-6, omega_max=TWO_PI * omega_max_hz, grid=grid, **kw)


def default_config(**kw):
    """250 us setting: 0.5 us segments, 10 kHz amplitude, 101 offsets in +-10 kHz."""
    return GrapeConfig.from_units(0.5, 1e4, -1e4, 1e4, 101, **kw)


def average_cost(pulse, grid, n_steps=4096):
    """Mean of ``1 + M_z(delta, T)`` over ``grid``."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise UsageError("offset grid is empty")
    return float(np.mean(1.0 + propagate(pulse, grid, n_steps=n_steps)[:, 2]))


def _forward(dt, omega, phi, grid):
    R = step_rotations(dt, omega, phi, grid)  # (D, K, 3, 3)
    K = dt.size
    M = np.empty((grid.size, K + 1, 3))
    M[:, 0] = Z_AXIS
    for k in range(K):
        M[:, k + 1] = np.einsum("dij,dj->di", R[:, k], M[:, k])
    return R, M


def cost_and_gradient(dt, omega, phi, grid):
    """Average cost and its exact gradient with respect to ``phi``."""
    R, M = _forward(dt, omega, phi, grid)
    K = dt.size
    lam = np.empty_like(M)
    lam[:, K] = Z_AXIS
    for k in range(K - 1, -1, -1):
        lam[:, k] = np.einsum("dji,dj->di", R[:, k], lam[:, k + 1])
    zxM = np.stack([-M[..., 1], M[..., 0], np.zeros(M.shape[:-1])], axis=-1)
    proj = np.sum(lam * zxM, axis=-1)  # (D, K + 1)
    grad = np.mean(proj[:, 1:] - proj[:, :-1], axis=0)
    cost = float(np.mean(1.0 + M[:, K, 2]))
    return cost, grad


def _cost(dt, omega, phi, grid):
    _, M = _forward(dt, omega, phi, grid)
    return float(np.mean(1.0 + M[:, -1, 2]))


@dataclass
class GrapeResult:
    pulse: Pulse
    history: list = field(default_factory=list)
    converged: bool = False

    @property
    def initial_cost(self):
        return self.history[0][1]

    @property
    def final_cost(self):
        return self.history[-1][1]


def initial_segments(pulse, config):
    """Sample an analytic pulse at segment midpoints on the config grid, amplitude pinned."""
    K = int(round(pulse.duration / config.dt))
    if K < 1 or abs(K * config.dt - pulse.duration) > 1e-9 * pulse.duration:
        raise UsageError(
            f"pulse duration {pulse.duration:g} is not a multiple of the segment length {config.dt:g}")
    dt, _, phi = pulse.discretize(K, rule="midpoint")
    return Pulse.piecewise(config.dt, np.full(K, config.omega_max), phi, omega_max=config.omega_max)


def _check_initial(pulse, config):
    if not pulse.is_piecewise:
        raise UsageError("GRAPE needs a piecewise-constant initial pulse")
    dt, omega, phi = pulse.segments
    if not np.allclose(dt, config.dt, rtol=1e-9, atol=0):
        raise UsageError(f"segment durations do not match dt = {config.dt:g}")
    if not np.allclose(omega, config.omega_max, rtol=1e-9, atol=0):
        raise UsageError(f"segment amplitudes must all equal omega_max = {config.omega_max:g}")
    return dt, omega, phi


def grape_optimize(initial, config, callback=None):
    """Gradient descent on the segment phases with Armijo backtracking.

    Stops when the gradient norm falls below ``config.grad_tol``, after
    ``config.max_iters`` iterations, or when no step decreases the cost.
    The history holds ``(iteration, cost, grad_norm)`` tuples starting at 0.
    """
    dt, omega, phi = _check_initial(initial, config)
    phi = phi.copy()
    grid = config.grid
    cost, grad = cost_and_gradient(dt, omega, phi, grid)
    gnorm = float(np.linalg.norm(grad))
    history = [(0, cost, gnorm)]
    converged = gnorm < config.grad_tol
    alpha = None
    it = 0
    while not converged and it < config.max_iters:
        it += 1
        if not (np.all(np.isfinite(grad)) and np.isfinite(cost)):
            raise NumericalError("non-finite cost or gradient", iteration=it)
        if alpha is None:
            alpha = config.max_phase_step / max(np.max(np.abs(grad)), 1e-300)
        else:
            alpha = min(2.0 * alpha, config.max_phase_step / max(np.max(np.abs(grad)), 1e-300))
        g2 = gnorm * gnorm
        while True:
            trial = phi - alpha * grad
            c_trial = _cost(dt, omega, trial, grid)
            if c_trial <= cost - config.armijo * alpha * g2:
                break
            alpha *= config.shrink
            if alpha * np.max(np.abs(grad)) < 1e-14:
                trial = None
                break
        if trial is None:
            break
        phi = trial
        cost, grad = cost_and_gradient(dt, omega, phi, grid)
        gnorm = float(np.linalg.norm(grad))
        if not (np.all(np.isfinite(grad)) and np.isfinite(cost)):
            raise NumericalError("non-finite cost or gradient", iteration=it)
        history.append((it, cost, gnorm))
        if callback is not None:
            callback(it, cost, gnorm)
        converged = gnorm < config.grad_tol
    pulse = Pulse.piecewise(dt, omega, phi, omega_max=config.omega_max)
    return GrapeResult(pulse, history, converged)
