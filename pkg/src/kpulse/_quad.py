"""Vectorised adaptive Gauss-Legendre quadrature and monotone inversion.

All integrands are called with an array of abscissae of shape ``(P, n)``
(``P`` panels, ``n`` nodes) and must return an array whose trailing two axes
match; leading axes (vector components) are carried through.
"""
import numpy as np
from numpy.polynomial.legendre import leggauss

_NODES, _WEIGHTS = leggauss(15)
_NODES20, _WEIGHTS20 = leggauss(20)


def _rule(f, lo, hi):
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * _NODES
    y = np.asarray(f(x))
    return (y @ _WEIGHTS) * half, (np.abs(y) @ _WEIGHTS) * np.abs(half)


def integrate_panels(f, lo, hi, tol=1e-10, max_depth=60, max_panels=200000):
    """Integrate ``f`` independently over each ``[lo[i], hi[i]]``.

    Each panel is bisected until the 15-point rule on the panel and on its two
    halves agree within ``tol`` scaled by the panel's share of its original
    interval, or until their difference reaches the round-off level of
    ``int |f|``. Refinement stops once more than ``max_panels`` panels are
    active. Returns an array of shape ``(..., P)``.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float)).ravel()
    hi = np.atleast_1d(np.asarray(hi, dtype=float)).ravel()
    width0 = np.abs(hi - lo)
    width0[width0 == 0] = 1.0
    owner = np.arange(lo.size)
    coarse, _ = _rule(f, lo, hi)
    total = np.zeros(coarse.shape, dtype=coarse.dtype)
    scale = np.maximum(np.abs(lo), np.abs(hi))
    for _ in range(max_depth):
        mid = 0.5 * (lo + hi)
        left, aleft = _rule(f, lo, mid)
        right, aright = _rule(f, mid, hi)
        fine = left + right
        err = np.abs(fine - coarse)
        floor = 64 * np.finfo(float).eps * (aleft + aright)
        if err.ndim > 1:
            err = (err - floor).reshape(-1, err.shape[-1]).max(axis=0)
        else:
            err = err - floor
        local = tol * np.abs(hi - lo) / width0[owner]
        tiny = np.abs(hi - lo) <= 1e-15 * np.maximum(scale, 1e-300)
        ok = (err <= local) | tiny | ~np.isfinite(err)
        if ok.any():
            np.add.at(total.T, owner[ok], fine[..., ok].T)
        if ok.all():
            return total
        keep = ~ok
        if 2 * keep.sum() > max_panels:
            np.add.at(total.T, owner[keep], fine[..., keep].T)
            return total
        lo_k, mid_k, hi_k = lo[keep], mid[keep], hi[keep]
        lo = np.concatenate([lo_k, mid_k])
        hi = np.concatenate([mid_k, hi_k])
        owner = np.concatenate([owner[keep], owner[keep]])
        scale = np.concatenate([scale[keep], scale[keep]])
        coarse = np.concatenate([left[..., keep], right[..., keep]], axis=-1)
    np.add.at(total.T, owner, coarse.T)
    return total


def integrate(f, a, b, tol=1e-10, panels=1):
    """Adaptive integral of ``f`` over ``[a, b]`` starting from ``panels`` equal panels."""
    panels = max(int(panels), 1)
    edges = np.linspace(a, b, panels + 1)
    return integrate_panels(f, edges[:-1], edges[1:], tol / panels).sum(axis=-1)


def cumulative(f, a, x, tol=1e-10):
    """Return ``int_a^{x_i} f`` for every entry of ``x`` (any order, any shape)."""
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    order = np.argsort(flat, kind="stable")
    xs = flat[order]
    lo = np.concatenate([[a], xs[:-1]])
    parts = integrate_panels(f, lo, xs, tol)
    sums = np.cumsum(parts, axis=-1)
    out = np.empty_like(sums)
    out[..., order] = sums
    return out.reshape(sums.shape[:-1] + x.shape)


class Tabulated:
    """Running integral ``F(x) = int_a^x f`` backed by a table of breakpoints.

    The table is built adaptively. Queries integrate from the nearest
    breakpoint to the left, with the adaptive rule or, when ``smooth`` is
    set, with a single 20-point Gauss-Legendre rule (ample for an analytic
    integrand over one table cell).
    """

    def __init__(self, f, a, b, n_table=128, tol=1e-13, smooth=False):
        self.f = f
        self.a = float(a)
        self.b = float(b)
        self.tol = tol
        self.smooth = smooth
        self.x = np.linspace(self.a, self.b, n_table + 1)
        pieces = integrate_panels(f, self.x[:-1], self.x[1:], tol)
        self.F = np.concatenate([[0.0], np.cumsum(pieces)])
        with np.errstate(all="ignore"):
            fx = np.asarray(f(self.x[None, :]))[0]
        # endpoint values may be singular; they only seed the inversion guess
        self.fx = np.where(np.isfinite(fx), fx, 0.0)

    @property
    def total(self):
        return self.F[-1]

    def _partial(self, lo, hi):
        if not self.smooth:
            return integrate_panels(self.f, lo, hi, self.tol)
        half = 0.5 * (hi - lo)
        x = (0.5 * (lo + hi))[:, None] + half[:, None] * _NODES20
        return (np.asarray(self.f(x)) @ _WEIGHTS20) * half

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.clip(x.ravel(), self.a, self.b)
        j = np.clip(np.searchsorted(self.x, flat, side="right") - 1, 0, self.x.size - 2)
        out = self.F[j].astype(float)
        need = flat > self.x[j]
        if need.any():
            out[need] += self._partial(self.x[j[need]], flat[need])
        return out.reshape(x.shape)

    def _hermite_guess(self, y, j):
        # invert the cubic Hermite model of F on cell j
        h = self.x[j + 1] - self.x[j]
        F0, F1 = self.F[j], self.F[j + 1]
        m0, m1 = h * self.fx[j], h * self.fx[j + 1]
        span = F1 - F0
        u = np.where(span > 0, (y - F0) / np.where(span > 0, span, 1.0), 0.5)
        u = np.clip(u, 0.0, 1.0)
        for _ in range(6):
            u2, u3 = u * u, u * u * u
            p = (2 * u3 - 3 * u2 + 1) * F0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * F1 + (u3 - u2) * m1
            dp = (6 * u2 - 6 * u) * F0 + (3 * u2 - 4 * u + 1) * m0 + (-6 * u2 + 6 * u) * F1 + (3 * u2 - 2 * u) * m1
            with np.errstate(divide="ignore", invalid="ignore"):
                un = u - (p - y) / dp
            u = np.clip(np.where(np.isfinite(un), un, u), 0.0, 1.0)
        return self.x[j] + u * h

    def inverse(self, y, deriv, ftol=1e-14):
        """Solve ``F(x) = y`` by safeguarded Newton; ``deriv`` evaluates ``f``."""
        y = np.asarray(y, dtype=float)
        flat = y.ravel()
        j = np.clip(np.searchsorted(self.F, flat, side="right") - 1, 0, self.x.size - 2)
        lo, hi = self.x[j], self.x[j + 1]
        x0 = self._hermite_guess(flat, j)
        tol = ftol * max(1.0, abs(self.total))
        x = invert_increasing(self, deriv, flat, lo, hi, x0, ftol=tol)
        return x.reshape(y.shape)


def invert_increasing(func, deriv, target, lo, hi, x0=None, ftol=1e-14, maxiter=100):
    """Vectorised safeguarded Newton for increasing ``func`` bracketed by ``[lo, hi]``.

    A Newton step leaving the current bracket is replaced by bisection.
    """
    target = np.asarray(target, dtype=float).ravel()
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    x = 0.5 * (lo + hi) if x0 is None else np.broadcast_to(np.asarray(x0, float), target.shape).copy()
    active = np.ones(target.shape, dtype=bool)
    for _ in range(maxiter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        xi = x[idx]
        r = func(xi) - target[idx]
        above = r > 0
        hi[idx] = np.where(above, xi, hi[idx])
        lo[idx] = np.where(above, lo[idx], xi)
        conv = np.abs(r) <= ftol
        width = hi[idx] - lo[idx]
        conv |= width <= 4 * np.finfo(float).eps * np.maximum(np.abs(xi), 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xi - r / deriv(xi)
        bad = ~np.isfinite(xn) | (xn <= lo[idx]) | (xn >= hi[idx])
        xn = np.where(bad, 0.5 * (lo[idx] + hi[idx]), xn)
        x[idx] = np.where(conv, xi, xn)
        active[idx[conv]] = False
    return x
