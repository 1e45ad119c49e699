"""Numeric kernel: Lambert W, the exponential-integral profile, quadrature and root finders.

Everything here is a pure function of its arguments. Scalar routines use the
``math`` module directly because they sit inside quadrature loops where numpy
call overhead dominates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "ConvergenceError",
    "DomainError",
    "Interval",
    "Tolerance",
    "DEFAULT_TOL",
    "lambert_w0",
    "lambert_w0_of_exp",
    "phi",
    "phi_scaled",
    "integrate_adaptive",
    "find_root_1d",
    "solve_2d_newton",
]

INV_E = math.exp(-1.0)
_EPS = np.finfo(float).eps


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class ConvergenceError(RuntimeError):
    """Iterative method failed to meet its tolerance."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise DomainError("interval endpoints must not be NaN")
        if not self.lo < self.hi:
            raise DomainError(f"empty interval [{self.lo}, {self.hi}]")
        if math.isinf(self.lo):
            raise DomainError("lower endpoint must be finite")


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_iter: int = 100

    def __post_init__(self) -> None:
        if not self.abs_tol >= 1e-15:
            raise DomainError("abs_tol below machine-epsilon scale")
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")


DEFAULT_TOL = Tolerance()


# ---------------------------------------------------------------------------
# Lambert W
# ---------------------------------------------------------------------------

def _w0_initial(x: float) -> float:
    if x < -0.32:
        # branch-point series in p = sqrt(2(ex + 1))
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    if x < 3.0:
        lx = math.log1p(x)
        return lx * (1.0 - math.log1p(lx) / (2.0 + lx))
    l1 = math.log(x)
    l2 = math.log(l1)
    return l1 - l2 + l2 / l1


def lambert_w0(x: float, max_iter: int = 100) -> float:
    """Principal branch of the Lambert W function for real ``x >= -1/e``.

    Halley iteration on ``w e^w - x`` seeded by a piecewise initial guess.

    Raises:
        DomainError: if ``x < -1/e`` or ``x`` is NaN.
    """
    x = float(x)
    if math.isnan(x) or x < -INV_E:
        # tolerate the rounding of -1/e itself
        if not (x < -INV_E and x >= -INV_E * (1 + 4 * _EPS)):
            raise DomainError(f"lambert_w0 undefined for x={x!r} < -1/e")
        return -1.0
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    if x == -INV_E:
        return -1.0
    if x > 1e300:
        # e^w overflows inside Halley; solve w + ln w = ln x instead
        return lambert_w0_of_exp(math.log(x))
    w = _w0_initial(x)
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        dw = f / denom
        w -= dw
        if w < -1.0:
            w = -1.0
        if abs(dw) <= 4 * _EPS * (1.0 + abs(w)):
            break
    return w


def lambert_w0_of_exp(a: float, max_iter: int = 100) -> float:
    """Return ``W0(exp(a))`` without forming ``exp(a)``.

    For ``a >= 3`` this is a Newton iteration on ``w + ln w - a = 0`` started
    from ``a - ln a``; below that the ordinary routine is used on ``exp(a)``.
    """
    a = float(a)
    if math.isnan(a):
        raise DomainError("lambert_w0_of_exp of NaN")
    if math.isinf(a):
        return math.inf if a > 0 else 0.0
    if a < 3.0:
        return lambert_w0(math.exp(a), max_iter=max_iter)
    w = a - math.log(a)
    for _ in range(max_iter):
        w_new = w * (1.0 + a - math.log(w)) / (1.0 + w)
        if abs(w_new - w) <= 4 * _EPS * w_new:
            return w_new
        w = w_new
    return w


# ---------------------------------------------------------------------------
# Quadrature and root finding
# ---------------------------------------------------------------------------

def integrate_adaptive(
    f: Callable[[float], float],
    interval: Interval,
    tol: Tolerance = DEFAULT_TOL,
    points: Sequence[float] | None = None,
) -> float:
    """Adaptive Gauss-Kronrod quadrature of ``f`` over ``interval``.

    ``interval.hi`` may be ``inf``. Raises :class:`ConvergenceError` when the
    error estimate exceeds ``max(abs_tol, rel_tol * |result|)`` after the
    subdivision limit (``tol.max_iter`` subintervals).
    """
    lo, hi = interval.lo, interval.hi
    kwargs = dict(epsabs=tol.abs_tol, epsrel=tol.rel_tol, limit=max(tol.max_iter, 1), full_output=1)
    if points is not None and math.isfinite(hi):
        kwargs["points"] = list(points)
    res = integrate.quad(f, lo, hi, **kwargs)
    value, err = res[0], res[1]
    if not math.isfinite(value):
        raise ConvergenceError(f"non-finite quadrature result on [{lo}, {hi}]")
    bound = max(tol.abs_tol, tol.rel_tol * abs(value))
    # quad's estimate is pessimistic by ~10x for smooth integrands; allow it
    if err > 10.0 * bound and len(res) > 3:
        raise ConvergenceError(
            f"quadrature on [{lo}, {hi}] did not converge: err={err:.3e} > {bound:.3e}"
        )
    return float(value)


def find_root_1d(
    f: Callable[[float], float],
    bracket: Interval,
    tol: Tolerance = DEFAULT_TOL,
) -> float:
    """Bracketed root of a scalar function (Brent's method).

    Raises:
        DomainError: if ``f(lo)`` and ``f(hi)`` have the same strict sign.
        ConvergenceError: if ``tol.max_iter`` iterations are exhausted.
    """
    lo, hi = bracket.lo, bracket.hi
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise DomainError(f"no sign change on [{lo}, {hi}]: f={flo:.3e}, {fhi:.3e}")
    try:
        root = optimize.brentq(
            f, lo, hi, xtol=tol.abs_tol, rtol=max(tol.rel_tol, 4 * _EPS), maxiter=tol.max_iter
        )
    except RuntimeError as exc:
        raise ConvergenceError(str(exc)) from exc
    return float(root)


def solve_2d_newton(
    F: Callable[[float, float], tuple[float, float]],
    guess: tuple[float, float],
    tol: Tolerance = DEFAULT_TOL,
    fd_step: float | None = None,
    accept: Callable[[float, float], bool] | None = None,
) -> tuple[float, float]:
    """Damped Newton iteration for two equations in two unknowns.

    The Jacobian is a forward-difference approximation with relative step
    ``fd_step`` (default ``sqrt(eps)``). A full step that does not reduce
    ``||F||_inf`` is halved up to 30 times. ``accept`` can veto trial points
    (e.g. outside a validity domain); vetoed points are treated like a residual
    increase.
    """
    x, y = float(guess[0]), float(guess[1])
    rel = math.sqrt(_EPS) if fd_step is None else fd_step
    fx, fy = F(x, y)
    norm = max(abs(fx), abs(fy))
    for _ in range(tol.max_iter):
        if norm <= tol.abs_tol:
            return x, y
        hx = rel * max(1.0, abs(x))
        hy = rel * max(1.0, abs(y))
        f1x, f1y = F(x + hx, y)
        f2x, f2y = F(x, y + hy)
        jac = np.array([[(f1x - fx) / hx, (f2x - fx) / hy], [(f1y - fy) / hx, (f2y - fy) / hy]])
        det = np.linalg.det(jac)
        scale = np.abs(jac).max()
        if not np.isfinite(det) or scale == 0.0 or abs(det) <= 1e-14 * scale * scale:
            raise ConvergenceError(f"singular finite-difference Jacobian at ({x}, {y})")
        dx, dy = np.linalg.solve(jac, [-fx, -fy])
        lam = 1.0
        for _ in range(30):
            xt, yt = x + lam * dx, y + lam * dy
            if accept is None or accept(xt, yt):
                try:
                    gx, gy = F(xt, yt)
                except (DomainError, ConvergenceError):
                    gx = gy = math.inf
                gnorm = max(abs(gx), abs(gy))
                if gnorm < norm:
                    break
            lam *= 0.5
        else:
            if norm <= 1e3 * tol.abs_tol:
                # stalled at the noise floor of F
                return x, y
            raise ConvergenceError(f"damped Newton stalled at ({x}, {y}), |F|={norm:.3e}")
        x, y, fx, fy, norm = xt, yt, gx, gy, gnorm
        if abs(lam * dx) <= 4 * _EPS * max(1.0, abs(x)) and abs(lam * dy) <= 4 * _EPS * max(1.0, abs(y)):
            break
    if norm <= tol.abs_tol:
        return x, y
    raise ConvergenceError(f"Newton did not converge: |F|={norm:.3e} > {tol.abs_tol:.3e}")


# ---------------------------------------------------------------------------
# Exponential-integral profile
# ---------------------------------------------------------------------------

_TAIL_TARGET = 1e-18


def phi_scaled(omega: float, mu: float) -> float:
    """``exp(mu*omega/2) * phi(omega, mu)``, finite for any ``omega > 0``.

    Substituting ``t = omega + s`` gives ``int_0^inf exp(-k s) / (omega + s) ds``
    with ``k = mu/2``; the integral is truncated at ``S`` where the tail bound
    ``exp(-k S) / (k (omega + S))`` drops below 1e-18 relative, and that bound
    is added back.
    """
    omega = float(omega)
    mu = float(mu)
    if not omega > 0:
        raise DomainError(f"phi requires omega > 0, got {omega}")
    if not mu > 0:
        raise DomainError(f"phi requires mu > 0, got {mu}")
    k = 0.5 * mu
    # value ~ 1/(omega + 1/k); tail target taken relative to that magnitude
    scale = 1.0 / (omega + 1.0 / k)
    s_end = max(1.0 / k, 1.0)
    while math.exp(-k * s_end) / (k * (omega + s_end)) >= _TAIL_TARGET * scale:
        s_end *= 2.0
    tail = math.exp(-k * s_end) / (k * (omega + s_end))

    def f(s: float) -> float:
        return math.exp(-k * s) / (omega + s)

    # breakpoints at a few decay lengths keep the kernel well resolved
    marks = [m / k for m in (0.5, 2.0, 8.0) if m / k < s_end]
    if omega * k < 1.0:
        marks = [omega * c for c in (1.0, 10.0, 100.0) if omega * c < s_end] + marks
    marks = sorted(set(marks))
    value = integrate_adaptive(f, Interval(0.0, s_end), Tolerance(1e-15, 1e-14, 200), points=marks)
    return value + tail


def phi(omega: float, mu: float) -> float:
    """``int_omega^inf t^-1 exp(-mu t / 2) dt``, i.e. ``E1(mu * omega / 2)``.

    Strictly positive and strictly decreasing in ``omega``; its derivative is
    ``-exp(-mu omega / 2) / omega``.
    """
    scaled = phi_scaled(omega, mu)
    return math.exp(-0.5 * mu * omega) * scaled
