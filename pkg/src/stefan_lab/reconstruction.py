"""Full space-time fields from reduced solutions, and residual checks of the 3-D problem.

A point ``(t, x1, x2, x3)`` is reduced in two steps: to the travelling,
axisymmetric frame ``z = x3 - mu t``, ``r = sqrt(x1^2 + x2^2)``, then to the
level ``omega = z + sqrt(z^2 + r^2)``. Level sets of ``omega`` are the
paraboloids ``r^2 / omega_k^2 + 2 z / omega_k - 1 = 0``, so the phases are
gas (``omega < omega1``), liquid (``omega1 <= omega <= omega2``) and solid
(``omega > omega2``). The gas carries no temperature.

Normals are ``n_k = grad S_k / |grad S_k|`` for ``S_k`` as above; they point
towards increasing ``omega``, i.e. from gas to liquid on the first surface and
from liquid to solid on the second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .model import Diffusivity, StefanProblem
from .special_functions import DomainError

__all__ = [
    "Point4",
    "FreeSurface",
    "FieldEvaluator",
    "TransformedField",
    "PerturbedField",
    "StencilError",
    "omega_of_point",
    "surface_point",
    "normal_and_velocity",
    "pde_residual",
    "pde_residual_sweep",
    "stefan_residuals",
    "StefanReport",
    "far_field_check",
    "interior_samples",
    "surface_samples",
    "residual_checker",
]

GAS, LIQUID, SOLID = "gas", "liquid", "solid"


class StencilError(DomainError):
    """A finite-difference stencil crosses a phase boundary or leaves the domain."""


class Point4(NamedTuple):
    t: float
    x1: float
    x2: float
    x3: float


def omega_of_point(p, mu: float) -> float:
    """Similarity level ``z + sqrt(z^2 + r^2)`` with ``z = x3 - mu t``.

    For ``z < 0`` the cancellation-free form ``r^2 / (sqrt(z^2 + r^2) - z)`` is
    used; on the negative axis (``r = 0``, ``z < 0``) the value is exactly 0.
    """
    t, x1, x2, x3 = p
    z = x3 - mu * t
    r2 = x1 * x1 + x2 * x2
    rho = math.hypot(z, math.sqrt(r2))
    if z >= 0:
        return z + rho
    if r2 == 0:
        return 0.0
    return r2 / (rho - z)


@dataclass(frozen=True)
class FreeSurface:
    """Paraboloid ``S_k = r^2/omega_k^2 + 2 (x3 - mu t)/omega_k - 1 = 0``."""

    k: int
    omega_k: float
    mu: float

    def __post_init__(self) -> None:
        if self.k not in (1, 2):
            raise ValueError("surface index must be 1 or 2")
        if not self.omega_k > 0:
            raise ValueError("omega_k must be positive")

    def value(self, p) -> float:
        t, x1, x2, x3 = p
        w = self.omega_k
        return (x1 * x1 + x2 * x2) / (w * w) + 2.0 * (x3 - self.mu * t) / w - 1.0

    def gradient(self, p) -> np.ndarray:
        """``(dS/dt, dS/dx1, dS/dx2, dS/dx3)``."""
        _, x1, x2, _ = p
        w = self.omega_k
        return np.array([-2.0 * self.mu / w, 2.0 * x1 / (w * w), 2.0 * x2 / (w * w), 2.0 / w])


def surface_point(s: FreeSurface, t: float, r: float, theta: float = 0.0) -> Point4:
    """Point of surface ``s`` at time ``t``, radius ``r`` and azimuth ``theta``."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    w = s.omega_k
    x3 = s.mu * t + 0.5 * w * (1.0 - (r / w) ** 2)
    return Point4(float(t), r * math.cos(theta), r * math.sin(theta), x3)


def _normal_velocity_from_gradient(g: np.ndarray) -> tuple[np.ndarray, float]:
    gx = g[1:]
    norm = float(np.linalg.norm(gx))
    if norm == 0:
        raise DomainError("level-set gradient vanishes")
    return gx / norm, float(-g[0] / norm)


def normal_and_velocity(s: FreeSurface, p, tol: float = 1e-10) -> tuple[np.ndarray, float]:
    """Unit normal ``grad S / |grad S|`` and normal speed ``-S_t / |grad S|`` at ``p``.

    Raises:
        DomainError: if ``p`` is not on the surface (``|S| > tol``).
    """
    if abs(s.value(p)) > tol:
        raise DomainError(f"point {tuple(p)} is not on surface {s.k} (S={s.value(p):.3e})")
    return _normal_velocity_from_gradient(s.gradient(p))


# ---------------------------------------------------------------------------
# Field evaluators
# ---------------------------------------------------------------------------

class FieldEvaluator:
    """Space-time temperature field of a reduced solution.

    ``solution`` is either an exact ``SimilaritySolution`` or the
    ``ReducedProfiles`` of the shooting solver (evaluated by dense
    interpolation). ``frame_speed`` overrides the speed of the travelling frame
    without touching the profiles; it exists for negative controls.
    """

    def __init__(self, solution, frame_speed: float | None = None) -> None:
        from .exact_stefan import SimilaritySolution, u_of_omega, v_of_omega

        self.solution = solution
        self.problem: StefanProblem = solution.problem
        self.omega1 = float(solution.omega1)
        self.omega2 = float(solution.omega2)
        self.mu = float(solution.mu if frame_speed is None else frame_speed)
        if isinstance(solution, SimilaritySolution):
            self._u = lambda w: u_of_omega(w, solution, extend=True)
            self._v = lambda w: v_of_omega(w, solution, extend=True)
        else:
            self._u = solution.u
            self._v = solution.v
        self.surfaces = (FreeSurface(1, self.omega1, self.mu), FreeSurface(2, self.omega2, self.mu))

    def omega(self, p) -> float:
        return omega_of_point(p, self.mu)

    def phase(self, p) -> str:
        w = self.omega(p)
        if w < self.omega1:
            return GAS
        if w <= self.omega2:
            return LIQUID
        return SOLID

    def u(self, p) -> float:
        """Liquid temperature (continued analytically outside the liquid)."""
        return self._u(self.omega(p))

    def v(self, p) -> float:
        return self._v(self.omega(p))

    def temperature(self, p, phase: str) -> float:
        if phase == LIQUID:
            return self.u(p)
        if phase == SOLID:
            return self.v(p)
        raise DomainError("the gas phase carries no temperature")

    def evaluate(self, p) -> tuple[str, float | None]:
        ph = self.phase(p)
        if ph == GAS:
            return ph, None
        return ph, self.temperature(p, ph)

    def level_set(self, k: int, p) -> float:
        return self.surfaces[k - 1].value(p)

    def level_set_gradient(self, k: int, p) -> np.ndarray:
        return self.surfaces[k - 1].gradient(p)

    def flux(self, t: float) -> float:
        return self.problem.flux(t)

    def half_space_flag(self, p) -> bool:
        """True when ``p`` lies outside the initial half-space ``x3 > 0``."""
        return p[3] <= 0


class TransformedField:
    """``field`` pushed forward by the flow of ``X``: ``f_eps(p) = f(flow(X, -eps, p))``."""

    def __init__(self, base, X, epsilon: float) -> None:
        from .symmetry import flow_map

        self.base = base
        self.problem = base.problem
        self.X = X
        self.epsilon = float(epsilon)
        self._M, self._b = flow_map(X, -epsilon)
        self._Mf, self._bf = flow_map(X, epsilon)

    def pull(self, p) -> np.ndarray:
        return self._M @ np.asarray(p, float) + self._b

    def push(self, p) -> Point4:
        return Point4(*(float(c) for c in self._Mf @ np.asarray(p, float) + self._bf))

    def phase(self, p) -> str:
        return self.base.phase(self.pull(p))

    def u(self, p) -> float:
        return self.base.u(self.pull(p))

    def v(self, p) -> float:
        return self.base.v(self.pull(p))

    def temperature(self, p, phase: str) -> float:
        return self.base.temperature(self.pull(p), phase)

    def evaluate(self, p):
        return self.base.evaluate(self.pull(p))

    def level_set(self, k: int, p) -> float:
        return self.base.level_set(k, self.pull(p))

    def level_set_gradient(self, k: int, p) -> np.ndarray:
        return self._M.T @ self.base.level_set_gradient(k, self.pull(p))

    def flux(self, t: float) -> float:
        return self.problem.flux(t)


class PerturbedField:
    """``field`` plus an additive perturbation of the liquid temperature (negative control)."""

    def __init__(self, base, du: Callable[[Sequence[float]], float]) -> None:
        self.base = base
        self.problem = base.problem
        self.du = du

    def __getattr__(self, name):
        return getattr(self.base, name)

    def u(self, p) -> float:
        return self.base.u(p) + self.du(p)

    def temperature(self, p, phase: str) -> float:
        if phase == LIQUID:
            return self.u(p)
        return self.base.temperature(p, phase)


# ---------------------------------------------------------------------------
# PDE residual
# ---------------------------------------------------------------------------

def _diffusivity(field, phase: str) -> Diffusivity:
    return field.problem.d1 if phase == LIQUID else field.problem.d2


def pde_residual(field, p, d: Diffusivity | None = None, h: float = 1e-2, phase: str | None = None) -> float:
    """``|u_t - div(d(u) grad u)|`` at ``p`` by second-order central differences.

    Uses the 9-point space-time stencil and ``div(d grad u) = d u_lap + d'(u)|grad u|^2``.

    Raises:
        StencilError: if any stencil point is in a different phase than ``p``.
    """
    p = np.asarray(p, float)
    ph = field.phase(p) if phase is None else phase
    if ph == "gas":
        raise StencilError("no equation holds in the gas phase")
    if d is None:
        d = _diffusivity(field, ph)
    f0 = field.temperature(p, ph)
    plus, minus = np.empty(4), np.empty(4)
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        for sgn, store in ((1.0, plus), (-1.0, minus)):
            q = p + sgn * e
            if field.phase(q) != ph:
                raise StencilError(f"stencil at {tuple(p)} with h={h} crosses into the {field.phase(q)} phase")
            store[i] = field.temperature(q, ph)
    u_t = (plus[0] - minus[0]) / (2 * h)
    grad = (plus[1:] - minus[1:]) / (2 * h)
    lap = float(np.sum(plus[1:] - 2 * f0 + minus[1:])) / (h * h)
    return abs(u_t - (d(f0) * lap + d.derivative(f0) * float(grad @ grad)))


def pde_residual_sweep(field, points, hs: Sequence[float], phase: str | None = None) -> np.ndarray:
    """Residuals at every point (rows) for every step size (columns)."""
    out = np.empty((len(points), len(hs)))
    for i, p in enumerate(points):
        for j, h in enumerate(hs):
            out[i, j] = pde_residual(field, p, h=h, phase=phase)
    return out


# ---------------------------------------------------------------------------
# Interface conditions
# ---------------------------------------------------------------------------

def _one_sided_normal_derivative(field, p, n: np.ndarray, phase: str, h: float) -> float:
    """Second-order one-sided derivative along ``n`` from whichever side holds ``phase``."""
    p = np.asarray(p, float)
    step = np.concatenate([[0.0], n]) * h
    if field.phase(p + 2 * step) == phase:
        sgn = 1.0
    elif field.phase(p - 2 * step) == phase:
        sgn = -1.0
    else:
        raise StencilError(f"no {phase} side found at {tuple(p)} with h={h}")
    f0 = field.temperature(p, phase)
    f1 = field.temperature(p + sgn * step, phase)
    f2 = field.temperature(p + 2 * sgn * step, phase)
    return sgn * (-3 * f0 + 4 * f1 - f2) / (2 * h)


@dataclass(frozen=True)
class StefanReport:
    evaporation_flux: float
    melting_flux: float
    dirichlet_u_v: float
    dirichlet_u_m: float
    dirichlet_v_m: float

    @property
    def flux_worst(self) -> float:
        return max(self.evaporation_flux, self.melting_flux)

    @property
    def dirichlet_worst(self) -> float:
        return max(self.dirichlet_u_v, self.dirichlet_u_m, self.dirichlet_v_m)

    @property
    def worst(self) -> float:
        return max(self.flux_worst, self.dirichlet_worst)


def stefan_residuals(
    field,
    sample1: Sequence,
    sample2: Sequence,
    h: float = 1e-3,
    surface_tol: float = 1e-9,
) -> StefanReport:
    """Residuals of both interface conditions at given surface points.

    On the evaporation front: ``d1v du/dn - (H_v V.n - Q(t) n3)`` and
    ``u - u_v``. On the melting front:
    ``sign d2m dv/dn - (d1m du/dn + H_m V.n)``, ``u - u_m`` and ``v - v_m``,
    with ``sign = problem.solid_flux_sign``. Normals and speeds come from the
    field's level-set gradients; normal derivatives are one-sided.

    Raises:
        DomainError: if a sample point is off its surface.
    """
    prob = field.problem
    par = prob.params
    ev = ev_d = 0.0
    for p in sample1:
        if abs(field.level_set(1, p)) > surface_tol:
            raise DomainError(f"sample {tuple(p)} is off surface 1")
        n, vn = _normal_velocity_from_gradient(field.level_set_gradient(1, p))
        du = _one_sided_normal_derivative(field, p, n, LIQUID, h)
        ev = max(ev, abs(prob.d1v * du - (par.H_v * vn - field.flux(p[0]) * n[2])))
        ev_d = max(ev_d, abs(field.temperature(p, LIQUID) - par.u_v))
    me = me_u = me_v = 0.0
    for p in sample2:
        if abs(field.level_set(2, p)) > surface_tol:
            raise DomainError(f"sample {tuple(p)} is off surface 2")
        n, vn = _normal_velocity_from_gradient(field.level_set_gradient(2, p))
        du = _one_sided_normal_derivative(field, p, n, LIQUID, h)
        dv = _one_sided_normal_derivative(field, p, n, SOLID, h)
        me = max(me, abs(prob.solid_flux_sign * prob.d2m * dv - (prob.d1m * du + par.H_m * vn)))
        me_u = max(me_u, abs(field.temperature(p, LIQUID) - par.u_m))
        me_v = max(me_v, abs(field.temperature(p, SOLID) - par.v_m))
    return StefanReport(ev, me, ev_d, me_u, me_v)


def far_field_check(field, radius: float, t: float, n: int = 200) -> float:
    """Max ``|v - v_inf|`` on the half sphere ``|x - (0, 0, mu t)| = radius``, ``x3 >= mu t``.

    On that half sphere ``omega`` ranges over ``[radius, 2 radius]``, so the
    check probes the far field once ``radius > omega2``.
    """
    v_inf = field.problem.params.v_inf
    worst = 0.0
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for i in range(n):
        cz = (i + 0.5) / n  # uniform in cos(polar angle) on the upper half
        sz = math.sqrt(1.0 - cz * cz)
        phi = i * golden
        p = Point4(t, radius * sz * math.cos(phi), radius * sz * math.sin(phi), field.mu * t + radius * cz)
        if field.phase(p) != SOLID:
            continue
        worst = max(worst, abs(field.v(p) - v_inf))
    return worst


# ---------------------------------------------------------------------------
# Sample generation
# ---------------------------------------------------------------------------

def _point_at(omega: float, r: float, theta: float, t: float, mu: float) -> Point4:
    z = (omega * omega - r * r) / (2.0 * omega)
    return Point4(t, r * math.cos(theta), r * math.sin(theta), z + mu * t)


def interior_samples(field: FieldEvaluator, phase: str, n: int, rng: np.random.Generator,
                     margin: float, omega_hi: float | None = None) -> list[Point4]:
    """Random points with ``omega`` at least ``margin`` inside the phase range."""
    if phase == LIQUID:
        lo, hi = field.omega1 + margin, field.omega2 - margin
    elif phase == SOLID:
        lo = field.omega2 + margin
        hi = omega_hi if omega_hi is not None else 4.0 * field.omega2
    else:
        raise ValueError("samples are drawn from the liquid or solid phase")
    if not lo < hi:
        raise ValueError("margin leaves no interior")
    out = []
    for _ in range(n):
        w = rng.uniform(lo, hi)
        r = rng.uniform(0.0, 1.5 * w)
        out.append(_point_at(w, r, rng.uniform(0, 2 * math.pi), rng.uniform(0.5, 2.0), field.mu))
    return out


def surface_samples(field: FieldEvaluator, k: int, n: int, rng: np.random.Generator) -> list[Point4]:
    s = field.surfaces[k - 1]
    return [
        surface_point(s, rng.uniform(0.5, 2.0), rng.uniform(0.0, 1.5 * s.omega_k), rng.uniform(0, 2 * math.pi))
        for _ in range(n)
    ]


def residual_checker(interior: Sequence, sample1: Sequence, sample2: Sequence,
                     h_pde: float = 0.05, h_surface: float = 1e-3) -> Callable[[object], float]:
    """Max of PDE and interface residuals, usable as an invariance checker.

    Sample points are given for the untransformed field; a transformed field
    carries them along its flow (``push``) so they stay in their phases.
    """
    def check(field) -> float:
        push = getattr(field, "push", lambda p: p)
        worst = max((pde_residual(field, push(p), h=h_pde) for p in interior), default=0.0)
        rep = stefan_residuals(field, [push(p) for p in sample1], [push(p) for p in sample2], h=h_surface)
        return max(worst, rep.worst)

    return check
