"""Shooting solver for the reduced two-phase problem with arbitrary diffusivities.

Each phase equation ``(omega d(s) s')' + (mu omega / 2) s' = 0`` is integrated
in first-order form with the flux variable ``p = omega d(s) s'``:

    s' = p / (omega d(s)),    p' = -(mu omega / 2) s'.

The liquid is started at ``omega = R`` from the evaporation-front data, the
solid at ``omega2`` from the melting-front balance, and the two mismatches
``u(omega2) - u_m`` and ``v(omega_max) - v_inf`` are driven to zero over
``(omega2, mu)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .model import Diffusivity, InvalidParameters, PhysicalParameters, StefanProblem, as_problem
from .exact_stefan import ScanResult
from .special_functions import ConvergenceError, DomainError, Tolerance, solve_2d_newton

__all__ = [
    "ReducedProfiles",
    "ShotResult",
    "liquid_rhs",
    "solid_rhs",
    "default_omega_max",
    "shoot",
    "shoot_full",
    "scan_shooting",
    "solve_reduced_bvp",
    "compare_with_exact",
]

RTOL = 1e-10
ATOL = 1e-12


def _phase_rhs(omega: float, state, mu: float, d: Diffusivity) -> tuple[float, float]:
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    s, p = state
    ds = p / (omega * d(s))
    return ds, -0.5 * mu * omega * ds


def liquid_rhs(omega: float, state, mu: float, d1: Diffusivity) -> tuple[float, float]:
    """Right-hand side of the liquid equation for the state ``(u, p)``."""
    return _phase_rhs(omega, state, mu, d1)


def solid_rhs(omega: float, state, mu: float, d2: Diffusivity) -> tuple[float, float]:
    """Right-hand side of the solid equation for the state ``(v, p)``."""
    return _phase_rhs(omega, state, mu, d2)


def default_omega_max(omega2: float, mu: float) -> float:
    return max(50.0 / mu, 100.0 * omega2)


@dataclass
class _Trajectory:
    omega: np.ndarray
    value: np.ndarray
    flux: np.ndarray
    dense: object = field(repr=False, default=None)

    def __call__(self, omega):
        if self.dense is None:
            return np.interp(omega, self.omega, self.value)
        return self.dense(omega)[0]


def _rk4(fun, span, y0, h):
    a, b = span
    n = max(1, int(math.ceil((b - a) / h)))
    h = (b - a) / n
    ts = a + h * np.arange(n + 1)
    ys = np.empty((2, n + 1))
    y = np.array(y0, float)
    ys[:, 0] = y
    for i in range(n):
        t = ts[i]
        k1 = np.array(fun(t, y))
        k2 = np.array(fun(t + h / 2, y + h / 2 * k1))
        k3 = np.array(fun(t + h / 2, y + h / 2 * k2))
        k4 = np.array(fun(t + h, y + h * k3))
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[:, i + 1] = y
    return ts, ys, None


def _integrate(fun, span, y0, rtol, fixed_step):
    if fixed_step is not None:
        return _rk4(fun, span, y0, fixed_step)
    res = solve_ivp(fun, span, y0, method="RK45", rtol=rtol, atol=min(ATOL, rtol * 1e-2), dense_output=True)
    if not res.success:
        raise ConvergenceError(f"ODE integration failed: {res.message}")
    return res.t, res.y, res.sol


@dataclass
class ShotResult:
    liquid: _Trajectory
    solid: _Trajectory
    mismatch: tuple[float, float]
    tail_bound: float


def shoot_full(
    problem: StefanProblem,
    omega2: float,
    mu: float,
    omega_max: float | None = None,
    rtol: float = RTOL,
    fixed_step: float | None = None,
) -> ShotResult:
    """Integrate both phases for trial ``(omega2, mu)`` and keep the trajectories."""
    par = problem.params
    R = par.R
    if not omega2 > R:
        raise DomainError(f"omega2={omega2} must exceed R={R}")
    if not mu > 0:
        raise DomainError(f"mu={mu} must be positive")
    if omega_max is None:
        omega_max = default_omega_max(omega2, mu)
    if not omega_max > omega2:
        raise DomainError("omega_max must exceed omega2")
    d1, d2 = problem.d1, problem.d2

    du0 = (mu * par.H_v - par.q) / (2.0 * problem.d1v)
    y0 = (par.u_v, R * d1(par.u_v) * du0)
    t, y, dense = _integrate(lambda w, s: _phase_rhs(w, s, mu, d1), (R, omega2), y0, rtol, fixed_step)
    liquid = _Trajectory(t, y[0], y[1], dense)
    u2, p2 = y[0, -1], y[1, -1]
    du2 = p2 / (omega2 * d1(u2))

    dv2 = problem.solid_flux_sign * (2.0 * problem.d1m * du2 + mu * par.H_m) / (2.0 * problem.d2m)
    z0 = (par.v_m, omega2 * d2(par.v_m) * dv2)
    t, z, dense = _integrate(lambda w, s: _phase_rhs(w, s, mu, d2), (omega2, omega_max), z0, rtol, fixed_step)
    solid = _Trajectory(t, z[0], z[1], dense)
    v_end, q_end = z[0, -1], z[1, -1]
    dv_end = q_end / (omega_max * d2(v_end))
    # v' decays at least like exp(-mu omega / (2 d)) beyond omega_max
    tail = abs(dv_end) * 2.0 * d2(v_end) / mu
    return ShotResult(liquid, solid, (float(u2 - par.u_m), float(v_end - par.v_inf)), float(tail))


def shoot(
    problem: StefanProblem | PhysicalParameters,
    omega2: float,
    mu: float,
    omega_max: float | None = None,
    rtol: float = RTOL,
    fixed_step: float | None = None,
) -> tuple[float, float]:
    """Mismatches ``(u(omega2) - u_m, v(omega_max) - v_inf)`` of one shot."""
    return shoot_full(as_problem(problem), omega2, mu, omega_max, rtol, fixed_step).mismatch


def scan_shooting(problem, omega2_grid=None, mu_grid=None, rtol: float = 1e-6) -> ScanResult:
    """Sign scan of both shooting mismatches on a tensor grid.

    Same cell rule as the exact scan; default grid is 20 log-spaced ``omega2``
    in ``(R, 1000 R]`` and 16 log-spaced ``mu`` in ``[1e-3, 10]``. Shots that fail
    (diffusivity out of range, integrator breakdown) leave NaN. Only signs
    matter here, so the solid is integrated to
    ``max(2 omega2, omega2 + 80 d2m / mu)`` instead of the solver's range.
    """
    problem = as_problem(problem)
    R = problem.params.R
    if omega2_grid is None:
        omega2_grid = R * np.geomspace(1.01, 1000.0, 20)
    if mu_grid is None:
        mu_grid = np.geomspace(1e-3, 10.0, 16)
    omega2_grid = np.asarray(omega2_grid, float)
    mu_grid = np.asarray(mu_grid, float)
    f1 = np.full((omega2_grid.size, mu_grid.size), np.nan)
    f2 = np.full_like(f1, np.nan)
    for i, w2 in enumerate(omega2_grid):
        for j, mu in enumerate(mu_grid):
            try:
                w_max = max(2.0 * w2, w2 + 80.0 * problem.d2m / mu)
                f1[i, j], f2[i, j] = shoot(problem, w2, mu, w_max, rtol=rtol)
            except (DomainError, ConvergenceError, OverflowError):
                pass
    cells = []
    for i in range(omega2_grid.size - 1):
        for j in range(mu_grid.size - 1):
            c1 = f1[i : i + 2, j : j + 2]
            c2 = f2[i : i + 2, j : j + 2]
            if np.isnan(c1).any() or np.isnan(c2).any():
                continue
            if c1.min() <= 0 <= c1.max() and c2.min() <= 0 <= c2.max():
                cells.append((i, j))
    return ScanResult(omega2_grid, mu_grid, f1, f2, cells)


@dataclass
class ReducedProfiles:
    """Converged shooting solution tabulated on the integrator's grid."""

    liquid: list[tuple[float, float]]
    solid: list[tuple[float, float]]
    omega2: float
    mu: float
    omega_max: float
    mismatch: tuple[float, float]
    tail_bound: float = 0.0
    problem: StefanProblem | None = field(default=None, repr=False)
    _shot: ShotResult | None = field(default=None, repr=False, compare=False)

    @property
    def omega1(self) -> float:
        return self.problem.params.R

    def u(self, omega: float) -> float:
        return float(self._shot.liquid(omega))

    def v(self, omega: float) -> float:
        return float(self._shot.solid(omega))


def solve_reduced_bvp(
    problem: StefanProblem | PhysicalParameters,
    guess: tuple[float, float],
    omega_max: float | None = None,
    tol: float = 1e-10,
    rtol: float = RTOL,
    fixed_step: float | None = None,
) -> ReducedProfiles:
    """Drive both shooting mismatches to zero over ``(omega2, mu)``.

    ``omega_max`` defaults to ``max(50/mu, 100 omega2)`` and is held fixed
    during the Newton iteration; if the converged point needs a larger value
    the solve is repeated once with it.

    Raises:
        ConvergenceError: Newton failed.
        InvalidParameters: converged ``omega2 <= R`` or ``mu <= 0``.
    """
    problem = as_problem(problem)
    R = problem.params.R
    guess = (float(guess[0]), float(guess[1]))
    fixed = omega_max is not None
    w_max = omega_max if fixed else 2.0 * default_omega_max(*guess)

    for _ in range(3):
        def F(w2, mu, w_max=w_max):
            return shoot(problem, w2, mu, w_max, rtol, fixed_step)

        def accept(w2, mu, w_max=w_max):
            return R < w2 < w_max and mu > 0

        w2, mu = solve_2d_newton(F, guess, Tolerance(tol, tol, 60), fd_step=1e-6, accept=accept)
        if not w2 > R:
            raise InvalidParameters(f"converged omega2={w2} violates omega2 > R")
        if not mu > 0:
            raise InvalidParameters(f"converged mu={mu} is not positive")
        if fixed or w_max >= default_omega_max(w2, mu):
            break
        guess = (w2, mu)
        w_max = 2.0 * default_omega_max(w2, mu)
    shot = shoot_full(problem, w2, mu, w_max, rtol, fixed_step)
    liquid = [(float(a), float(b)) for a, b in zip(shot.liquid.omega, shot.liquid.value)]
    solid = [(float(a), float(b)) for a, b in zip(shot.solid.omega, shot.solid.value)]
    return ReducedProfiles(liquid, solid, float(w2), float(mu), float(w_max), shot.mismatch,
                           shot.tail_bound, problem, shot)


@dataclass(frozen=True)
class ComparisonReport:
    u_max: float
    v_max: float

    @property
    def worst(self) -> float:
        return max(self.u_max, self.v_max)


def compare_with_exact(profiles: ReducedProfiles, sol, stride: int = 1) -> ComparisonReport:
    """Max-norm differences between shooting profiles and the exact evaluators.

    Compared on the stored integration grids, restricted to the range shared
    by both solutions.

    Raises:
        InvalidParameters: the two solutions describe different problems or
            the problem is not the exactly solvable one.
    """
    from .exact_stefan import exact_case, u_of_omega, v_of_omega

    if profiles.problem.params != sol.params:
        raise InvalidParameters("profiles and exact solution have different physical parameters")
    exact_case(profiles.problem)
    w2 = min(profiles.omega2, sol.omega2)
    u_err = 0.0
    for w, u in profiles.liquid[::stride]:
        if w <= w2:
            u_err = max(u_err, abs(u - u_of_omega(w, sol)))
    lo = max(profiles.omega2, sol.omega2)
    v_err = 0.0
    for w, v in profiles.solid[::stride]:
        if w >= lo:
            v_err = max(v_err, abs(v - v_of_omega(w, sol)))
    return ComparisonReport(u_err, v_err)
