"""Exact implicit similarity solution for ``d1(u) = 1/u``, ``d2 = 1``.

In the similarity variable ``omega`` the liquid equation has the first integral
``ln s + s = A(nu)`` with ``s = omega u'/u`` and ``nu = omega u``, where ``A``
is affine in ``nu``. Hence ``s = W(exp(A))`` and

    int_{R u_v}^{omega u} dnu / (nu (1 + W(exp(A(nu))))) = ln(omega / R).

The solid profile is ``v_inf + (v_m - v_inf) * phi(omega) / phi(omega2)``.
The two free constants ``(omega2, mu)`` solve a pair of transcendental
equations: the liquid profile must hit ``u_m`` at ``omega2`` and the heat
balance must hold there.

The same formulas cover the whole orbit of this case under the equivalence
group, i.e. ``d1(u) = k1 / (u - c1)`` and ``d2 = k2`` with independently
scaled interface coefficients. Internally the liquid temperature is carried
as ``w = (u - c1) / k1`` so that ``d1 = 1/w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import InvalidParameters, PhysicalParameters, StefanProblem, as_problem
from .special_functions import (
    ConvergenceError,
    DomainError,
    Interval,
    Tolerance,
    integrate_adaptive,
    lambert_w0_of_exp,
    phi,
    phi_scaled,
    solve_2d_newton,
)

__all__ = [
    "ExactCase",
    "SimilaritySolution",
    "OdeResidualReport",
    "ScanResult",
    "exact_case",
    "script_a",
    "script_a_at_front",
    "integrand",
    "liquid_integral",
    "transcendental_residuals",
    "scan_parameters",
    "solve_parameters",
    "u_of_omega",
    "v_of_omega",
    "u_derivative",
    "verify_ode_residual",
    "v_derivative",
    "ode_residual_u",
    "ode_residual_v",
    "profile_table",
]

_QUAD_TOL = Tolerance(1e-15, 1e-14, 200)


@dataclass(frozen=True)
class ExactCase:
    """Reduced constants of a problem in the exactly solvable family."""

    problem: StefanProblem
    k1: float
    c1: float
    k2: float
    w_v: float
    w_m: float

    @property
    def params(self) -> PhysicalParameters:
        return self.problem.params

    def to_w(self, u: float) -> float:
        return (u - self.c1) / self.k1

    def to_u(self, w: float) -> float:
        return self.c1 + self.k1 * w

    def spot_flux(self, mu: float) -> float:
        """``s(R) = R u'(R) / u(R)`` in w-units, fixed by the evaporation-front balance."""
        p = self.params
        return (mu * p.H_v - p.q) * p.R / (2.0 * self.problem.d1v * self.k1 * self.w_v)


def exact_case(p: PhysicalParameters | StefanProblem) -> ExactCase:
    """Check that ``p`` is in the exactly solvable family and reduce it.

    Raises:
        InvalidParameters: if ``d1`` is not of the form ``k/(u - c)`` or ``d2``
            is not constant, or ``d1`` is not positive at both liquid
            interface temperatures.
    """
    if isinstance(p, ExactCase):
        return p
    prob = as_problem(p)
    d1, d2 = prob.d1, prob.d2
    if not d1.is_inverse:
        raise InvalidParameters("exact solution needs d1(u) = k/(u - c)")
    if not d2.is_constant:
        raise InvalidParameters("exact solution needs constant d2")
    k1 = d1.factor * d1.c * d1.stretch
    c1 = d1.shift
    k2 = d2.factor * d2.c
    if not k2 > 0:
        raise InvalidParameters("d2 must be positive")
    w_v = (prob.params.u_v - c1) / k1
    w_m = (prob.params.u_m - c1) / k1
    if not (w_v > 0 and w_m > 0):
        raise InvalidParameters("d1 must be positive at u_v and u_m")
    return ExactCase(prob, k1, c1, k2, w_v, w_m)


def _case(p) -> ExactCase:
    return p if isinstance(p, ExactCase) else exact_case(p)


# ---------------------------------------------------------------------------
# The A notation and the liquid integrand
# ---------------------------------------------------------------------------

def script_a(nu: float, mu: float, p) -> float:
    """The affine exponent ``A(nu)`` of the liquid first integral.

    For the base problem this is
    ``-(mu/2) nu + ln(x) + x + (mu/2) R u_v`` with ``x = (mu H_v - q) R / 2``.

    Raises:
        DomainError: if ``x <= 0`` (the logarithm is undefined).
    """
    case = _case(p)
    x = case.spot_flux(mu)
    if not x > 0:
        raise DomainError(f"log argument (mu H_v - q) R / 2 = {x} must be positive")
    return -0.5 * mu * (nu - case.params.R * case.w_v) + math.log(x) + x


def script_a_at_front(omega2: float, mu: float, p: PhysicalParameters) -> float:
    """Closed form of ``A`` at ``nu = omega2 u_m`` for the base problem."""
    x = (mu * p.H_v - p.q) * p.R / 2.0
    if not x > 0:
        raise DomainError(f"log argument (mu H_v - q) R / 2 = {x} must be positive")
    return 0.5 * mu * (p.R * p.u_v - omega2 * p.u_m) + math.log(x) + x


def integrand(nu: float, mu: float, p) -> float:
    """``1 / (nu (1 + W(exp(A(nu)))))``.

    Uses ``exp(A - W(exp(A))) = W(exp(A))`` so that ``exp(A)`` is never formed.
    """
    if not nu > 0:
        raise DomainError(f"integrand needs nu > 0, got {nu}")
    w = lambert_w0_of_exp(script_a(nu, mu, p))
    return 1.0 / (nu * (1.0 + w))


def _make_integrand(case: ExactCase, mu: float):
    # hoisted constants: this closure is the hot loop of every exact evaluation
    x = case.spot_flux(mu)
    if not x > 0:
        raise DomainError(f"log argument (mu H_v - q) R / 2 = {x} must be positive")
    a0 = math.log(x) + x + 0.5 * mu * case.params.R * case.w_v
    half_mu = 0.5 * mu

    def f(nu: float) -> float:
        return 1.0 / (nu * (1.0 + lambert_w0_of_exp(a0 - half_mu * nu)))

    return f


def _signed_integral(f, a: float, b: float) -> float:
    if a == b:
        return 0.0
    if a < b:
        return integrate_adaptive(f, Interval(a, b), _QUAD_TOL)
    return -integrate_adaptive(f, Interval(b, a), _QUAD_TOL)


def liquid_integral(upper: float, mu: float, p) -> float:
    """``int_{R w_v}^{upper} integrand(nu) dnu``."""
    case = _case(p)
    if not upper > 0:
        raise DomainError(f"upper limit must be positive, got {upper}")
    f = _make_integrand(case, mu)
    return _signed_integral(f, case.params.R * case.w_v, upper)


# ---------------------------------------------------------------------------
# Transcendental system
# ---------------------------------------------------------------------------

def transcendental_residuals(omega2: float, mu: float, p, form: str = "derived") -> tuple[float, float]:
    """Residuals ``(F1, F2)`` whose common zero fixes ``(omega2, mu)``.

    ``F1 = int_{R u_v}^{omega2 u_m} integrand - ln(omega2 / R)``.

    ``form="derived"`` builds ``F2`` from the melting-front balance with the
    problem's ``solid_flux_sign`` and the integral definition of ``phi``::

        F2 = -2 sign d2m C exp(-mu2 omega2/2) - 2 d1m k1 w_m s2 - mu omega2 H_m

    with ``C = (v_m - v_inf)/phi(omega2)``, ``mu2 = mu/k2`` and
    ``s2 = W(exp(A(omega2 w_m)))``. For the base problem and the default sign
    this equals ``form="closed"``, the explicit base-problem expression
    ``2 C exp(-mu omega2/2) - 2 W(exp(A(omega2))) - mu omega2 H_m``.
    """
    case = _case(p)
    prob = case.problem
    par = case.params
    if not omega2 > 0:
        raise DomainError(f"omega2 must be positive, got {omega2}")
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    upper = omega2 * case.w_m
    f1 = liquid_integral(upper, mu, case) - math.log(omega2 / par.R)
    dv = par.v_m - par.v_inf
    if form == "closed":
        a2 = script_a_at_front(omega2, mu, par)
        c_exp = dv / phi_scaled(omega2, mu)
        f2 = 2.0 * c_exp - 2.0 * lambert_w0_of_exp(a2) - mu * omega2 * par.H_m
        return f1, f2
    if form != "derived":
        raise ValueError(f"unknown residual form {form!r}")
    mu2 = mu / case.k2
    s2 = lambert_w0_of_exp(script_a(upper, mu, case))
    c_exp = dv / phi_scaled(omega2, mu2)  # C * exp(-mu2 omega2 / 2)
    f2 = (
        -2.0 * prob.solid_flux_sign * prob.d2m * c_exp
        - 2.0 * prob.d1m * case.k1 * case.w_m * s2
        - mu * omega2 * par.H_m
    )
    return f1, f2


@dataclass(frozen=True)
class ScanResult:
    omega2_grid: np.ndarray
    mu_grid: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    cells: list[tuple[int, int]]

    def seeds(self) -> list[tuple[float, float]]:
        """Cell centres (geometric in omega2) of every bracketing cell."""
        out = []
        for i, j in self.cells:
            w = math.sqrt(float(self.omega2_grid[i] * self.omega2_grid[i + 1]))
            m = float(0.5 * (self.mu_grid[j] + self.mu_grid[j + 1]))
            out.append((w, m))
        return out


def scan_parameters(p, omega2_grid=None, mu_grid=None) -> ScanResult:
    """Brute-force sign scan of ``(F1, F2)`` on a tensor grid.

    A cell brackets a root candidate when both residuals change sign across
    its four corners. Default grid: 40 log-spaced ``omega2`` in ``(R, 100 R]``
    and 40 ``mu`` in ``(0, 10]``. Points outside the validity domain are NaN.
    """
    case = _case(p)
    R = case.params.R
    if omega2_grid is None:
        omega2_grid = R * np.logspace(np.log10(1.01), 2.0, 40)
    if mu_grid is None:
        mu_grid = np.linspace(0.05, 10.0, 40)
    omega2_grid = np.asarray(omega2_grid, float)
    mu_grid = np.asarray(mu_grid, float)
    f1 = np.full((omega2_grid.size, mu_grid.size), np.nan)
    f2 = np.full_like(f1, np.nan)
    for j, mu in enumerate(mu_grid):
        try:
            f = _make_integrand(case, mu)
        except DomainError:
            continue
        # integral accumulated along the sorted upper limits
        acc = 0.0
        prev = R * case.w_v
        for i, w2 in enumerate(omega2_grid):
            upper = w2 * case.w_m
            acc += _signed_integral(f, prev, upper)
            prev = upper
            f1[i, j] = acc - math.log(w2 / R)
            try:
                f2[i, j] = transcendental_residuals(w2, mu, case)[1]
            except (DomainError, ConvergenceError):
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


@dataclass(frozen=True)
class SimilaritySolution:
    """Solved exact case: ``omega1 = R`` and ``(omega2, mu)`` with cached ``phi(omega2)``."""

    params: PhysicalParameters
    omega1: float
    omega2: float
    mu: float
    phi_omega2: float
    problem: StefanProblem

    @property
    def case(self) -> ExactCase:
        return exact_case(self.problem)

    def residuals(self) -> tuple[float, float]:
        return transcendental_residuals(self.omega2, self.mu, self.problem)


def _check_valid(case: ExactCase, omega2: float, mu: float) -> None:
    R = case.params.R
    if not omega2 > R:
        raise InvalidParameters(f"converged omega2={omega2} violates omega2 > R={R}")
    if not mu > 0:
        raise InvalidParameters(f"converged mu={mu} is not positive")
    if not case.spot_flux(mu) > 0:
        raise InvalidParameters("converged point violates (mu H_v - q) R / 2 > 0")


def solve_parameters(
    p,
    guess: tuple[float, float] | None = None,
    tol: float = 1e-12,
) -> SimilaritySolution:
    """Solve the transcendental system for ``(omega2, mu)`` by damped Newton.

    Without a guess the default sign scan seeds Newton; every bracketing cell
    is tried in turn.

    Raises:
        ConvergenceError: Newton failed from every seed.
        InvalidParameters: the root violates ``omega2 > R``, ``mu > 0`` or the
            logarithm domain.
    """
    case = _case(p)
    R = case.params.R

    def F(w2: float, mu: float) -> tuple[float, float]:
        return transcendental_residuals(w2, mu, case)

    def accept(w2: float, mu: float) -> bool:
        return w2 > R and mu > 0 and case.spot_flux(mu) > 0

    if guess is not None:
        seeds = [tuple(map(float, guess))]
    else:
        seeds = scan_parameters(case).seeds()
        if not seeds:
            raise ConvergenceError("sign scan found no bracketing cell for (omega2, mu)")
    last_exc: Exception | None = None
    for seed in seeds:
        try:
            w2, mu = solve_2d_newton(F, seed, Tolerance(tol, tol, 100), accept=accept)
        except (ConvergenceError, DomainError) as exc:
            last_exc = exc
            continue
        _check_valid(case, w2, mu)
        return SimilaritySolution(
            params=case.params,
            omega1=float(R),
            omega2=float(w2),
            mu=float(mu),
            phi_omega2=phi(w2, mu / case.k2),
            problem=case.problem,
        )
    raise ConvergenceError(f"no seed converged: {last_exc}")


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

def _solve_w(omega: float, sol: SimilaritySolution, extend: bool) -> float:
    case = sol.case
    R, w2 = sol.omega1, sol.omega2
    span = 1e-10 * (w2 - R)
    if not extend and not (R - span <= omega <= w2 + span):
        raise DomainError(f"omega={omega} outside the liquid range [{R}, {w2}]")
    if not omega > 0:
        raise DomainError("omega must be positive")
    target = math.log(omega / R)
    if target == 0.0:
        return case.w_v
    f = _make_integrand(case, sol.mu)
    base = R * case.w_v
    lo_w = min(case.w_v, case.w_m) * (1 - 1e-3)
    hi_w = max(case.w_v, case.w_m) * (1 + 1e-3)
    lo, hi = omega * lo_w, omega * hi_w

    def g(N: float) -> float:
        return _signed_integral(f, base, N) - target

    g_lo, g_hi = g(lo), g(hi)
    while g_lo > 0:
        if not extend:
            raise DomainError(f"root not bracketed at omega={omega}")
        hi, g_hi = lo, g_lo
        lo *= 0.5
        g_lo = g(lo)
    while g_hi < 0:
        if not extend:
            raise DomainError(f"root not bracketed at omega={omega}")
        lo, g_lo = hi, g_hi
        hi *= 2.0
        g_hi = g(hi)
    # safeguarded Newton with incremental integration; g' = f > 0
    N = omega * (case.w_v + (case.w_m - case.w_v) * min(max(target / math.log(w2 / R), 0.0), 1.0))
    if not lo < N < hi:
        N = 0.5 * (lo + hi)
    gN = g(N)
    for _ in range(100):
        if gN == 0.0:
            break
        if gN > 0:
            hi = N
        else:
            lo = N
        step = gN / f(N)
        N_new = N - step
        if not lo < N_new < hi:
            N_new = 0.5 * (lo + hi)
        gN = gN + _signed_integral(f, N, N_new)
        done = abs(N_new - N) <= 2e-16 * N
        N = N_new
        if done:
            break
    else:
        raise ConvergenceError(f"u(omega) iteration did not converge at omega={omega}")
    return N / omega


def u_of_omega(omega: float, sol: SimilaritySolution, extend: bool = False) -> float:
    """Liquid temperature at similarity level ``omega`` from the implicit relation.

    ``extend=True`` allows ``omega`` outside ``[R, omega2]`` (analytic
    continuation of the same relation, used by finite-difference stencils).
    """
    return sol.case.to_u(_solve_w(float(omega), sol, extend))


def u_derivative(omega: float, sol: SimilaritySolution, extend: bool = False) -> float:
    """``du/domega`` from the first integral ``omega w' / w = W(exp(A(omega w)))``."""
    case = sol.case
    w = _solve_w(float(omega), sol, extend)
    s = lambert_w0_of_exp(script_a(omega * w, sol.mu, case))
    return case.k1 * s * w / omega


def v_of_omega(omega: float, sol: SimilaritySolution, extend: bool = False) -> float:
    """Solid temperature ``v_inf + (v_m - v_inf) phi(omega) / phi(omega2)``."""
    omega = float(omega)
    if not extend and omega < sol.omega2 * (1 - 1e-12):
        raise DomainError(f"omega={omega} below the melting front omega2={sol.omega2}")
    par = sol.params
    mu2 = sol.mu / sol.case.k2
    ratio = math.exp(-0.5 * mu2 * (omega - sol.omega2)) * phi_scaled(omega, mu2) / phi_scaled(sol.omega2, mu2)
    return par.v_inf + (par.v_m - par.v_inf) * ratio


def v_derivative(omega: float, sol: SimilaritySolution) -> float:
    par = sol.params
    mu2 = sol.mu / sol.case.k2
    c = (par.v_m - par.v_inf) / sol.phi_omega2
    return -c * math.exp(-0.5 * mu2 * omega) / omega


# ---------------------------------------------------------------------------
# Residual verification of the reduced ODEs
# ---------------------------------------------------------------------------

def _central(fun, x: float, h: float) -> tuple[float, float]:
    f0 = fun(x)
    fp, fm = fun(x + h), fun(x - h)
    return (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h)


def _richardson(fun, x: float, h: float) -> tuple[float, float]:
    d1a, d2a = _central(fun, x, h)
    d1b, d2b = _central(fun, x, h / 2)
    return (4 * d1b - d1a) / 3, (4 * d2b - d2a) / 3


@dataclass(frozen=True)
class OdeResidualReport:
    u_residual: float
    v_residual: float
    evaporation_bc: float
    melting_bc: float

    @property
    def worst(self) -> float:
        return max(self.u_residual, self.v_residual, self.evaporation_bc, self.melting_bc)


def ode_residual_u(omega: float, sol: SimilaritySolution, h: float, richardson: bool = True) -> float:
    """Liquid-equation residual ``(omega d1 u')' + mu omega u'/2`` by finite differences."""
    d1 = sol.problem.d1
    fun = lambda w: u_of_omega(w, sol, extend=True)  # noqa: E731
    du, ddu = (_richardson if richardson else _central)(fun, omega, h)
    u = fun(omega)
    return omega * d1(u) * ddu + (d1(u) + omega * d1.derivative(u) * du) * du + 0.5 * sol.mu * omega * du


def ode_residual_v(omega: float, sol: SimilaritySolution, h: float, richardson: bool = True) -> float:
    d2 = sol.problem.d2
    fun = lambda w: v_of_omega(w, sol, extend=True)  # noqa: E731
    dv, ddv = (_richardson if richardson else _central)(fun, omega, h)
    v = fun(omega)
    return omega * d2(v) * ddv + (d2(v) + omega * d2.derivative(v) * dv) * dv + 0.5 * sol.mu * omega * dv


def verify_ode_residual(
    sol: SimilaritySolution,
    n_points: int = 20,
    h: float | None = None,
    delta: float | None = None,
    omega_far: float | None = None,
) -> OdeResidualReport:
    """Max residuals of both reduced ODEs and both front conditions.

    The liquid equation is sampled on ``[R + delta, omega2 - delta]``, the
    solid one on ``[omega2, omega_far]`` (default ``50/mu``). Derivatives are
    Richardson-extrapolated central differences; the front conditions use the
    continuation of the implicit relation across the front.
    """
    R, w2, mu = sol.omega1, sol.omega2, sol.mu
    prob = sol.problem
    par = sol.params
    if h is None:
        h = 1e-2 * (w2 - R)
    if delta is None:
        delta = 2 * h
    if omega_far is None:
        omega_far = max(50.0 / mu, 2 * w2)
    u_grid = np.linspace(R + delta, w2 - delta, n_points)
    u_res = max(abs(ode_residual_u(w, sol, h)) for w in u_grid)
    v_grid = np.linspace(w2, omega_far, n_points)
    hv = 1e-2 * min(w2, 1.0 / mu)
    v_res = max(abs(ode_residual_v(w, sol, hv)) for w in v_grid)

    du_R = _richardson(lambda w: u_of_omega(w, sol, extend=True), R, h)[0]
    bc15 = abs(2 * prob.d1v * du_R - (mu * par.H_v - par.q))
    du_2 = _richardson(lambda w: u_of_omega(w, sol, extend=True), w2, h)[0]
    dv_2 = _richardson(lambda w: v_of_omega(w, sol, extend=True), w2, hv)[0]
    bc16 = abs(2 * prob.solid_flux_sign * prob.d2m * dv_2 - 2 * prob.d1m * du_2 - mu * par.H_m)
    return OdeResidualReport(u_res, v_res, bc15, bc16)


def profile_table(sol: SimilaritySolution, n_liquid: int = 101, n_solid: int = 101, omega_far: float | None = None):
    """Tabulated ``(omega, u)`` on ``[R, omega2]`` and ``(omega, v)`` on ``[omega2, omega_far]``."""
    if omega_far is None:
        omega_far = max(50.0 / sol.mu, 2 * sol.omega2)
    wl = np.linspace(sol.omega1, sol.omega2, n_liquid)
    liquid = [(float(w), u_of_omega(w, sol)) for w in wl]
    ws = np.linspace(sol.omega2, omega_far, n_solid)
    solid = [(float(w), v_of_omega(w, sol)) for w in ws]
    return liquid, solid
