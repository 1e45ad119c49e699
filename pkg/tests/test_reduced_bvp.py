import math

import numpy as np
import pytest
from scipy.optimize import fsolve
from scipy.special import exp1

from stefan_lab.model import REFERENCE_PARAMETERS, Diffusivity, StefanProblem
from stefan_lab.reduced_bvp import (
    compare_with_exact,
    liquid_rhs,
    scan_shooting,
    shoot,
    solve_reduced_bvp,
)
from stefan_lab.special_functions import DomainError


def constant_d_residuals(x, p, d1, d2):
    """Closed-form front mismatches for constant diffusivities (solid flux measured against the liquid normal)."""
    w2, mu = x
    a1, a2 = mu / (2 * d1), mu / (2 * d2)
    k1 = p.R * math.exp(a1 * p.R) * (mu * p.H_v - p.q) / (2 * d1)
    u2 = p.u_v + k1 * (exp1(a1 * p.R) - exp1(a1 * w2))
    du2 = k1 * math.exp(-a1 * w2) / w2
    dv2 = -(p.v_m - p.v_inf) * math.exp(-a2 * w2) / (w2 * exp1(a2 * w2))
    return [u2 - p.u_m, -2 * d2 * dv2 - 2 * d1 * du2 - mu * p.H_m]


@pytest.mark.parametrize("d1,d2,seed", [(1.0, 1.0, (7.4, 0.055)), (1.3, 0.7, (14.8, 0.06))])
def test_constant_diffusivity_closed_form(d1, d2, seed):
    p = REFERENCE_PARAMETERS
    root = fsolve(constant_d_residuals, seed, args=(p, d1, d2), xtol=1e-14)
    assert max(map(abs, constant_d_residuals(root, p, d1, d2))) < 1e-12
    prob = StefanProblem(p, d1=Diffusivity.constant(d1), d2=Diffusivity.constant(d2))
    prof = solve_reduced_bvp(prob, (1.05 * root[0], 0.95 * root[1]))
    assert prof.omega2 == pytest.approx(root[0], rel=1e-8)
    assert prof.mu == pytest.approx(root[1], rel=1e-8)
    # profile against u(omega) = u_v + K (E1(a R) - E1(a omega))
    a1 = prof.mu / (2 * d1)
    k1 = p.R * math.exp(a1 * p.R) * (prof.mu * p.H_v - p.q) / (2 * d1)
    for w, u in prof.liquid[:: max(1, len(prof.liquid) // 20)]:
        assert u == pytest.approx(p.u_v + k1 * (exp1(a1 * p.R) - exp1(a1 * w)), abs=1e-8)


def test_reproduces_exact_solution(ref_solution, ref_problem):
    prof = solve_reduced_bvp(ref_problem, (4.2, 0.09))
    assert prof.omega2 == pytest.approx(ref_solution.omega2, rel=1e-8)
    assert prof.mu == pytest.approx(ref_solution.mu, rel=1e-8)
    assert compare_with_exact(prof, ref_solution).worst < 1e-8
    assert abs(prof.mismatch[0]) < 1e-10 and abs(prof.mismatch[1]) < 1e-10


def test_tabulated_unit_diffusivity_matches_constant(ref_problem):
    tab = Diffusivity.tabulated(np.linspace(-2.0, 3.0, 11), np.ones(11))
    a = solve_reduced_bvp(ref_problem, (3.9, 0.1))
    b = solve_reduced_bvp(StefanProblem(REFERENCE_PARAMETERS, d2=tab), (3.9, 0.1))
    assert b.omega2 == pytest.approx(a.omega2, rel=1e-9)
    assert b.mu == pytest.approx(a.mu, rel=1e-9)


def test_fixed_step_rk4_is_fourth_order(ref_problem):
    hs = [0.2, 0.1, 0.05, 0.025]
    vals = np.array([shoot(ref_problem, 3.9, 0.1, omega_max=30.0, fixed_step=h) for h in hs])
    diffs = np.abs(np.diff(vals, axis=0)).max(axis=1)
    order = math.log2(diffs[-2] / diffs[-1])
    assert order > 3.7
    ref = shoot(ref_problem, 3.9, 0.1, omega_max=30.0, rtol=1e-12)
    assert np.abs(vals[-1] - ref).max() < 1e-7


def test_shoot_starts_from_spot_flux(ref_problem):
    p = REFERENCE_PARAMETERS
    # the flux variable omega d1 u' at R equals R (mu H_v - q) / 2 for d1 = 1/u
    du, dp = liquid_rhs(p.R, (p.u_v, p.R * (0.1 * p.H_v - p.q) / 2), 0.1, ref_problem.d1)
    assert du == pytest.approx((0.1 * p.H_v - p.q) / 2)
    assert dp == pytest.approx(-0.05 * p.R * du)


@pytest.mark.parametrize("w2,mu", [(0.5, 0.1), (1.0, 0.1), (3.0, 0.0), (3.0, -1.0)])
def test_shoot_domain(ref_problem, w2, mu):
    with pytest.raises(DomainError):
        shoot(ref_problem, w2, mu)


def test_profiles_hit_boundary_values(ref_problem):
    prof = solve_reduced_bvp(ref_problem, (3.9, 0.1))
    p = REFERENCE_PARAMETERS
    assert prof.u(p.R) == pytest.approx(p.u_v, abs=1e-14)
    assert prof.u(prof.omega2) == pytest.approx(p.u_m, abs=1e-9)
    assert prof.v(prof.omega2) == pytest.approx(p.v_m, abs=1e-14)
    assert prof.v(prof.omega_max) == pytest.approx(p.v_inf, abs=1e-9)
    assert prof.tail_bound < 1e-12


def test_power_law_needs_scan_then_converges():
    prob = StefanProblem(REFERENCE_PARAMETERS, d1=Diffusivity.power(1.0, 2.0))
    seeds = scan_shooting(prob).seeds()
    assert seeds
    prof = solve_reduced_bvp(prob, seeds[0])
    assert max(map(abs, prof.mismatch)) < 1e-10
    assert prof.omega2 > REFERENCE_PARAMETERS.R and prof.mu > 0


def test_compare_rejects_different_parameters(ref_solution):
    from dataclasses import replace

    from stefan_lab.model import InvalidParameters

    other = StefanProblem(replace(REFERENCE_PARAMETERS, H_m=0.6))
    prof = solve_reduced_bvp(other, (3.9, 0.1))
    with pytest.raises(InvalidParameters):
        compare_with_exact(prof, ref_solution)
