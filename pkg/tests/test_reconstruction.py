import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stefan_lab.reconstruction import (
    FieldEvaluator,
    FreeSurface,
    PerturbedField,
    Point4,
    StencilError,
    TransformedField,
    far_field_check,
    interior_samples,
    normal_and_velocity,
    omega_of_point,
    pde_residual,
    residual_checker,
    stefan_residuals,
    surface_point,
    surface_samples,
)
from stefan_lab.special_functions import DomainError
from stefan_lab.symmetry import D, J12, P1, P3, P_t, verify_invariance


def test_omega_simple_values():
    assert omega_of_point((0.0, 3.0, 0.0, 0.0), 1.0) == 3.0
    assert omega_of_point((0.0, 0.0, 0.0, 5.0), 1.0) == 10.0
    assert omega_of_point((1.0, 0.0, 0.0, -2.0), 0.5) == 0.0


def test_omega_cancellation_safe():
    mpmath.mp.dps = 50
    z, r = mpmath.mpf(-1e8), mpmath.mpf(1)
    exact = float(z + mpmath.sqrt(z * z + r * r))
    assert omega_of_point((0.0, 1.0, 0.0, -1e8), 0.0) == pytest.approx(exact, rel=1e-15)
    assert exact == pytest.approx(5e-9, rel=1e-15)


@given(st.floats(0.1, 50), st.floats(0.01, 2), st.floats(-5, 5), st.floats(0, 30), st.floats(0, 6.3))
@settings(max_examples=200)
def test_surface_round_trip(omega_k, mu, t, r, theta):
    s = FreeSurface(2, omega_k, mu)
    p = surface_point(s, t, r, theta)
    assert abs(s.value(p)) <= 1e-12 * max(1.0, (r / omega_k) ** 2)
    assert omega_of_point(p, mu) == pytest.approx(omega_k, rel=1e-12)


def test_surface_vertex_and_rim():
    s = FreeSurface(1, 1.0, 0.3)
    assert surface_point(s, 0.0, 0.0).x3 == 0.5
    # at r = omega1 the first front meets the moving plane z = 0
    assert surface_point(s, 2.0, 1.0).x3 == pytest.approx(0.6, abs=1e-15)


def test_normals_and_speed():
    rng = np.random.default_rng(0)
    for _ in range(100):
        s = FreeSurface(2, rng.uniform(0.5, 5), rng.uniform(0.05, 2))
        p = surface_point(s, rng.uniform(-1, 1), rng.uniform(0, 10), rng.uniform(0, 6.3))
        n, vn = normal_and_velocity(s, p)
        assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-15)
        assert vn == pytest.approx(s.mu * n[2], rel=1e-14)
        assert vn != 0
    n, vn = normal_and_velocity(FreeSurface(1, 2.0, 0.7), surface_point(FreeSurface(1, 2.0, 0.7), 1.0, 0.0))
    assert np.allclose(n, (0, 0, 1)) and vn == pytest.approx(0.7)


def test_normal_requires_surface_point():
    s = FreeSurface(1, 1.0, 1.0)
    with pytest.raises(DomainError):
        normal_and_velocity(s, (0.0, 0.0, 0.0, 3.0))


def test_phases_nested(ref_field):
    # omega increases along x3, so the phase sequence is gas, liquid, solid
    phases = [ref_field.phase((1.0, 0.7, 0.2, x3)) for x3 in np.linspace(-5, 10, 300)]
    order = {"gas": 0, "liquid": 1, "solid": 2}
    ranks = [order[p] for p in phases]
    assert ranks == sorted(ranks) and set(ranks) == {0, 1, 2}


def test_evaluate_on_fronts(ref_field, ref_solution):
    p = ref_solution.params
    s1, s2 = ref_field.surfaces
    q1 = surface_point(s1, 0.5, 0.7)
    assert ref_field.evaluate(q1) == ("liquid", pytest.approx(p.u_v, abs=1e-12))
    q2 = surface_point(s2, 0.5, 1.1)
    assert ref_field.temperature(q2, "liquid") == pytest.approx(p.u_m, abs=1e-9)
    assert ref_field.temperature(q2, "solid") == pytest.approx(p.v_m, abs=1e-12)
    assert ref_field.evaluate((0.0, 0.0, 0.0, -3.0)) == ("gas", None)


def test_travelling_wave_consistency(ref_field):
    p = Point4(0.4, 1.2, -0.7, 2.5)
    d = 3.0
    q = Point4(p.t + d, p.x1, p.x2, p.x3 + ref_field.mu * d)
    a, b = ref_field.evaluate(p), ref_field.evaluate(q)
    assert a[0] == b[0] and a[1] == pytest.approx(b[1], abs=1e-14)


def test_pde_residual_second_order(ref_field):
    rng = np.random.default_rng(1)
    hs = (0.1, 0.05, 0.025)
    for phase in ("liquid", "solid"):
        pts = interior_samples(ref_field, phase, 10, rng, margin=0.35)
        worst = [max(pde_residual(ref_field, p, h=h) for p in pts) for h in hs]
        assert math.log2(worst[1] / worst[2]) == pytest.approx(2.0, abs=0.05)


def test_constant_field_has_zero_residual(ref_field):
    class Constant:
        problem = ref_field.problem

        def phase(self, p):
            return "liquid"

        def temperature(self, p, phase):
            return 1.5

    assert pde_residual(Constant(), (1.0, 0.5, 0.5, 2.0), h=0.1) == 0.0


def test_corrupted_field_detected(ref_field):
    rng = np.random.default_rng(2)
    bad = PerturbedField(ref_field, lambda p: 0.01 * p[1] ** 2)
    pts = interior_samples(ref_field, "liquid", 5, rng, margin=0.35)
    for p in pts:
        good = pde_residual(ref_field, p, h=0.025)
        worse = pde_residual(bad, p, h=0.025)
        assert worse > 10 * good
        assert worse > 1e-3


def test_stencil_crossing_front_rejected(ref_field):
    p = surface_point(ref_field.surfaces[1], 1.0, 0.5)
    with pytest.raises(StencilError):
        pde_residual(ref_field, (p.t, p.x1, p.x2, p.x3 - 0.01), h=0.1)


def test_stefan_residuals_converge(ref_field):
    rng = np.random.default_rng(3)
    s1 = surface_samples(ref_field, 1, 20, rng)
    s2 = surface_samples(ref_field, 2, 20, rng)
    reps = [stefan_residuals(ref_field, s1, s2, h=h) for h in (4e-3, 2e-3, 1e-3)]
    assert reps[-1].flux_worst <= 1e-5
    assert reps[-1].dirichlet_worst <= 1e-8
    assert reps[0].evaporation_flux / reps[1].evaporation_flux == pytest.approx(4.0, rel=0.1)


def test_wrong_speed_detected(ref_solution):
    wrong = FieldEvaluator(ref_solution, frame_speed=1.1 * ref_solution.mu)
    s1 = [surface_point(wrong.surfaces[0], 1.0, r) for r in (0.0, 0.5, 1.5)]
    s2 = [surface_point(wrong.surfaces[1], 1.0, r) for r in (0.0, 0.5, 1.5)]
    rep = stefan_residuals(wrong, s1, s2, h=1e-3)
    assert rep.evaporation_flux > 1e-4


def test_off_surface_sample_rejected(ref_field):
    with pytest.raises(DomainError):
        stefan_residuals(ref_field, [(1.0, 0.0, 0.0, 10.0)], [], h=1e-3)


def test_far_field(ref_field, ref_solution):
    p = ref_solution.params
    assert far_field_check(ref_field, 80 / ref_solution.mu, 1.0) <= 1e-12 * abs(p.v_m - p.v_inf)
    vals = [far_field_check(ref_field, r, 1.0, n=50) for r in (5, 10, 20, 40)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_far_field_at_front_radius(ref_field, ref_solution):
    p = ref_solution.params
    # the sphere of radius omega2 touches the front at its pole
    val = far_field_check(ref_field, ref_solution.omega2, 1.0, n=400)
    assert val == pytest.approx(abs(p.v_m - p.v_inf), rel=1e-2)


def test_half_space_flag(ref_field):
    assert ref_field.half_space_flag((0.0, 0.0, 0.0, -1.0))
    assert not ref_field.half_space_flag((0.0, 0.0, 0.0, 1.0))


def test_transformed_field_pull_push(ref_field):
    f = TransformedField(ref_field, J12 + 0.3 * P1, 0.8)
    p = np.array([0.5, 1.0, 2.0, 3.0])
    assert np.allclose(f.pull(f.push(p)), p, atol=1e-14)
    assert f.u(f.push(p)) == pytest.approx(ref_field.u(p), abs=1e-14)


@pytest.fixture(scope="module")
def checker(ref_field):
    rng = np.random.default_rng(11)
    return residual_checker(
        interior_samples(ref_field, "liquid", 10, rng, 0.5) + interior_samples(ref_field, "solid", 10, rng, 0.5),
        surface_samples(ref_field, 1, 10, rng),
        surface_samples(ref_field, 2, 10, rng),
    )


@pytest.mark.parametrize("X,eps", [(P1, 0.7), (P3, -1.1), (J12, 0.9), (P_t, 1.5), (D, 0.0)])
def test_symmetries_preserve_residuals(ref_field, checker, X, eps):
    rep = verify_invariance(X, eps, ref_field, checker)
    assert rep.invariant
    if eps == 0.0:
        assert rep.after == rep.before


def test_scaling_breaks_constant_flux_solution(ref_field, checker):
    rep = verify_invariance(D, 0.3, ref_field, checker)
    assert not rep.invariant
    assert rep.after > 10 * rep.before
