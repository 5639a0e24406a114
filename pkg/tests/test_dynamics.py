import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhtrap.dynamics import (
    ESCAPED,
    TRAPPED_BACKWARD,
    TRAPPED_BOTH,
    TRAPPED_FORWARD,
    ExpansionRates,
    Perturbation,
    PhasePoint,
    check_pinching,
    classify_trapping,
    defining_function_data,
    expansion_rates,
    find_trapped_set,
    flow_invariants,
    group_defect,
    integrate_flow,
    perturbation_stability_scan,
    perturbed_system,
    project_to_shell,
    solve_transport,
    transport_residual,
)
from nhtrap.dynamics.rates import r_normal_order
from nhtrap.errors import DegeneratePointError, DomainError, HorizonTooShortError, PreconditionError
from nhtrap.warped import CrossSection, WarpedModel, dynamics_for_model

from conftest import k_point


# ---- points and systems ---------------------------------------------------------

def test_phase_point_roundtrip():
    p = PhasePoint([1.0, 2.0], [3.0, 4.0])
    assert np.array_equal(PhasePoint.from_vector(p.vector()).vector(), [1, 2, 3, 4])
    with pytest.raises(ValueError):
        p.x[0] = 5.0


@pytest.mark.parametrize("x, xi", [([1.0], [1.0, 2.0]), ([np.nan], [0.0]), ([np.inf], [1.0])])
def test_phase_point_rejects_bad_input(x, xi):
    with pytest.raises(DomainError):
        PhasePoint(x, xi)


def test_self_test_accepts_consistent_gradient(cylinder):
    assert cylinder.system.self_test([[0.3, 0.1, 0.2, 0.9], [-1.0, 2.0, -0.5, 1.1]]) < 1e-6


def test_self_test_rejects_wrong_gradient(saddle):
    from dataclasses import replace
    bad = replace(saddle, grad_p=lambda z: np.zeros(4))
    with pytest.raises(PreconditionError):
        bad.self_test([[0.5, 0.0, 0.5, 0.5]])


# ---- flow ---------------------------------------------------------------------------

def test_cylinder_neck_geodesic_is_a_rotation(cylinder):
    # On K the angle advances at unit speed and nothing else moves.
    res = integrate_flow(cylinder.system, k_point(), (0.0, 3.0))
    z = res.states[-1]
    assert z[1] == pytest.approx(3.0, abs=1e-9)
    assert np.allclose(z[[0, 2, 3]], [0.0, 0.0, 1.0], atol=1e-12)
    assert not res.escaped


def test_linear_flow_and_monodromy(linear_hyperbolic):
    res = integrate_flow(linear_hyperbolic, [1.0, 1.0], (0.0, 1.0), with_variational=True)
    assert np.allclose(res.states[-1], [math.e, 1 / math.e], rtol=1e-9)
    assert np.allclose(res.monodromy[-1], np.diag([math.e, 1 / math.e]), rtol=1e-9)


def test_backward_flow_inverts_forward(cylinder):
    z0 = np.array([0.3, 0.1, 0.2, 0.9])
    fwd = integrate_flow(cylinder.system, z0, (0.0, 2.0)).states[-1]
    back = integrate_flow(cylinder.system, fwd, (0.0, -2.0)).states[-1]
    assert np.allclose(back, z0, atol=1e-8)


def test_escape_is_reported(cylinder):
    res = integrate_flow(cylinder.system, [3.0, 0.0, 0.99, 0.5], (0.0, 50.0))
    assert res.escaped and res.escape_time < 50.0


def test_start_outside_outer_radius(cylinder):
    with pytest.raises(DomainError):
        integrate_flow(cylinder.system, [7.0, 0.0, 1.0, 0.0], (0.0, 1.0))


@pytest.mark.parametrize("z0", [[0.0, 0.0, 0.0, 1.0], [0.3, 0.0, 0.2, 0.9], [-0.4, 1.0, -0.1, 1.2]])
def test_invariants_on_cylinder(cylinder, z0):
    res = integrate_flow(cylinder.system, z0, (0.0, 5.0), with_variational=True)
    inv = flow_invariants(cylinder.system, res)
    assert inv["energy"] <= 1e-8
    assert inv["symplectic"] <= 1e-6 and inv["det"] <= 1e-6
    assert group_defect(cylinder.system, z0, 1.5, 3.5) <= 1e-7


def test_invariants_on_torus(torus):
    z0 = [0.0, math.pi + 0.01, 0.0, 0.0, 0.05, 0.7]
    res = integrate_flow(torus.system, z0, (0.0, 8.0), with_variational=True)
    inv = flow_invariants(torus.system, res)
    assert inv["energy"] <= 1e-8 and inv["symplectic"] <= 1e-6 and inv["det"] <= 1e-6
    assert group_defect(torus.system, z0, 3.0, 5.0) <= 1e-7


@settings(max_examples=25, deadline=None)
@given(r=st.floats(-1.5, 1.5), th=st.floats(-3, 3), xr=st.floats(-1, 1), xt=st.floats(0.2, 2))
def test_energy_conservation_property(cylinder, r, th, xr, xt):
    res = integrate_flow(cylinder.system, [r, th, xr, xt], (0.0, 3.0))
    assert flow_invariants(cylinder.system, res)["energy"] <= 1e-8


def test_pure_python_path_matches_native(cylinder):
    from dataclasses import replace
    plain = replace(cylinder.system, native=None)
    z0 = [0.3, 0.1, 0.2, 0.9]
    a = integrate_flow(cylinder.system, z0, (0.0, 4.0), store=False).states[-1]
    b = integrate_flow(plain, z0, (0.0, 4.0), store=False).states[-1]
    assert np.allclose(a, b, atol=1e-8)


# ---- trapping ----------------------------------------------------------------------

def test_classification_of_model_points(cylinder):
    s = cylinder.system
    t1 = math.tanh(1.0)
    assert classify_trapping(s, k_point(), 30.0).classification == TRAPPED_BOTH
    # on Gamma_+ (outgoing tail): trapped in the past only
    assert classify_trapping(s, [1.0, 0.0, t1, 1.0], 30.0).classification == TRAPPED_BACKWARD
    assert classify_trapping(s, [-1.0, 0.0, t1, 1.0], 30.0).classification == TRAPPED_FORWARD
    assert classify_trapping(s, [3.0, 0.0, 0.99, 0.5], 30.0).classification == ESCAPED


def test_classify_rejects_bad_horizon(cylinder):
    with pytest.raises(PreconditionError):
        classify_trapping(cylinder.system, k_point(), 0.0)


def test_project_to_shell(cylinder):
    pt = project_to_shell(cylinder.system, [0.5, 0.0, 0.3, 0.4], 1.0)
    assert cylinder.system.value(pt) == pytest.approx(1.0, abs=1e-12)
    assert np.array_equal(pt.x, [0.5, 0.0])


def test_find_trapped_set_symmetric_seeds(cylinder):
    seeds = [[-0.5, 0.0, 0.5, 1.0], [0.5, 0.0, -0.5, 1.0]]
    found = find_trapped_set(cylinder.system, 1.0, seeds, 30.0)
    assert found
    for smp in found:
        assert smp.classification == TRAPPED_BOTH
        assert abs(smp.point.x[0]) < 1e-8 and abs(smp.point.xi[0]) < 1e-8


def test_find_trapped_set_without_trapping(saddle):
    # below the saddle energy nothing is trapped: the shell splits into two sheets
    seeds = [[-0.5, 0.0, 0.5, 0.3], [0.5, 0.0, -0.5, 0.3]]
    assert find_trapped_set(saddle, 0.999, seeds, 30.0) == []


def test_find_trapped_set_saddle_at_energy_one(saddle):
    seeds = [[-0.5, 0.0, 0.5, 0.0], [0.5, 0.0, -0.5, 0.0]]
    found = find_trapped_set(saddle, 1.0, seeds, 30.0)
    assert found and np.allclose(found[0].point.vector()[[0, 2]], 0.0, atol=1e-8)


# ---- rates ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def cylinder_samples(cylinder):
    return [classify_trapping(cylinder.system, k_point(th), 60.0) for th in (0.0, 2.0)]


def test_cylinder_rates(cylinder, cylinder_samples):
    rates = expansion_rates(cylinder.system, cylinder_samples, 60.0)
    assert 0.999 <= rates.nu_min <= rates.nu_max <= 1.001
    assert rates.mu_max <= 1e-3
    assert rates.r_normal_order == 10 ** 6
    assert rates.sample_count == 2


def test_linear_model_rates(linear_hyperbolic):
    smp = classify_trapping(linear_hyperbolic, [0.0, 0.0], 30.0)
    rates = expansion_rates(linear_hyperbolic, [smp], 30.0)
    assert rates.nu_min == pytest.approx(1.0, abs=1e-8)
    assert rates.mu_max == 0.0


def test_rates_preconditions(cylinder, cylinder_samples):
    with pytest.raises(PreconditionError):
        expansion_rates(cylinder.system, cylinder_samples, 10.0)
    with pytest.raises(PreconditionError):
        expansion_rates(cylinder.system, [], 60.0)
    gamma = classify_trapping(cylinder.system, [1.0, 0.0, math.tanh(1.0), 1.0], 30.0)
    with pytest.raises(PreconditionError):
        expansion_rates(cylinder.system, [gamma], 30.0)


def test_torus_neck_tangential_rate(torus):
    beta = 0.3
    z = [0.0, math.pi, 0.0, 0.0, 0.0, (1 - beta)]
    smp = classify_trapping(torus.system, z, 60.0)
    rates = expansion_rates(torus.system, [smp], 60.0)
    assert rates.mu_max == pytest.approx(math.sqrt(beta / (1 - beta)), rel=1e-3)
    assert rates.nu_min == pytest.approx(1.0, abs=1e-3)
    assert rates.r_normal_order == 1


def test_r_normal_order_cap():
    assert r_normal_order(1.0, 0.0) == 10 ** 6
    assert r_normal_order(1.0, 0.3) == 3
    assert r_normal_order(1.0, 1e-9, cap=50) == 50


def test_pinching():
    rates = ExpansionRates(1.0, 1.0, 0.0, 60.0, 1, 10 ** 6)
    rep = check_pinching(rates, 0.1)
    assert rep.pinched and rep.margin == pytest.approx(0.7)
    assert not check_pinching(ExpansionRates(1.0, 2.5, 0.0, 60.0, 1, 1), 0.1).pinched
    with pytest.raises(PreconditionError):
        check_pinching(rates, 0.0)


def _sin_pert():
    def value(z, s):
        return s * math.sin(z[1]) / math.cosh(z[0])
    return Perturbation(value, native_slot=3)


def test_perturbed_system_matches_native_kernel(cylinder):
    from dataclasses import replace
    ps = perturbed_system(cylinder.system, _sin_pert(), 0.05)
    plain = replace(ps, native=None)
    z0 = [0.2, 0.4, 0.1, 1.0]
    assert ps.p(z0) == pytest.approx(cylinder.system.p(z0) + 0.05 * math.sin(0.4) / math.cosh(0.2))
    a = integrate_flow(ps, z0, (0.0, 2.0), store=False).states[-1]
    b = integrate_flow(plain, z0, (0.0, 2.0), store=False).states[-1]
    assert np.allclose(a, b, atol=1e-6)


def test_perturbation_scan(cylinder, cylinder_samples):
    scan = perturbation_stability_scan(cylinder.system, _sin_pert(), [0.0, 0.01], cylinder_samples[:1], 40.0)
    s0, r0 = scan[0]
    assert s0 == 0.0 and r0.nu_min == pytest.approx(1.0, abs=1e-6)
    assert not scan[1].flagged
    assert scan[1].rates.nu_min == pytest.approx(1.0, abs=1e-2)
    with pytest.raises(PreconditionError):
        perturbation_stability_scan(cylinder.system, _sin_pert(), [0.01], cylinder_samples, 40.0)


# ---- defining functions and transport ------------------------------------------------

def test_defining_data_on_trapped_set(cylinder):
    d = defining_function_data(cylinder.system, cylinder.phi_plus, cylinder.phi_minus, k_point())
    assert d.c_plus == pytest.approx(1.0, abs=1e-6)
    assert d.c_minus == pytest.approx(1.0, abs=1e-6)
    assert d.bracket == pytest.approx(2.0, abs=1e-12)


def test_defining_data_on_outgoing_tail(cylinder):
    t1 = math.tanh(1.0)
    d = defining_function_data(cylinder.system, cylinder.phi_plus, cylinder.phi_minus, [1.0, 0.0, t1, 1.0])
    assert d.c_plus == pytest.approx(1 + t1 * t1, rel=1e-7)
    assert d.c_plus == pytest.approx(cylinder.c_plus([1.0, 0.0, t1, 1.0]), rel=1e-7)


def test_defining_data_degenerate(linear_hyperbolic):
    def phi(z):
        return 0.0, np.zeros(2)
    with pytest.raises(DegeneratePointError):
        defining_function_data(linear_hyperbolic, phi, phi, [0.0, 0.0])


def test_transport_linear_closed_form(linear_hyperbolic):
    # H_p a = x on Gamma_+ = {xi = 0} is solved by a = x
    a = solve_transport(linear_hyperbolic, "+", lambda z: z[0], [2.0, 0.0], 40.0)
    assert a == pytest.approx(2.0, abs=1e-9)


def test_transport_residual_cylinder(cylinder):
    t1 = math.tanh(1.0)
    rows = transport_residual(cylinder.system, "+", lambda z: cylinder.phi_minus(z)[0],
                              [1.0, 0.3, t1, 1.0], 20.0)
    assert max(r[3] for r in rows) <= 1e-4


def test_transport_errors(cylinder, linear_hyperbolic):
    with pytest.raises(DomainError):
        solve_transport(linear_hyperbolic, "x", lambda z: z[0], [1.0, 0.0], 10.0)
    with pytest.raises(DomainError):
        # on Gamma_- instead of Gamma_+: the backward flow escapes
        solve_transport(cylinder.system, "+", lambda z: z[0], [1.0, 0.0, -math.tanh(1.0), 1.0], 40.0)
    with pytest.raises(HorizonTooShortError):
        solve_transport(linear_hyperbolic, "+", lambda z: z[0], [2.0, 0.0], 2.0)


def test_scaled_cross_section_rescales_angular_momentum():
    dyn = dynamics_for_model(WarpedModel(CrossSection("circle"), 2, 0.1, scale_C=5.0))
    assert dyn.system.p(k_point(C=5.0)) == pytest.approx(1.0)
