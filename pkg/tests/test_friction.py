import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from slipflow import friction
from slipflow.fem import apply_mask, interpolate_velocity
from slipflow.friction import SlipLaw

LAW1 = SlipLaw(a=1.55, b=1.53, rho=3.0)
LAW2 = SlipLaw(a=4.01, b=4.00, rho=1.5)
LAW3 = SlipLaw(a=3.25, b=3.20, rho=0.5)


def test_slip_law_validation():
    with pytest.raises(ValueError):
        SlipLaw(a=1.0, b=1.0, rho=1.0)
    with pytest.raises(ValueError):
        SlipLaw(a=1.0, b=2.0, rho=1.0)
    with pytest.raises(ValueError):
        SlipLaw(a=2.0, b=-1.0, rho=1.0)
    with pytest.raises(ValueError):
        SlipLaw(a=2.0, b=1.0, rho=0.0)
    with pytest.raises(ValueError):
        SlipLaw(a=2.0, b=1.0, rho=1.0, eps_reg=0.0)


def test_slip_law_derived_constants():
    assert LAW1.k0 == 1.55
    assert LAW1.k1 == 0.0
    assert math.isclose(LAW1.delta1_envelope, 0.06)
    assert math.isclose(LAW2.delta1_envelope, 0.015)
    assert math.isclose(LAW3.delta1_envelope, 0.025)


def test_omega_decays_from_a_to_b():
    t = np.linspace(0.0, 50.0, 400)
    w = friction.omega(LAW1, t)
    assert np.isclose(w[0], LAW1.a)
    assert np.isclose(w[-1], LAW1.b, atol=1e-12)
    assert np.all(np.diff(w) <= 0)
    assert np.all(friction.omega_prime(LAW1, t) <= 0)


@pytest.mark.parametrize("law", [LAW1, LAW2, LAW3])
@pytest.mark.parametrize("z", [0.0, 0.13, -0.5, 1.0, -4.2])
def test_slip_potential_matches_quadrature(law, z):
    val = friction.slip_potential(law, z)
    ref, err = quad(lambda t: friction.omega(law, t), 0.0, abs(z))
    assert abs(val - ref) <= 1e-12 + 10 * err


def test_traction_bounded_and_odd():
    z = np.concatenate([np.linspace(-10, 10, 2001),
                        np.logspace(-9, 1, 200),
                        -np.logspace(-9, 1, 200)])
    T = friction.traction(LAW1, z)
    assert np.all(np.abs(T) <= LAW1.a + 1e-15)
    assert np.allclose(friction.traction(LAW1, -z), -T, atol=0.0)
    assert friction.traction(LAW1, 0.0) == 0.0


@pytest.mark.parametrize("law", [LAW1, LAW2, LAW3])
def test_traction_slope_one_sided_bound(law):
    z = np.concatenate([np.linspace(-10, 10, 2001),
                        np.logspace(-9, 1, 400),
                        -np.logspace(-9, 1, 400), [0.0]])
    dT = friction.traction_derivative(law, z)
    assert np.all(dT >= -law.delta1_envelope - 1e-12)


def test_traction_slope_at_origin_scales_with_regularization():
    # T_eps'(0) = omega(eps)/eps, so the slope there is eps-dependent
    for eps in (1e-6, 1e-4, 1e-2):
        law = SlipLaw(a=1.55, b=1.53, rho=3.0, eps_reg=eps)
        d0 = friction.traction_derivative(law, 0.0)
        assert np.isclose(d0, friction.omega(law, eps) / eps, rtol=1e-12)


def test_traction_derivative_matches_central_difference():
    # near the origin the slope is steep but smooth on the eps scale
    h0 = 1e-10
    d0 = (friction.traction(LAW1, h0) - friction.traction(LAW1, -h0)) / (2 * h0)
    assert np.isclose(d0, friction.traction_derivative(LAW1, 0.0), rtol=1e-4)
    # the traction varies on the scale max(|z|, eps), so the step must
    # shrink with z to keep the truncation error small near the origin
    for z in (1e-5, 1e-3, 0.2, -0.7, 3.0):
        h = max(1e-3 * abs(z), 1e-8)
        fd = (friction.traction(LAW1, z + h)
              - friction.traction(LAW1, z - h)) / (2 * h)
        dT = friction.traction_derivative(LAW1, z)
        assert abs(fd - dT) <= 1e-4 * (1.0 + abs(dT))


def test_subgradient_selection_and_directional_derivative():
    assert friction.subgradient_selection(LAW1, 0.0) == 0.0
    s = np.array([-2.0, -0.1, 0.3, 5.0])
    g = friction.subgradient_selection(LAW1, s)
    assert np.allclose(g, friction.omega(LAW1, np.abs(s)) * np.sign(s))
    # at the origin the generalized directional derivative is a |eta|
    assert np.isclose(friction.directional_j0(LAW1, 0.0, 2.5), LAW1.a * 2.5)
    assert np.isclose(friction.directional_j0(LAW1, 0.0, -2.5), LAW1.a * 2.5)
    # away from the origin it is the classical derivative times eta
    assert np.isclose(friction.directional_j0(LAW1, 0.4, -1.0),
                      -friction.subgradient_selection(LAW1, 0.4))


@settings(max_examples=300, deadline=None)
@given(st.floats(-20, 20), st.floats(0.01, 5.0))
def test_potential_wedge_and_homogeneity(z, lam):
    # b|z| <= j(z) <= a|z| and j0 is positively homogeneous in eta
    j = friction.slip_potential(LAW3, z)
    assert j >= LAW3.b * abs(z) - 1e-12
    assert j <= LAW3.a * abs(z) + 1e-12
    d = friction.directional_j0(LAW3, z, 1.3)
    assert np.isclose(friction.directional_j0(LAW3, z, lam * 1.3),
                      lam * d, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("law,envelope", [(LAW1, 0.06), (LAW2, 0.015),
                                          (LAW3, 0.025)])
def test_delta1_estimate_reaches_envelope(law, envelope):
    est = friction.estimate_delta1(law)
    assert math.isclose(est.envelope, envelope)
    assert est.value <= est.envelope * (1 + 1e-9)
    assert est.value >= 0.999 * est.envelope


def test_gamma1_length_is_one(space4):
    assert np.isclose(friction.gamma1_length(space4), 1.0, rtol=1e-14)


def test_friction_pairing_constant_slip(space4):
    # constant tangential velocity c on the top edge: pairing with the
    # constant test field (1, 0) gives T_eps(c) times the edge length
    c = 0.37
    law = LAW1
    u = interpolate_velocity(space4, lambda x, y: (c + 0 * x, 0 * y))
    res = friction.friction_residual(space4, law, u)
    vtest = interpolate_velocity(space4, lambda x, y: (1 + 0 * x, 0 * y))
    m = math.sqrt(c * c + law.eps_reg ** 2)
    T = ((law.a - law.b) * math.exp(-law.rho * m) + law.b) * c / m
    assert np.isclose(vtest @ res, T, rtol=1e-13)
    assert np.isclose(T, 1.5365911792158649, rtol=1e-13)


def test_friction_residual_supported_on_top_edge(space4, rng):
    u = rng.standard_normal(space4.ndof_v)
    res = friction.friction_residual(space4, LAW3, u)
    outside = np.ones(space4.ndof_v, dtype=bool)
    outside[space4.gamma1_sdofs] = False
    assert np.abs(res[outside]).max() == 0.0


def test_friction_jacobian_matches_directional_difference(space4, rng):
    u = rng.standard_normal(space4.ndof_v)
    d = rng.standard_normal(space4.ndof_v)
    t = 1e-7
    res, jac = friction.assemble_friction(space4, LAW3, u)
    assert np.allclose(res, friction.friction_residual(space4, LAW3, u),
                       atol=0.0)
    fd = (friction.friction_residual(space4, LAW3, u + t * d) - res) / t
    err = np.linalg.norm(jac @ d - fd) / max(np.linalg.norm(fd), 1e-30)
    assert err < 1e-5


def test_slip_energy_constant_trace(space4):
    c = 0.81
    u = interpolate_velocity(space4, lambda x, y: (c + 0 * x, 0 * y))
    e = friction.slip_energy(space4, LAW2, u)
    assert np.isclose(e, float(friction.slip_potential(LAW2, c)), rtol=1e-13)


def test_gamma1_mass_gives_trace_norm(space4):
    M = friction.gamma1_mass(space4)
    u = interpolate_velocity(space4, lambda x, y: (x, 0 * y))
    # int_0^1 x^2 dx along the top edge
    assert np.isclose(u @ (M @ u), 1.0 / 3.0, rtol=1e-13)


def test_lambda0_frozen_values(space4, space8):
    c4 = friction.estimate_lambda0(space4)
    c8 = friction.estimate_lambda0(space8)
    assert np.isclose(c4.lambda0, 2.178628972287351, rtol=1e-6)
    assert np.isclose(c8.lambda0, 2.166471391436141, rtol=1e-6)
    assert c4.mesh_n == 4 and c8.mesh_n == 8
    assert c4.num_trace_dofs == 2 * 4 - 1
    assert c8.num_trace_dofs == 2 * 8 - 1


def test_lambda0_eigenfunction_properties(space4, rng):
    from slipflow.forms import assemble_a
    A = assemble_a(space4)
    c = friction.estimate_lambda0(space4, A)
    x = c.eigenfunction
    # respects the essential constraints
    assert np.abs(x[space4.velocity_mask]).max() == 0.0
    Mg = friction.gamma1_mass(space4)
    num = 0.5 * (x @ (A @ x))
    den = x @ (Mg @ x)
    assert np.isclose(num / den, c.lambda0, rtol=1e-10)
    # lambda0 is the minimum of the Rayleigh quotient
    for _ in range(20):
        v = apply_mask(space4, rng.standard_normal(space4.ndof_v))
        tn = v @ (Mg @ v)
        if tn < 1e-14:
            continue
        assert 0.5 * (v @ (A @ v)) >= c.lambda0 * tn * (1 - 1e-10)
