import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fcs import numerics
from fcs.controller import (
    ControllerMode, ControlLaw, augment, aw_only, baseline_control, decide, delta_h,
    hard_saturate, modified_constraints, siso_pi_constrained_matrices,
)
from fcs.design import AugmentationDesign, PolynomialSpec, build_sensitivities, lqr_pi_design
from fcs.errors import ConstraintFault
from fcs.model import ConstraintBox, Plant, ServoGains, build_extended
from fcs.units import DEG

from conftest import random_hurwitz, random_plant
from cases import random_servo
from oracles import active_set_qp, match_spectra


def scalar_design(a_p=0.5, b_p=1.0, k=0.6, c0=2.0):
    """Limited-state proportional loop written in sensitivity form."""
    return AugmentationDesign(
        r=(1,), H_x=np.array([[a_p + c0]]), H_u=np.array([[b_p]]),
        H_u_inv=np.array([[1.0 / b_p]]), H_w=np.array([[b_p]]), alpha_pi=np.array([c0]),
    )


def test_baseline_control_examples():
    g = ServoGains(np.eye(2), np.zeros((2, 3)))
    assert np.array_equal(baseline_control(g, [0, 0], [0, 0, 0]), [0, 0])
    assert np.array_equal(baseline_control(g, [1, -1], [0, 0, 0]), [-1, 1])


def test_baseline_control_aircraft_hand_product(aircraft):
    rng = np.random.default_rng(1)
    e, x_p = rng.standard_normal(2), rng.standard_normal(3)
    K_I, K_P = aircraft.gains.K_I, aircraft.gains.K_P
    hand = [-sum(K_I[i, j] * e[j] for j in range(2)) - sum(K_P[i, j] * x_p[j] for j in range(3))
            for i in range(2)]
    assert np.allclose(baseline_control(aircraft.gains, e, x_p), hand, atol=1e-14)


def test_delta_h_at_origin(aircraft):
    ext, d = aircraft.ext, aircraft.design
    dmin, dmax = delta_h(d, ext, np.zeros(5), np.zeros(2), np.zeros(2))
    assert np.allclose(dmin, d.alpha_pi * ext.y_lim_min) and np.all(dmin < 0)
    assert np.allclose(dmax, -d.alpha_pi * ext.y_lim_max) and np.all(dmax < 0)


@pytest.mark.parametrize("x,expected", [(2.0, 1.8), (0.5, -1.05)])
def test_scalar_delta_h_max(x, expected):
    a_p, b_p, k, c0 = 0.5, 1.0, 0.6, 2.0  # closed-loop pole a_p - b_p k = -0.1
    d = scalar_design(a_p, b_p, k, c0)
    _, dmax = modified_constraints(d, np.array([-1.0]), np.array([1.0]), np.array([x]), np.array([-k * x]))
    assert dmax[0] == pytest.approx(expected, abs=1e-14)


def test_scalar_augment_closed_form():
    v, w, delta = augment(scalar_design(), np.array([-3.8]), np.array([1.8]))
    assert v.size == 0
    assert w[0] == pytest.approx(-1.8)
    assert delta.tolist() == [1]


def test_inactive_augment_is_zero(aircraft):
    v, w, delta = augment(aircraft.design, -np.ones(4), -np.ones(4))
    assert np.array_equal(v, 0 * v) and np.array_equal(w, 0 * w) and not delta.any()


def test_both_branches_raise(aircraft):
    with pytest.raises(ConstraintFault):
        augment(aircraft.design, np.array([1.0, -1, -1, -1]), np.array([1.0, -1, -1, -1]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_augment_matches_active_set_qp(seed):
    rng, ext, d = random_servo(seed)
    x = rng.standard_normal(ext.n) * rng.uniform(0.1, 3.0)
    y_cmd = rng.standard_normal(2)
    dmin, dmax = delta_h(d, ext, x, -ext.gains.K_x @ x, y_cmd)
    v, w, _ = augment(d, dmin, dmax)
    G = np.vstack([-d.H_u, d.H_u])
    h = np.concatenate([-dmin, -dmax])
    ref = active_set_qp(d.H_u.T @ d.H_u, G, h)
    assert np.allclose(np.concatenate([v, w]), ref, rtol=1e-8, atol=1e-8 * max(1.0, np.abs(ref).max()))


def test_aw_only_interior_is_zero(aircraft):
    ext = aircraft.ext
    v = aw_only(ext.gains, ext.plant, aircraft.design.alpha_pi, np.zeros(5), np.zeros(2),
                (ext.box.u_min, ext.box.u_max))
    assert np.array_equal(v, np.zeros(2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_aw_only_matches_augment_without_output_limits(seed):
    rng = np.random.default_rng(seed)
    plant = random_plant(rng, 3, 2)
    gains = lqr_pi_design(plant, np.eye(5), np.eye(2))
    box = ConstraintBox([-0.5, -0.5], [0.5, 0.5], [-np.inf] * 2, [np.inf] * 2)
    ext = build_extended(plant, gains, box)
    d = build_sensitivities(ext, gains, PolynomialSpec.from_alpha(rng.uniform(1, 20, 4)))
    x = rng.standard_normal(5)
    y_cmd = rng.standard_normal(2) * 3
    v_aw = aw_only(gains, plant, d.alpha_pi, x, y_cmd, (box.u_min, box.u_max))
    dmin, dmax = delta_h(d, ext, x, -gains.K_x @ x, y_cmd)
    v, w, delta = augment(d, dmin, dmax)
    assert not delta[2:].any() and np.allclose(w, 0.0)
    assert np.allclose(v_aw, v, atol=1e-9 * max(1.0, np.abs(v).max()))
    law = ControlLaw(ControllerMode.AW_ONLY, ext, d)
    assert np.allclose(law.decide(x, y_cmd).v, v_aw, atol=1e-9 * max(1.0, np.abs(v).max()))


def test_hard_saturate_examples(aircraft):
    box = aircraft.config.box
    assert np.allclose(hard_saturate(np.array([10, -10]) * DEG, box), np.array([3, -2]) * DEG)
    inside = np.array([1, -1]) * DEG
    assert np.array_equal(hard_saturate(inside, box), inside)
    assert np.array_equal(hard_saturate(box.u_max, box), box.u_max)


def test_modes_agree_in_interior(aircraft):
    x = np.array([0.001, -0.002, 0.0005, 0.001, -0.001])
    y_cmd = np.zeros(2)
    outs = [decide(mode, aircraft.design, aircraft.ext, aircraft.gains, x, y_cmd) for mode in ControllerMode]
    for d in outs:
        assert not d.delta.any()
        assert np.array_equal(d.u_total, outs[0].u_total)
        assert np.array_equal(d.v, np.zeros(2))


def test_hard_saturation_pins_command(aircraft):
    ext = aircraft.ext
    x = np.zeros(5)
    x[0] = 1.0  # large integrated roll error drives the aileron past its limit
    d = decide(ControllerMode.HARD_SATURATION, aircraft.design, ext, aircraft.gains, x, np.zeros(2))
    assert d.u_bl[0] > ext.box.u_max[0]
    assert d.u_total[0] == ext.box.u_max[0]
    assert d.delta[0] == 1


def test_call_matches_decide(aircraft):
    rng = np.random.default_rng(5)
    for mode in ControllerMode:
        law = ControlLaw(mode, aircraft.ext, aircraft.design)
        for _ in range(20):
            x = rng.standard_normal(5) * 0.05
            y = rng.standard_normal(2) * 0.1
            d = law.decide(x, y)
            assert np.allclose(law(x, y), np.concatenate([d.v - y, d.u_total]), rtol=0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_augmentation_continuous_across_switching(seed):
    rng, ext, d = random_servo(seed)
    law = ControlLaw(ControllerMode.AUGMENTED, ext, d)
    x = rng.standard_normal(ext.n)
    y_cmd = rng.standard_normal(2)
    dmin, _ = law._offsets(x, y_cmd)
    # move x along the gradient of one offset until it sits on its switching surface
    i = int(rng.integers(0, 4))
    g = -law.F[i]
    x_b = x - (dmin[i] / (g @ g)) * g
    eps = 1e-8 * g / np.linalg.norm(g)
    a, b = law(x_b + eps, y_cmd), law(x_b - eps, y_cmd)
    assert np.linalg.norm(a - b) <= 1e-5 * max(1.0, np.linalg.norm(a))


def test_siso_constrained_matrices_example():
    plant = Plant([[-1.0]], [[1.0]], [[1.0]], [[0.0]], [[1.0]])
    A_G, b_G = siso_pi_constrained_matrices(plant, ServoGains([[1.0]], [[0.0]]), 2.0)
    assert np.array_equal(A_G, [[-1, -1], [0, -2]])
    assert np.allclose(np.sort(np.linalg.eigvals(A_G).real), [-2, -1])
    _, b_G = siso_pi_constrained_matrices(plant, ServoGains([[4.0]], [[0.0]]), 1.0)
    assert np.array_equal(b_G, [0.0, -0.25])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 5), st.floats(0.5, 50.0))
def test_siso_constrained_spectrum(seed, n_p, alpha_u):
    rng = np.random.default_rng(seed)
    A_p = random_hurwitz(rng, n_p)
    plant = Plant(A_p, rng.standard_normal((n_p, 1)), rng.standard_normal((1, n_p)), [[0.0]],
                  rng.standard_normal((1, n_p)))
    gains = ServoGains(rng.uniform(0.5, 3.0, (1, 1)) * rng.choice([-1, 1]), rng.standard_normal((1, n_p)))
    A_G, _ = siso_pi_constrained_matrices(plant, gains, alpha_u)
    target = np.concatenate([numerics.spectrum(A_p), [-alpha_u]])
    assert match_spectra(numerics.spectrum(A_G), target) <= 1e-8 * max(1.0, np.abs(target).max())
