import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from macroqsim import ValidationError
from macroqsim.devind import (LG_REFERENCE_ANGLES, TSIRELSON, bell_chsh, bell_correlator,
                              bell_joint_density, bell_marginal, lg_chsh, lg_correlator,
                              lg_orbit_distance, lg_reference_state, lg_reference_value,
                              no_signalling_residual, optimize_chsh, wigner_fock, wigner_grid,
                              _sign_operator0_closed, _sign_operator0_quadrature)
from macroqsim.limit_theory import FockState, ho_wavefunction
from macroqsim.qubit_algebra import LimitMeasurement
from macroqsim.serialization import dumps

from oracles import lg_reference_mp, wigner_by_definition


def rand_state(rng, d, real=False):
    c = rng.normal(size=d)
    if not real:
        c = c + 1j * rng.normal(size=d)
    return c / np.linalg.norm(c)


# --- Wigner function ---

@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("x,p", [(0.0, 0.0), (0.4, -0.3), (1.1, 0.7)])
def test_wigner_number_states_by_definition(k, x, p):
    ref = wigner_by_definition(lambda y: ho_wavefunction(k, y), x, p)
    w = wigner_fock(FockState.number(k), x, p)
    assert w == pytest.approx(ref, abs=1e-10)


def test_wigner_vacuum_closed_form():
    xs = np.linspace(-2, 2, 9)
    w = wigner_fock(FockState.number(0), xs, 0.5)
    assert np.allclose(w, np.exp(-xs**2 - 0.25) / np.pi, atol=1e-15)


def test_wigner_superposition_by_definition():
    c = np.array([0.6, 0.0, 0.8])
    psi = lambda y: c[0] * ho_wavefunction(0, y) + c[2] * ho_wavefunction(2, y)
    for x, p in ((0.0, 0.3), (0.8, -0.5)):
        assert wigner_fock(FockState.pure(c), x, p) == pytest.approx(
            wigner_by_definition(psi, x, p), abs=1e-10)


def test_wigner_complex_superposition_by_definition(rng):
    c = rand_state(rng, 4)
    psi = lambda y: sum(c[k] * ho_wavefunction(k, y) for k in range(4))
    for x, p in ((0.0, 0.3), (0.8, -0.5), (-1.2, 0.9)):
        assert wigner_fock(FockState.pure(c), x, p) == pytest.approx(
            wigner_by_definition(psi, x, p), abs=1e-10)


def test_wigner_one_photon_negative_at_origin():
    assert wigner_fock(FockState.number(1), 0.0, 0.0) == pytest.approx(-1 / np.pi, rel=1e-14)


def test_wigner_grid_normalization_and_reality(rng):
    xs = np.linspace(-8, 8, 321)
    for _ in range(3):
        s = FockState.pure(rand_state(rng, 4))
        g = wigner_grid(s, xs, xs)
        assert np.isrealobj(g.values)
        assert g.integral() == pytest.approx(1.0, abs=1e-8)


def test_wigner_marginal_is_position_density(rng):
    c = rand_state(rng, 3)
    s = FockState.pure(c)
    ps = np.linspace(-9, 9, 721)
    xs = np.array([-0.7, 0.2, 1.3])
    g = wigner_grid(s, xs, ps)
    marg = trapezoid(g.values, ps, axis=1)
    psi = sum(c[k] * ho_wavefunction(k, xs) for k in range(3))
    assert np.allclose(marg, np.abs(psi) ** 2, atol=1e-9)


# --- Leggett-Garg ---

def test_reference_value_closed_form():
    assert lg_reference_value() == pytest.approx(lg_reference_mp(), abs=1e-15)
    assert 2 < lg_reference_value() < TSIRELSON


@pytest.mark.parametrize("sigma", [0.3, 1.0, 1.7])
@pytest.mark.parametrize("phi", [0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4, np.pi, 2.0])
def test_lg_route_agreement(rng, sigma, phi):
    s = FockState.pure(rand_state(rng, 3))
    a = lg_correlator(s, phi, sigma, "closed")
    b = lg_correlator(s, phi, sigma, "quadrature")
    assert abs(a - b) < 1e-6


def test_lg_correlator_bounds_and_symmetry(rng):
    for real in (True, False):
        s = FockState.pure(rand_state(rng, 3, real=real))
        for phi in rng.uniform(-np.pi, np.pi, 4):
            v = lg_correlator(s, phi, 0.8)
            assert -1 <= v <= 1
            if real:  # W(x, -p) = W(x, p) for real amplitudes
                assert lg_correlator(s, -phi, 0.8) == pytest.approx(v, abs=1e-12)


def test_lg_reference_state_at_unit_sigma():
    r = lg_chsh(lg_reference_state(), LG_REFERENCE_ANGLES, 1.0)
    assert r.value == pytest.approx(lg_reference_value(), abs=1e-10)


def test_lg_reference_state_quadrature_route():
    r = lg_chsh(lg_reference_state(), LG_REFERENCE_ANGLES, 1.0, route="quadrature")
    assert r.value == pytest.approx(lg_reference_value(), abs=1e-8)


def test_lg_equal_angles_saturate_at_two():
    # equal angles: every correlator is the phi = 0 one and C = 2 c(0)
    s = FockState.pure([0.6, 0.0, 0.8])
    r = lg_chsh(s, (0.3, 0.3, 0.3, 0.3), 1.0)
    c = r.correlators[0]
    assert r.value == pytest.approx(2 * c, abs=1e-14)
    assert r.value <= 2


def test_lg_vacuum_no_violation():
    rng = np.random.default_rng(3)
    for _ in range(10):
        r = lg_chsh(FockState.number(0), rng.uniform(0, 2 * np.pi, 4), rng.uniform(0.2, 2))
        assert r.value <= 2 + 1e-9


def test_lg_result_record_round_trip():
    r = lg_chsh(lg_reference_state(), LG_REFERENCE_ANGLES, 1.0)
    rec = json.loads(dumps(r.to_record()))
    assert rec["value"] == r.value
    assert rec["kind"] == "leggett-garg"


def test_lg_validation():
    with pytest.raises(ValidationError):
        lg_correlator(FockState.number(0), 0.3, 0.0)
    with pytest.raises(ValidationError):
        lg_correlator(FockState.number(0), 0.3, 1.0, route="fft")
    with pytest.raises(ValidationError):
        lg_chsh(FockState.number(0), (0.1, 0.2, 0.3), 1.0)


def test_orbit_distance_reference_zero():
    assert lg_orbit_distance(LG_REFERENCE_ANGLES) < 1e-12
    shifted = np.array(LG_REFERENCE_ANGLES) + 0.7
    assert lg_orbit_distance(shifted) < 1e-12
    assert lg_orbit_distance(-np.array(LG_REFERENCE_ANGLES)) < 1e-12


def test_orbit_preserves_chsh():
    s = lg_reference_state()
    ref = lg_chsh(s, LG_REFERENCE_ANGLES, 1.0).value
    a1, a2, b1, b2 = LG_REFERENCE_ANGLES
    for ang in ((a2, a1, b1, b2 + np.pi), (a1, a2 + np.pi, b2, b1)):
        assert lg_chsh(s, ang, 1.0).value == pytest.approx(ref, abs=1e-12)


# --- Bell ---

def test_sign_operator_routes_agree():
    for beta in (0.05, 0.4, 1.0, 2.5):
        a, _ = _sign_operator0_closed(beta, 4)
        b, err = _sign_operator0_quadrature(beta, 4)
        assert np.max(np.abs(a - b)) < 1e-12
        assert err < 1e-12


def test_joint_density_normalised_and_symmetric(rng):
    c = rand_state(rng, 3, real=True)
    xs = np.linspace(-9, 9, 361)
    mA, mB = LimitMeasurement(0.7, 0.4), LimitMeasurement(0.7, 1.9)
    P = bell_joint_density(c, mA, mB, xs, xs)
    dx = xs[1] - xs[0]
    assert P.sum() * dx * dx == pytest.approx(1.0, abs=1e-8)
    assert np.all(P > -1e-12)
    Q = bell_joint_density(c, mB, mA, xs, xs)
    assert np.allclose(P, Q.T, atol=1e-14)


def test_product_state_factorises(rng):
    xs = np.linspace(-5, 5, 41)
    mA, mB = LimitMeasurement(0.9, 0.2), LimitMeasurement(0.9, 1.1)
    P = bell_joint_density([1.0], mA, mB, xs, xs)
    assert np.allclose(P, np.outer(bell_marginal([1.0], mA, xs), bell_marginal([1.0], mB, xs)), atol=1e-15)


def test_no_signalling_random_pairs(rng):
    xs = np.linspace(-8, 8, 161)
    for _ in range(20):
        c = rand_state(rng, 3)
        beta = rng.uniform(0.2, 2)
        res = no_signalling_residual(c, beta, rng.uniform(0, 2 * np.pi, 2),
                                     rng.uniform(0, 2 * np.pi, 2), xs, xs)
        assert res < 1e-7


def test_product_state_no_violation(rng):
    for _ in range(20):
        r = bell_chsh([1.0], rng.uniform(0, 2 * np.pi, 4), rng.uniform(0.02, 3))
        assert abs(r.value) <= 2 + 1e-12


def test_parity_state_gives_zero():
    # |00> + |22>: sign operators are odd, even-even blocks vanish
    c = np.array([1.0, 0.0, 1.0]) / np.sqrt(2)
    r = bell_chsh(c, (0.1, 0.9, 0.5, 1.7), 0.5)
    assert abs(r.value) < 1e-14


def test_bell_correlator_routes(rng):
    c = rand_state(rng, 3, real=True)
    mA, mB = LimitMeasurement(0.3, 0.5), LimitMeasurement(0.3, 2.0)
    a, _ = bell_correlator(c, mA, mB, "closed")
    b, err = bell_correlator(c, mA, mB, "quadrature")
    assert abs(a - b) < 1e-12 and err < 1e-10


@settings(max_examples=25)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1),
       st.lists(st.floats(0, 2 * np.pi), min_size=4, max_size=4), st.floats(0.02, 3))
def test_tsirelson(amps, angles, beta):
    c = np.array(amps) / np.linalg.norm(amps)
    assert bell_chsh(c, angles, beta).value <= TSIRELSON + 1e-6
    assert lg_chsh(FockState.pure(c), angles, beta).value <= TSIRELSON + 1e-6


# --- optimiser ---

def test_optimizer_lg_d1_no_violation():
    out = optimize_chsh("leggett-garg", d=1, seeds=range(3))
    assert out.best.value <= 2 + 1e-6


def test_optimizer_deterministic_and_thread_invariant():
    a = optimize_chsh("leggett-garg", d=2, seeds=range(3), maxiter=300)
    b = optimize_chsh("leggett-garg", d=2, seeds=range(3), maxiter=300, threads=3)
    assert dumps(a.best.to_record()) == dumps(b.best.to_record())
    assert [r.value for r in a.runs] == [r.value for r in b.runs]
    assert a.trace == b.trace


def test_optimizer_lg_recovers_reference_optimum():
    out = optimize_chsh("leggett-garg", d=3, seeds=range(4))
    assert out.best.value >= 2.41
    assert min(lg_orbit_distance(r.settings) for r in out.runs if r.value >= 2.41) < 0.05


def test_optimizer_bell_violation_certified():
    out = optimize_chsh("bell", d=3, seeds=range(2), maxiter=1500)
    b = out.best
    assert b.value > 2
    assert b.value - 2 >= 10 * b.error_bound
    assert b.extra["closed_form_value"] == pytest.approx(b.value, abs=1e-10)


def test_optimizer_validation():
    with pytest.raises(ValidationError):
        optimize_chsh("bell", d=4)
    with pytest.raises(ValidationError):
        optimize_chsh("ghz")
