import numpy as np
import pytest
from hypothesis import given, strategies as st

from macroqsim import DiagonalObservableError, ValidationError
from macroqsim.qubit_algebra import (SX, SY, SZ, ChannelSpec, LimitMeasurement, adjoint_channel,
                                     eig_decompose, from_record, limit_params, pauli_observable,
                                     rescale_params, to_record)

from oracles import adjoint_via_matrix, channel_matrix

angles = st.floats(0, 2 * np.pi, allow_nan=False)
strengths = st.floats(0, 1, allow_nan=False)
coef = st.floats(-2, 2, allow_nan=False)


def test_sigma_x_spectrum():
    A = eig_decompose(SX)
    assert np.allclose(A.eigenvalues, [-1, 1])
    plus = np.array([1, 1]) / np.sqrt(2)
    assert np.allclose(A.projectors[1], np.outer(plus, plus), atol=1e-14)


def test_identity_degenerate():
    A = eig_decompose(np.eye(2))
    assert np.allclose(A.eigenvalues, [1, 1])
    assert np.allclose(A.projectors.sum(axis=0), np.eye(2))
    assert not A.is_nondiagonal()


def test_rotated_observable_phase():
    phi = 0.83
    A = eig_decompose(np.cos(phi) * SX + np.sin(phi) * SY)
    assert np.allclose(A.eigenvalues, [-1, 1])
    assert A.offdiag == pytest.approx(np.exp(-1j * phi), abs=1e-14)


def test_non_hermitian_rejected():
    with pytest.raises(ValidationError):
        eig_decompose([[0, 1], [0, 0]])


@given(coef, coef, coef, coef)
def test_spectral_reconstruction(n0, nx, ny, nz):
    A = pauli_observable(nx, ny, nz, n0)
    P = A.projectors
    recon = np.einsum("a,aij->ij", A.eigenvalues, P)
    assert np.allclose(recon, A.matrix, atol=1e-12)
    assert np.all(np.diff(A.eigenvalues) >= 0)
    assert np.allclose(P.sum(axis=0), np.eye(2), atol=1e-12)
    for a in range(2):
        assert np.allclose(P[a] @ P[a], P[a], atol=1e-12)
    assert np.allclose(P[0] @ P[1], 0, atol=1e-12)


def test_identity_channel_returns_A():
    A = eig_decompose(SX)
    adj = adjoint_channel(ChannelSpec(), A)
    assert np.array_equal(adj.G, A.matrix)
    assert adj.G01 == 1


@pytest.mark.parametrize("kind", ["dephasing", "depolarizing"])
@given(eta=strengths, nx=coef, ny=coef, nz=coef)
def test_adjoint_matches_channel_matrix(kind, eta, nx, ny, nz):
    A = pauli_observable(nx, ny, nz)
    adj = adjoint_channel(ChannelSpec(kind, eta), A)
    S = channel_matrix(kind, eta)
    assert np.allclose(adj.G, adjoint_via_matrix(S, A.matrix), atol=1e-13)
    assert np.allclose(adj.G2, adjoint_via_matrix(S, A.matrix @ A.matrix), atol=1e-13)
    assert adj.G01 == pytest.approx(np.conj(adj.G10))


def test_depolarizing_sx_example():
    eta = 0.37
    adj = adjoint_channel(ChannelSpec("depolarizing", eta), eig_decompose(SX))
    assert np.allclose(adj.G, (1 - eta) * SX, atol=1e-14)


def test_dephasing_leaves_sz():
    adj = adjoint_channel(ChannelSpec("dephasing", 0.6), eig_decompose(SZ))
    assert np.allclose(adj.G, SZ, atol=1e-14)


@pytest.mark.parametrize("kind", ["identity", "dephasing", "depolarizing"])
@given(eta=strengths)
def test_unital(kind, eta):
    spec = ChannelSpec(kind, eta)
    assert np.allclose(spec.adjoint(np.eye(2)), np.eye(2), atol=1e-12)


@pytest.mark.parametrize("kind", ["dephasing", "depolarizing"])
def test_zero_strength_is_identity(kind):
    A = pauli_observable(0.3, -0.7, 0.2)
    adj = adjoint_channel(ChannelSpec(kind, 0.0), A)
    assert np.max(np.abs(adj.G - A.matrix)) < 1e-14


def test_process_matrix_channel():
    S = channel_matrix("depolarizing", 0.25)
    spec = ChannelSpec("process", process=S, loss_p=0.9)
    A = pauli_observable(0.4, 0.1, 0.8)
    ref = adjoint_channel(ChannelSpec("depolarizing", 0.25, 0.9), A)
    assert np.allclose(adjoint_channel(spec, A).G, ref.G, atol=1e-14)


def test_process_matrix_must_preserve_trace():
    with pytest.raises(ValidationError):
        ChannelSpec("process", process=2 * np.eye(4))


def test_channel_validation():
    with pytest.raises(ValidationError):
        ChannelSpec("amplitude", 0.1)
    with pytest.raises(ValidationError):
        ChannelSpec("dephasing", 1.5)
    with pytest.raises(ValidationError):
        ChannelSpec("identity", loss_p=0.0)


def test_limit_params_sx():
    for sigma in (0.2, 1.0, 3.1):
        m = limit_params(ChannelSpec(), eig_decompose(SX), sigma)
        assert m.beta == pytest.approx(sigma, rel=1e-14)
        assert m.phi == 0.0


@given(phi0=angles, sigma=st.floats(0.05, 5))
def test_limit_params_phase_covariance(phi0, sigma):
    m = limit_params(ChannelSpec(), eig_decompose(np.cos(phi0) * SX + np.sin(phi0) * SY), sigma)
    assert m.beta == pytest.approx(sigma, rel=1e-12)
    # phi = arg<0|A|1> = -phi0 (mod 2 pi)
    d = np.angle(np.exp(1j * (m.phi + phi0)))
    assert abs(d) < 1e-12


def test_limit_params_lossy_hand_value():
    m = limit_params(ChannelSpec(loss_p=0.5), eig_decompose(SX), 1.0)
    assert m.beta**2 == pytest.approx(5.0, rel=1e-14)


def test_beta_reduces_to_sigma():
    # G00 = 0, |G01| = 1, G2_00 = 1, p = 1
    m = limit_params(ChannelSpec(), eig_decompose(SY), 0.77)
    assert m.beta**2 == pytest.approx(0.77**2, rel=1e-14)


def test_diagonal_observable_error():
    with pytest.raises(DiagonalObservableError):
        limit_params(ChannelSpec(), eig_decompose(SZ), 1.0)
    with pytest.raises(DiagonalObservableError):
        rescale_params(ChannelSpec("dephasing", 1.0), eig_decompose(SX), 4)


def test_rescale_examples():
    r = rescale_params(ChannelSpec(), eig_decompose(SX), 2)
    assert r.lambda_N == pytest.approx(0.5) and r.mu_N == 0
    r = rescale_params(ChannelSpec(), eig_decompose(SZ + SX), 1)
    assert r.lambda_N == pytest.approx(1 / np.sqrt(2)) and r.mu_N == pytest.approx(-1 / np.sqrt(2))
    r = rescale_params(ChannelSpec(loss_p=0.5), eig_decompose(SX), 8)
    assert r.lambda_N == pytest.approx(0.5)


@given(p=st.floats(0.05, 1), eta=strengths, sigma=st.floats(0.05, 3), kind=st.sampled_from(["dephasing", "depolarizing"]))
def test_beta_positive(p, eta, sigma, kind):
    if eta > 0.999:
        eta = 0.999
    m = limit_params(ChannelSpec(kind, eta, p), pauli_observable(0.8, 0.3, 0.5), sigma)
    assert m.beta > 0 and 0 <= m.phi < 2 * np.pi


def test_records_round_trip():
    items = [pauli_observable(0.1, 0.2, 0.3), ChannelSpec("dephasing", 0.2, 0.7),
             LimitMeasurement(1.3, 0.4, 0.9), rescale_params(ChannelSpec(), eig_decompose(SX), 3),
             adjoint_channel(ChannelSpec("depolarizing", 0.1), eig_decompose(SX))]
    for it in items:
        back = from_record(to_record(it))
        assert to_record(back) == to_record(it)
    proc = ChannelSpec("process", process=channel_matrix("dephasing", 0.3))
    assert np.allclose(from_record(to_record(proc)).process, proc.process)
