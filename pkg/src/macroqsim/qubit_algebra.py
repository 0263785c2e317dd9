"""Single-qubit observables, local decoherence channels and limit parameters.

Conventions
-----------
Computational basis states are ``|0> = (1, 0)`` and ``|1> = (0, 1)`` and the
Pauli matrices are the textbook ones, so ``<0|sigma_z|0> = +1``.

A channel ``Gamma`` acts on density matrices. Its adjoint acts on observables
and is defined through ``tr[X Gamma(rho)] = tr[Gamma^dagger(X) rho]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DiagonalObservableError, ValidationError

HERMITIAN_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

CHANNEL_KINDS = ("identity", "dephasing", "depolarizing", "process")


def _as_2x2(matrix, name="matrix"):
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (2, 2):
        raise ValidationError(f"{name} must be 2x2, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QubitObservable:
    """Hermitian single-qubit observable with its spectral decomposition.

    Use :func:`eig_decompose` to build one; the constructor does not check
    consistency between the fields.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, ordered like ``eigenvalues``
    projectors: np.ndarray  # shape (2, 2, 2)

    @property
    def offdiag(self) -> complex:
        """Matrix element ``<0|A|1>``."""
        return complex(self.matrix[0, 1])

    def is_nondiagonal(self, tol=0.0) -> bool:
        """Membership in the set of non-diagonal observables."""
        return abs(self.offdiag) > tol


def eig_decompose(A) -> QubitObservable:
    """Diagonalise a Hermitian 2x2 matrix.

    Parameters
    ----------
    A : array_like, shape (2, 2)

    Returns
    -------
    QubitObservable
        Eigenvalues ascending; ``projectors[i]`` projects onto the eigenspace
        of ``eigenvalues[i]``.

    Raises
    ------
    ValidationError
        If ``A`` is not Hermitian to 1e-12.
    """
    m = _as_2x2(A, "observable")
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
        raise ValidationError("observable is not Hermitian")
    m = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(m)
    proj = np.einsum("ia,ja->aij", v, v.conj())
    return QubitObservable(_frozen(m), _frozen(w), _frozen(v), _frozen(proj))


def pauli_observable(nx=0.0, ny=0.0, nz=0.0, n0=0.0) -> QubitObservable:
    """``n0*I + nx*X + ny*Y + nz*Z`` as a :class:`QubitObservable`."""
    return eig_decompose(n0 * I2 + nx * SX + ny * SY + nz * SZ)


def _kraus_ops(kind, eta):
    if kind == "identity":
        return [I2]
    if kind == "dephasing":
        # Gamma(rho) = (1 - eta/2) rho + (eta/2) Z rho Z: coherences scale by 1 - eta
        return [np.sqrt(1 - eta / 2) * I2, np.sqrt(eta / 2) * SZ]
    if kind == "depolarizing":
        # Gamma(rho) = (1 - eta) rho + eta I/2
        return [np.sqrt(1 - 0.75 * eta) * I2] + [np.sqrt(eta / 4) * s for s in (SX, SY, SZ)]
    raise ValidationError(f"no Kraus form for channel kind {kind!r}")


@dataclass(frozen=True)
class ChannelSpec:
    """Local decoherence channel plus the probability of reaching the detector.

    Parameters
    ----------
    kind : {'identity', 'dephasing', 'depolarizing', 'process'}
    strength : float in [0, 1]
        Ignored for ``identity`` and ``process``.
    loss_p : float in (0, 1]
        Probability that a particle reaches the measurement apparatus.
    process : ndarray, shape (4, 4), optional
        Superoperator on row-major vectorised density matrices, i.e.
        ``vec(Gamma(rho)) = process @ rho.reshape(4)``. Required iff
        ``kind == 'process'``.
    """

    kind: str = "identity"
    strength: float = 0.0
    loss_p: float = 1.0
    process: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValidationError(f"unknown channel kind {self.kind!r}")
        if not (0.0 <= float(self.strength) <= 1.0):
            raise ValidationError("channel strength must lie in [0, 1]")
        if not (0.0 < float(self.loss_p) <= 1.0):
            raise ValidationError("loss_p must lie in (0, 1]")
        if self.kind == "process":
            if self.process is None:
                raise ValidationError("kind 'process' needs a 4x4 process matrix")
            s = np.asarray(self.process, dtype=complex)
            if s.shape != (4, 4):
                raise ValidationError("process matrix must be 4x4")
            object.__setattr__(self, "process", _frozen(s))
            unit = self._adjoint_raw(I2)
            if np.max(np.abs(unit - I2)) > HERMITIAN_TOL:
                raise ValidationError("process matrix is not trace preserving (adjoint not unital)")
        elif self.process is not None:
            raise ValidationError("process matrix given for a built-in channel kind")

    def superoperator(self) -> np.ndarray:
        """4x4 matrix acting on row-major ``vec(rho)``."""
        if self.kind == "process":
            return np.array(self.process)
        return sum(np.kron(K, K.conj()) for K in _kraus_ops(self.kind, self.strength))

    def _adjoint_raw(self, X):
        if self.kind == "process":
            return (self.process.conj().T @ np.asarray(X, complex).reshape(4)).reshape(2, 2)
        return sum(K.conj().T @ X @ K for K in _kraus_ops(self.kind, self.strength))

    def apply(self, rho) -> np.ndarray:
        """Schroedinger-picture action on a 2x2 operator."""
        rho = np.asarray(rho, dtype=complex)
        if self.kind == "process":
            return (self.process @ rho.reshape(4)).reshape(2, 2)
        return sum(K @ rho @ K.conj().T for K in _kraus_ops(self.kind, self.strength))

    def adjoint(self, X) -> np.ndarray:
        """Heisenberg-picture action ``Gamma^dagger(X)``; accepts any 2x2 matrix,
        or a stack of them with shape (..., 2, 2)."""
        X = np.asarray(X, dtype=complex)
        if X.ndim == 2:
            return self._adjoint_raw(X)
        if self.kind == "process":
            flat = X.reshape(X.shape[:-2] + (4,))
            return (flat @ self.process.conj()).reshape(X.shape)
        out = np.zeros_like(X)
        for K in _kraus_ops(self.kind, self.strength):
            out += K.conj().T @ X @ K
        return out


@dataclass(frozen=True)
class ChannelAdjointObservable:
    """``G = Gamma^dagger(A)`` and ``G2 = Gamma^dagger(A^2)``."""

    G: np.ndarray
    G2: np.ndarray

    @property
    def G00(self) -> complex:
        return complex(self.G[0, 0])

    @property
    def G01(self) -> complex:
        return complex(self.G[0, 1])

    @property
    def G10(self) -> complex:
        return complex(self.G[1, 0])


def adjoint_channel(spec: ChannelSpec, A: QubitObservable) -> ChannelAdjointObservable:
    """Heisenberg-picture images of ``A`` and ``A^2`` under the channel."""
    if not isinstance(A, QubitObservable):
        raise ValidationError("A must be a QubitObservable")
    if spec.kind == "identity":
        G = np.array(A.matrix)
        G2 = G @ G
    else:
        G = spec.adjoint(A.matrix)
        G2 = spec.adjoint(A.matrix @ A.matrix)
    # Hermiticity is preserved by construction; symmetrise away rounding
    G = 0.5 * (G + G.conj().T)
    G2 = 0.5 * (G2 + G2.conj().T)
    return ChannelAdjointObservable(_frozen(G), _frozen(G2))


@dataclass(frozen=True)
class LimitMeasurement:
    """Limit Kraus operator data: Gaussian width ``beta``, quadrature angle
    ``phi`` and the pointer width ``sigma`` it was derived from."""

    beta: float
    phi: float
    sigma: float = float("nan")

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValidationError("beta must be positive and finite")
        if not np.isfinite(self.phi):
            raise ValidationError("phi must be finite")
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "phi", float(np.mod(self.phi, 2 * np.pi)))
        object.__setattr__(self, "sigma", float(self.sigma))


@dataclass(frozen=True)
class RescaleParams:
    """Affine map ``x -> lambda_N * x + mu_N`` applied to the raw intensity."""

    lambda_N: float
    mu_N: float


def _require_nondiagonal(adj: ChannelAdjointObservable):
    if abs(adj.G01) == 0.0:
        raise DiagonalObservableError("diagonal observable after decoherence: <0|Gamma^dagger(A)|1> = 0")


def limit_params(spec: ChannelSpec, A: QubitObservable, sigma: float) -> LimitMeasurement:
    """Width and angle of the limiting Kraus operator.

    ``beta**2 = (sigma**2 + p G2_00 - p**2 G00**2) / (p**2 |G01|**2) - 1``
    and ``phi = arg G01``, with ``G = Gamma^dagger(A)``.
    """
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    adj = adjoint_channel(spec, A)
    _require_nondiagonal(adj)
    p = float(spec.loss_p)
    g01sq = abs(adj.G01) ** 2
    num = sigma**2 + p * adj.G2[0, 0].real - p**2 * adj.G00.real**2
    beta2 = num / (p**2 * g01sq) - 1.0
    if not beta2 > 0:
        # cannot happen for a genuine channel and sigma > 0; guards custom process matrices
        raise ValidationError(f"non-positive beta^2 = {beta2!r}; channel data inconsistent")
    phi = float(np.mod(np.angle(adj.G01), 2 * np.pi))
    return LimitMeasurement(beta=float(np.sqrt(beta2)), phi=phi, sigma=float(sigma))


def rescale_params(spec: ChannelSpec, A: QubitObservable, N: int) -> RescaleParams:
    """``lambda_N = (2 N p^2 |G01|^2)^{-1/2}``, ``mu_N = -G00 sqrt(N) / sqrt(2 |G01|^2)``."""
    if int(N) != N or N < 1:
        raise ValidationError("N must be a positive integer")
    adj = adjoint_channel(spec, A)
    _require_nondiagonal(adj)
    p = float(spec.loss_p)
    g01sq = abs(adj.G01) ** 2
    lam = 1.0 / np.sqrt(2.0 * N * p**2 * g01sq)
    mu = -adj.G00.real * np.sqrt(N) / np.sqrt(2.0 * g01sq)
    return RescaleParams(lambda_N=float(lam), mu_N=float(mu))


# --- record (JSON-compatible) round trip -------------------------------------

def _cplx_to_record(m):
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def _cplx_from_record(r):
    return np.asarray(r["re"], dtype=float) + 1j * np.asarray(r["im"], dtype=float)


def to_record(obj) -> dict:
    """JSON-compatible dictionary for any value type of this module."""
    if isinstance(obj, QubitObservable):
        return {"type": "QubitObservable", "matrix": _cplx_to_record(obj.matrix)}
    if isinstance(obj, ChannelSpec):
        rec = {"type": "ChannelSpec", "kind": obj.kind, "strength": float(obj.strength),
               "loss_p": float(obj.loss_p)}
        if obj.process is not None:
            rec["process"] = _cplx_to_record(obj.process)
        return rec
    if isinstance(obj, ChannelAdjointObservable):
        return {"type": "ChannelAdjointObservable", "G": _cplx_to_record(obj.G),
                "G2": _cplx_to_record(obj.G2)}
    if isinstance(obj, LimitMeasurement):
        return {"type": "LimitMeasurement", "beta": obj.beta, "phi": obj.phi, "sigma": obj.sigma}
    if isinstance(obj, RescaleParams):
        return {"type": "RescaleParams", "lambda_N": obj.lambda_N, "mu_N": obj.mu_N}
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def from_record(rec: dict):
    """Inverse of :func:`to_record`."""
    kind = rec.get("type")
    if kind == "QubitObservable":
        return eig_decompose(_cplx_from_record(rec["matrix"]))
    if kind == "ChannelSpec":
        proc = rec.get("process")
        return ChannelSpec(rec["kind"], rec["strength"], rec["loss_p"],
                           None if proc is None else _cplx_from_record(proc))
    if kind == "ChannelAdjointObservable":
        return ChannelAdjointObservable(_frozen(_cplx_from_record(rec["G"])),
                                        _frozen(_cplx_from_record(rec["G2"])))
    if kind == "LimitMeasurement":
        return LimitMeasurement(rec["beta"], rec["phi"], rec["sigma"])
    if kind == "RescaleParams":
        return RescaleParams(rec["lambda_N"], rec["mu_N"])
    raise ValidationError(f"unknown record type {kind!r}")
