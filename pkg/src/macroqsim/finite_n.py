"""Exact finite-N statistics of a coarse-grained intensity measurement.

The state lives in the span of the Dicke states ``|N,k>`` (``k`` excitations,
``k < d``). Each particle passes a local channel, reaches the detector with
probability ``p`` and contributes an eigenvalue of ``A`` to the intensity; the
pointer adds Gaussian noise of standard deviation ``sigma*sqrt(N)``.

Two independent pipelines are provided. :func:`finite_distribution` inverts the
characteristic function built from Dicke matrix elements, while
:func:`brute_force_distribution` constructs the lossy N-qubit state in the full
``2**N`` space and enumerates outcome strings. The second one is exponential
and only meant as a test oracle.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.special import gammaln

from .errors import NumericalError, ValidationError
from .qubit_algebra import (ChannelSpec, QubitObservable, adjoint_channel,
                            rescale_params)

NORM_TOL_CHECK = 1e-6
NORM_TOL_INVERSION = 1e-4
CLIP_TOL = 1e-10
BRUTE_FORCE_MAX_N = 10


# --- states ------------------------------------------------------------------

@dataclass(frozen=True)
class DickeCoefficients:
    """Density matrix ``rho[k, l]`` in the basis ``|N,k>``, ``k = 0..d-1``.

    ``rho`` follows the usual convention ``rho = sum rho[k,l] |N,k><N,l|``.
    Build instances with :meth:`pure`, :meth:`mixed` or :meth:`basis`.
    """

    rho: np.ndarray
    N: int
    pure_vector: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def pure(cls, c, N):
        c = np.asarray(c, dtype=complex).ravel()
        nrm = np.linalg.norm(c)
        if abs(nrm - 1.0) > 1e-10:
            raise ValidationError(f"pure Dicke coefficients must have unit norm, got {nrm!r}")
        return cls._make(np.outer(c, c.conj()), N, c)

    @classmethod
    def mixed(cls, rho, N):
        return cls._make(np.asarray(rho, dtype=complex), N, None)

    @classmethod
    def basis(cls, k, N, d=None):
        d = k + 1 if d is None else d
        c = np.zeros(d, dtype=complex)
        c[k] = 1.0
        return cls.pure(c, N)

    @classmethod
    def _make(cls, rho, N, vec):
        if int(N) != N or N < 1:
            raise ValidationError("N must be a positive integer")
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
            raise ValidationError("Dicke density matrix must be square")
        if rho.shape[0] > N + 1:
            raise ValidationError(f"d = {rho.shape[0]} exceeds N + 1 = {N + 1}")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise ValidationError("Dicke density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > 1e-10:
            raise ValidationError("Dicke density matrix must have unit trace")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise ValidationError("Dicke density matrix is not positive semidefinite")
        rho = np.array(rho)
        rho.setflags(write=False)
        if vec is not None:
            vec = np.array(vec)
            vec.setflags(write=False)
        return cls(rho, int(N), vec)

    def with_N(self, N):
        """Same coefficients, different particle number."""
        return DickeCoefficients._make(self.rho, N, self.pure_vector)


@dataclass(frozen=True)
class PointerSpec:
    """Gaussian pointer; the noise standard deviation is ``sigma*sqrt(N)``."""

    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError("pointer sigma must be positive")


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid ``linspace(x_min, x_max, n)``."""

    x_min: float = -16.0
    x_max: float = 16.0
    n: int = 3201

    def __post_init__(self):
        if not (self.x_max > self.x_min) or self.n < 3:
            raise ValidationError("grid needs x_max > x_min and at least 3 points")

    @property
    def xs(self):
        return np.linspace(self.x_min, self.x_max, self.n)

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.n - 1)


@dataclass
class DensityGrid:
    """Probability density sampled on a uniform grid."""

    xs: np.ndarray
    values: np.ndarray
    meta: dict | None = None

    @property
    def dx(self) -> float:
        return float(self.xs[1] - self.xs[0])

    def normalization(self) -> float:
        return float(np.sum(self.values) * self.dx)

    def check(self, tol=NORM_TOL_CHECK):
        """Raise :class:`NumericalError` unless the grid invariants hold."""
        if np.any(self.values < 0):
            raise NumericalError("negative density values", min_value=float(self.values.min()))
        steps = np.diff(self.xs)
        if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
            raise NumericalError("grid is not uniform")
        norm = self.normalization()
        if abs(norm - 1.0) > tol:
            raise NumericalError("density not normalised", normalization=norm)
        return self

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "pdf"])
            for x, v in zip(self.xs, self.values):
                w.writerow(["%.17g" % x, "%.17g" % v])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])

    def to_json(self):
        from .serialization import dumps
        return dumps({"x_min": self.xs[0], "x_max": self.xs[-1], "n": len(self.xs),
                      "dx": self.dx, "meta": self.meta or {}, "values": self.values})

    @classmethod
    def from_json(cls, text):
        rec = json.loads(text)
        xs = np.linspace(rec["x_min"], rec["x_max"], rec["n"])
        return cls(xs, np.asarray(rec["values"], dtype=float), rec.get("meta"))


def _finalize(xs, raw, meta, norm_tol):
    raw = np.asarray(raw, dtype=float)
    low = raw.min()
    if low < -CLIP_TOL:
        raise NumericalError("density ripple below clip tolerance", min_value=float(low))
    g = DensityGrid(xs, np.clip(raw, 0.0, None), meta)
    norm = g.normalization()
    if abs(norm - 1.0) > norm_tol:
        raise NumericalError("density normalisation check failed", normalization=norm)
    return g


# --- Dicke matrix elements ---------------------------------------------------

def _lbinom(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _log_pow(z, e):
    """log(z**e) for complex z and integer e >= 0, with 0**0 = 1."""
    with np.errstate(divide="ignore", invalid="ignore"):
        lz = np.log(z.astype(complex))
        return np.where(e == 0, 0.0, np.where(z == 0, -np.inf, e * lz))


def _dicke_log_terms(G, N, k, l):
    """Log-domain terms of <N,k|G^{(x)N}|N,l> for a stack ``G`` (..., 2, 2).

    The summation index is the last axis of the result.
    """
    ms = np.arange(max(0, l - (N - k)), min(k, l) + 1)
    coef = (0.5 * (_lbinom(N, k) - _lbinom(N, l))
            + _lbinom(k, ms) + _lbinom(N - k, l - ms))
    g00, g01 = G[..., 0, 0, None], G[..., 0, 1, None]
    g10, g11 = G[..., 1, 0, None], G[..., 1, 1, None]
    lt = (coef + _log_pow(g11, ms) + _log_pow(g10, k - ms)
          + _log_pow(g01, l - ms) + _log_pow(g00, N - k - l + ms))
    return lt


def _logsum(lt, extra=0.0):
    """exp(extra) * sum(exp(lt)) along the last axis, with an absolute rounding
    estimate."""
    lt = lt + np.asarray(extra)[..., None]
    scale = np.max(lt.real, axis=-1, keepdims=True)
    scale = np.where(np.isfinite(scale), scale, 0.0)
    terms = np.exp(lt - scale)
    s = terms.sum(axis=-1) * np.exp(scale[..., 0])
    mag = np.abs(terms).sum(axis=-1) * np.exp(scale[..., 0])
    return s, mag * 4 * np.finfo(float).eps * lt.shape[-1]


def dicke_matrix_element(G, N, k, l):
    """``<N,k| G^{(x)N} |N,l>`` from the exact combinatorial sum.

    Parameters
    ----------
    G : array_like, shape (2, 2) or (..., 2, 2)
        Arbitrary complex single-qubit operator(s).
    N, k, l : int
        Particle number and excitation numbers, ``0 <= k, l <= N``.

    Returns
    -------
    complex or ndarray
    """
    if not (0 <= k <= N and 0 <= l <= N):
        raise ValidationError(f"Dicke indices out of range: k={k}, l={l}, N={N}")
    G = np.asarray(G, dtype=complex)
    val, _ = _logsum(_dicke_log_terms(G, int(N), int(k), int(l)))
    return complex(val) if G.ndim == 2 else val


# --- characteristic function and inversion -----------------------------------

def _exp_itA(A: QubitObservable, ts):
    ph = np.exp(1j * np.multiply.outer(ts, A.eigenvalues))  # (nt, 2)
    V = A.eigenvectors
    return np.einsum("ia,ta,ja->tij", V, ph, V.conj())


def _raw_char(state, A, spec, sigma, ts):
    """Characteristic function of the unscaled intensity plus rounding bound."""
    ts = np.asarray(ts, dtype=float)
    flat = ts.ravel()
    p = spec.loss_p
    U = (1 - p) * np.eye(2) + p * _exp_itA(A, flat)
    G = spec.adjoint(U) if spec.kind != "identity" else U
    N = state.N
    gauss = -0.5 * N * sigma**2 * flat**2
    total = np.zeros(flat.shape, dtype=complex)
    err = np.zeros(flat.shape)
    rho = state.rho
    for k in range(state.d):
        for l in range(state.d):
            if rho[k, l] == 0:
                continue
            # tr[rho O] = sum rho[k,l] <l|O|k>
            val, e = _logsum(_dicke_log_terms(G, N, l, k), gauss)
            total += rho[k, l] * val
            err += abs(rho[k, l]) * e
    return total.reshape(ts.shape), err.reshape(ts.shape)


CHAR_ABS_TOL = 1e-9


def char_fn(state: DickeCoefficients, A: QubitObservable, spec: ChannelSpec,
            pointer: PointerSpec, t, rescaled=False):
    """Characteristic function ``E[exp(i t X)]`` of the measured intensity.

    With ``rescaled=True`` the variable is ``lambda_N X + mu_N``.

    Raises
    ------
    NumericalError
        If the rounding estimate of the combinatorial sum exceeds 1e-9, i.e.
        ``N`` is beyond the range where double precision is meaningful.
    """
    t = np.asarray(t, dtype=float)
    if rescaled:
        rp = rescale_params(spec, A, state.N)
        val, err = _raw_char(state, A, spec, pointer.sigma, rp.lambda_N * t)
        val = np.exp(1j * rp.mu_N * t) * val
    else:
        val, err = _raw_char(state, A, spec, pointer.sigma, t)
    if np.any(err > CHAR_ABS_TOL):
        raise NumericalError("characteristic function lost precision",
                             N=state.N, max_rounding=float(err.max()))
    # normalisation holds exactly; the log-Gamma route only reproduces it to rounding
    val = np.where(t == 0, 1.0 + 0j, val)
    return complex(val) if t.ndim == 0 else val


def _moments_from_char(cf, t0):
    lc = np.log(cf(np.array([t0]))[0])
    mean = lc.imag / t0
    var = max(-2.0 * lc.real / t0**2, 1e-300)
    return mean, np.sqrt(var)


def invert_char(cf, xs, t_max, mean, sd, bulk=14.0):
    """Density on ``xs`` from a characteristic function by the trapezoid rule.

    The rule is exact for band-limited functions up to aliasing with period
    ``2*pi/h``; ``h`` is chosen so that shifted copies of the bulk
    ``mean +- bulk*sd`` never reach the grid.
    """
    reach = max(abs(xs[-1] - mean), abs(xs[0] - mean)) + bulk * sd
    period = max(reach + bulk * sd, xs[-1] - xs[0] + 2 * bulk * sd)
    h = 2 * np.pi / period
    nt = int(np.ceil(t_max / h))
    ts = h * np.arange(1, nt + 1)
    vals = cf(ts)
    out = np.empty_like(xs)
    # chunked to bound memory
    for s in range(0, len(xs), 512):
        ph = np.exp(-1j * np.multiply.outer(xs[s:s + 512], ts))
        out[s:s + 512] = (h / np.pi) * (0.5 + (ph @ vals).real)
    return out


def finite_distribution(state, A, spec, pointer, grid_spec=None, rescaled=True):
    """Density of the (rescaled) measured intensity by Fourier inversion.

    The integration window is cut where the Gaussian pointer factor of the
    characteristic function falls below 1e-14.

    Raises
    ------
    NumericalError
        If the inverted density is off normalisation by more than 1e-4 or has
        negative ripple below -1e-10; the achieved normalisation is attached.
    """
    grid_spec = grid_spec or GridSpec()
    xs = grid_spec.xs
    sig = pointer.sigma
    cut = np.sqrt(2 * np.log(1e14))
    if rescaled:
        adj = adjoint_channel(spec, A)
        # Gaussian factor in rescaled units: exp(-sigma^2 t^2 / (4 p^2 |G01|^2))
        t_max = cut * np.sqrt(2) * spec.loss_p * abs(adj.G01) / sig
    else:
        t_max = cut / (sig * np.sqrt(state.N))

    def cf(ts):
        return char_fn(state, A, spec, pointer, ts, rescaled=rescaled)

    mean, sd = _moments_from_char(cf, 1e-3 * t_max / cut)
    raw = invert_char(cf, xs, t_max, mean, sd)
    return _finalize(xs, raw, {"method": "characteristic-function", "N": state.N,
                               "rescaled": bool(rescaled)}, NORM_TOL_INVERSION)


# --- brute-force oracle ------------------------------------------------------

def _dicke_vector(N, k):
    v = np.zeros(2**N)
    for ones in itertools.combinations(range(N), k):
        idx = sum(1 << (N - 1 - q) for q in ones)
        v[idx] = 1.0
    return v / np.sqrt(comb(N, k))


def _apply_local(rho_t, op_super, N):
    """Apply a single-qubit superoperator (4x4, row-major vec) to every qubit
    of a density tensor with shape (2,)*2N."""
    S = op_super.reshape(2, 2, 2, 2)  # S[i, j, i', j']
    for q in range(N):
        rho_t = np.tensordot(S, rho_t, axes=([2, 3], [q, N + q]))
        # new axes (i, j) are in front; move them back to positions q, N+q
        rho_t = np.moveaxis(rho_t, [0, 1], [q, N + q])
    return rho_t


def _partial_trace_keep(rho_t, N, keep):
    """Reduced density tensor on the qubits ``keep`` (in order)."""
    gone = [q for q in range(N) if q not in keep]
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    rows = list(letters[:N])
    cols = list(letters[N:2 * N])
    for q in gone:
        cols[q] = rows[q]
    out = "".join(rows[q] for q in keep) + "".join(cols[q] for q in keep)
    return np.einsum("".join(rows) + "".join(cols) + "->" + out, rho_t)


def brute_force_distribution(state, A, spec, pointer, grid_spec=None, rescaled=True):
    """Literal construction of the outcome density for ``N <= 10``.

    The lossy state is the mixture over ``M`` detected particles with weights
    ``C(N,M) p^M (1-p)^(N-M)`` of reduced states averaged over which particles
    were lost. For each block the probability of every eigenvalue string is
    read off after rotating into the eigenbasis of ``A``; strings are grouped
    by total intensity, giving an exact Gaussian mixture.
    """
    N = state.N
    if N > BRUTE_FORCE_MAX_N:
        raise ValidationError(f"brute force limited to N <= {BRUTE_FORCE_MAX_N}")
    grid_spec = grid_spec or GridSpec()
    sig = pointer.sigma
    basis = np.stack([_dicke_vector(N, k) for k in range(state.d)], axis=1)
    rho = basis @ state.rho @ basis.T
    rho_t = rho.reshape((2,) * (2 * N))
    if spec.kind != "identity":
        rho_t = _apply_local(rho_t, spec.superoperator(), N)
    V = A.eigenvectors
    a = A.eigenvalues
    p = spec.loss_p
    weights = {}
    for M in range(N + 1):
        fM = comb(N, M) * p**M * (1 - p) ** (N - M)
        if fM == 0.0:
            continue
        subsets = list(itertools.combinations(range(N), M))
        red = sum(_partial_trace_keep(rho_t, N, list(s)) for s in subsets) / len(subsets)
        if M == 0:
            weights[0.0] = weights.get(0.0, 0.0) + fM * float(np.real(red))
            continue
        # rotate each qubit into the eigenbasis of A and take the diagonal
        for q in range(M):
            red = np.tensordot(V.conj().T, red, axes=([1], [q]))
            red = np.moveaxis(red, 0, q)
            red = np.tensordot(red, V, axes=([M + q], [0]))
            red = np.moveaxis(red, -1, M + q)
        probs = np.real(np.diagonal(red.reshape(2**M, 2**M)))
        for idx, bits in enumerate(itertools.product((0, 1), repeat=M)):
            s = float(sum(a[b] for b in bits))
            weights[s] = weights.get(s, 0.0) + fM * probs[idx]
    xs = grid_spec.xs
    sd = sig * np.sqrt(N)
    lam, mu = 1.0, 0.0
    if rescaled:
        rp = rescale_params(spec, A, N)
        lam, mu = rp.lambda_N, rp.mu_N
    out = np.zeros_like(xs)
    for s, w in sorted(weights.items()):
        m = lam * s + mu
        sc = lam * sd
        out += w * np.exp(-0.5 * ((xs - m) / sc) ** 2) / (sc * np.sqrt(2 * np.pi))
    return _finalize(xs, out, {"method": "brute-force", "N": N, "rescaled": bool(rescaled)},
                     NORM_TOL_INVERSION)


# --- distances ---------------------------------------------------------------

def _same_grid(a: DensityGrid, b: DensityGrid):
    if a.xs.shape != b.xs.shape or np.max(np.abs(a.xs - b.xs)) > 1e-12 * max(1.0, np.abs(a.xs).max()):
        raise ValidationError("density grids differ")


def ks_distance(a: DensityGrid, b: DensityGrid) -> float:
    """Sup-norm distance between the cumulative distributions."""
    _same_grid(a, b)
    return float(np.max(np.abs(np.cumsum(a.values - b.values) * a.dx)))


def l1_distance(a: DensityGrid, b: DensityGrid) -> float:
    """``integral |a - b| dx`` on the common grid."""
    _same_grid(a, b)
    return float(np.sum(np.abs(a.values - b.values)) * a.dx)
