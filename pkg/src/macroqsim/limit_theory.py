"""Oscillator-space description of the macroscopic limit.

In the limit, the rescaled intensity measurement becomes a Gaussian-smeared
quadrature measurement on ``L^2(R)`` with Kraus operator

    K(x) = (pi beta^2)^{-1/4} exp(-(Q - x)^2 / (2 beta^2)),

where ``Q`` is a rotated quadrature. Number-basis matrix elements are
``<j|K(x)|k> = exp(i(k-j)phi) <j|K_0(x)|k>`` with ``K_0`` the unrotated
operator (``Q = X``), i.e. ``K_phi = R^dagger K_0 R`` for
``R = diag(exp(i n phi))``. With ``phi = arg<0|Gamma^dagger(A)|1>`` this is
the representation that the finite-N statistics converge to; it corresponds
to ``Q = X cos(phi) - P sin(phi)`` for ``a = (X + iP)/sqrt(2)``.

Besides the Kraus operators this module holds the closed-form single
measurement density (a finite Hermite-function sum), chained sequential
measurements, and numerical checks of the special-function identities behind
the convergence results.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.special import eval_hermite, gammaln

from ._quad import integrate_converged, uniform_panels
from .errors import NumericalError, ValidationError
from .finite_n import DensityGrid, DickeCoefficients, GridSpec, _finalize
from .qubit_algebra import LimitMeasurement

KRAUS_TOL = 1e-13
LEAK_TOL = 1e-6


# --- states ------------------------------------------------------------------

@dataclass(frozen=True)
class FockState:
    """Density matrix in the truncated number basis ``|0>, ..., |D-1>``."""

    rho: np.ndarray

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def pure(cls, c, dim=None):
        c = np.asarray(c, dtype=complex).ravel()
        if abs(np.linalg.norm(c) - 1) > 1e-10:
            raise ValidationError("pure state must have unit norm")
        if dim is not None:
            c = _pad(c, dim)
        return cls.mixed(np.outer(c, c.conj()))

    @classmethod
    def mixed(cls, rho, dim=None):
        rho = np.asarray(rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValidationError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > 1e-10:
            raise ValidationError("density matrix must have unit trace")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise ValidationError("density matrix is not positive semidefinite")
        if dim is not None:
            if dim < rho.shape[0]:
                raise ValidationError("truncation smaller than state support")
            big = np.zeros((dim, dim), dtype=complex)
            big[: rho.shape[0], : rho.shape[0]] = rho
            rho = big
        rho = np.array(rho)
        rho.setflags(write=False)
        return cls(rho)

    @classmethod
    def number(cls, k, dim=None):
        c = np.zeros(k + 1)
        c[k] = 1.0
        return cls.pure(c, dim)

    @classmethod
    def from_dicke(cls, state: DickeCoefficients, dim=None):
        """``|N,k> -> |k>``; default truncation ``4 d + 20``."""
        dim = 4 * state.d + 20 if dim is None else dim
        return cls.mixed(state.rho, dim)

    def padded(self, dim):
        return FockState.mixed(self.rho, dim) if dim != self.dim else self

    def rotated(self, phi):
        """``R rho R^dagger`` with ``R = diag(exp(i n phi))``."""
        ph = np.exp(1j * phi * np.arange(self.dim))
        return FockState(self.rho * np.outer(ph, ph.conj()))


def _pad(c, dim):
    if dim < len(c):
        raise ValidationError("truncation smaller than state support")
    out = np.zeros(dim, dtype=complex)
    out[: len(c)] = c
    return out


# --- oscillator eigenfunctions -----------------------------------------------

def ho_wavefunctions(kmax, x):
    """``psi_k(x)`` for ``k = 0..kmax-1``, shape (kmax, len(x)).

    Three-term recurrence on the normalised functions, stable far beyond
    ``k = 200``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax,) + x.shape)
    if kmax == 0:
        return out
    out[0] = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if kmax > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for k in range(1, kmax - 1):
        out[k + 1] = np.sqrt(2.0 / (k + 1)) * x * out[k] - np.sqrt(k / (k + 1)) * out[k - 1]
    return out


def ho_wavefunction(k, x):
    """Normalised oscillator eigenfunction ``psi_k(x)``."""
    if k < 0:
        raise ValidationError("k must be non-negative")
    return ho_wavefunctions(k + 1, x)[k]


# --- Kraus operators (quadrature route) -------------------------------------

@dataclass(frozen=True)
class KrausMatrix:
    """``m[j, k] = <j|K(x)|k>`` on the truncated basis; ``residual`` is the
    quadrature error estimate."""

    x: float
    meas: LimitMeasurement
    m: np.ndarray
    residual: float = 0.0


def _kraus0(beta, x, D, cols=None, tol=KRAUS_TOL):
    """Unrotated Kraus matrix by composite Gauss-Legendre quadrature.

    Rows ``0..D-1`` and columns ``0..cols-1`` (default ``D``). The integrand
    is confined to ``|x'| < sqrt(2D+1) + 8`` by the oscillator functions and
    to ``|x' - x| < 10 beta`` by the Gaussian.
    """
    cols = D if cols is None else cols
    R = np.sqrt(2 * D + 1) + 8.0
    lo, hi = max(-R, x - 10 * beta), min(R, x + 10 * beta)
    if hi <= lo:
        return np.zeros((D, cols)), 0.0
    norm = (np.pi * beta**2) ** -0.25

    def fn(xp):
        psi = ho_wavefunctions(D, xp)
        g = norm * np.exp(-((x - xp) ** 2) / (2 * beta**2))
        # stack (D*cols, nodes) so the integrator contracts the trailing axis
        return (psi[:, None, :] * (psi[None, :cols, :] * g)).reshape(D * cols, -1)

    width = min(beta, 1.0)
    val, err = integrate_converged(fn, lo, hi, width, tol, order=20, breakpoints=(x,))
    return val.reshape(D, cols), err


def _kraus0_columns(beta, x, cols, tol=1e-14, max_rows=2048):
    """Columns ``K_0(x)|k>``, ``k < cols``, with enough rows that the weight
    beyond the last row is negligible.

    The row count doubles until the top quarter carries less than ``tol``;
    narrow Gaussians (small ``beta``) excite high number states.
    """
    D = cols + 20
    while True:
        m, err = _kraus0(beta, x, D, cols)
        top = float(np.sum(m[D - D // 4:] ** 2))
        if top < tol:
            return m, err
        if 2 * D > max_rows:
            raise NumericalError("Kraus columns need too many rows", top_weight=top, rows=D)
        D *= 2


def limit_kraus(meas: LimitMeasurement, x: float, D: int) -> KrausMatrix:
    """Number-basis matrix of the limit Kraus operator at outcome ``x``.

    Raises
    ------
    NumericalError
        If the quadrature does not reach an absolute accuracy of 1e-13.
    """
    if D < 1:
        raise ValidationError("D must be at least 1")
    m0, err = _kraus0(meas.beta, float(x), int(D))
    n = np.arange(D)
    m = np.exp(1j * meas.phi * (n[None, :] - n[:, None])) * m0
    return KrausMatrix(float(x), meas, m, err)


def povm_completeness(meas: LimitMeasurement, D: int, xs=None):
    """Deviation of ``sum_x K^dagger K dx`` from the identity on the lower half
    of the basis (the upper half is affected by truncation).

    Returns the max-abs deviation on the protected ``D//2`` block.
    """
    if xs is None:
        L = np.sqrt(2 * D + 1) + 8 + 10 * meas.beta
        xs, ws = uniform_panels(-L, L, min(meas.beta, 1.0), order=20)
    else:
        xs = np.asarray(xs, dtype=float)
        ws = np.full(xs.shape, xs[1] - xs[0])
    acc = np.zeros((D, D), dtype=complex)
    for x, w in zip(xs, ws):
        K = limit_kraus(meas, x, D).m
        acc += w * (K.conj().T @ K)
    h = D // 2
    return float(np.max(np.abs(acc[:h, :h] - np.eye(h))))


# --- closed-form POVM and densities -----------------------------------------

def _hermite_weights(D):
    """coef[k, l, m] = sqrt(k! l! n!) / (m! (k-m)! (l-m)!), n = k + l - 2m."""
    k = np.arange(D)[:, None, None]
    l = np.arange(D)[None, :, None]
    m = np.arange(D)[None, None, :]
    ok = (m <= k) & (m <= l)
    mm = np.where(ok, m, 0)
    n = k + l - 2 * mm
    lc = 0.5 * (gammaln(k + 1) + gammaln(l + 1) + gammaln(n + 1)) - (
        gammaln(mm + 1) + gammaln(k - mm + 1) + gammaln(l - mm + 1))
    return np.where(ok, np.exp(lc), 0.0), n


def povm_matrix0(beta, xs, D):
    """Unrotated POVM elements ``E_0(x) = K_0(x)^2`` in closed form.

    Smearing ``psi_k psi_l`` with the normalised Gaussian of variance
    ``beta^2/2`` gives a finite sum of Hermite functions of ``x/alpha`` with
    ``alpha^2 = 1 + beta^2``. Returns shape (len(xs), D, D).
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    alpha = np.sqrt(1.0 + beta**2)
    u = xs / alpha
    # H_n(u) e^{-u^2} / (sqrt(2)^n n!) = psi_n(u) e^{-u^2/2} pi^{1/4} / sqrt(n!)
    psi = ho_wavefunctions(2 * D - 1, u) * np.exp(-0.5 * u * u)  # (2D-1, nx)
    coef, n = _hermite_weights(D)
    pref = np.pi**0.25 / np.sqrt(np.pi * alpha**2)
    scale = alpha ** (-n) * coef * pref  # (D, D, D)
    basis = psi[n]  # (D, D, D, nx)
    return np.einsum("klm,klmx->xkl", scale, basis)


def povm_matrix(meas: LimitMeasurement, xs, D):
    """``E(x) = K(x)^dagger K(x)`` for each ``x``, shape (len(xs), D, D)."""
    E0 = povm_matrix0(meas.beta, xs, D)
    n = np.arange(D)
    return np.exp(1j * meas.phi * (n[None, :] - n[:, None])) * E0


def _grid(grid):
    if grid is None:
        grid = GridSpec()
    if isinstance(grid, GridSpec):
        return grid.xs
    return np.asarray(grid, dtype=float)


def single_meas_density(state: FockState, meas: LimitMeasurement, grid=None,
                        norm_tol=1e-6) -> DensityGrid:
    """Outcome density ``tr[K rho K^dagger]`` from the closed Hermite sum.

    The state is first rotated, ``rho -> R rho R^dagger``, after which only the
    real symmetric unrotated POVM enters.
    """
    xs = _grid(grid)
    rt = state.rotated(meas.phi).rho
    E0 = povm_matrix0(meas.beta, xs, state.dim)
    vals = np.einsum("kl,xkl->x", rt, E0).real
    return _finalize(xs, vals, {"method": "hermite-closed-form", "beta": meas.beta,
                                "phi": meas.phi}, norm_tol)


def kraus_route_density(state: FockState, meas: LimitMeasurement, grid=None,
                        norm_tol=1e-6) -> DensityGrid:
    """Same density as :func:`single_meas_density`, via quadrature Kraus
    matrices, ``tr[K rho K^dagger]`` evaluated point by point.

    Only the columns of ``K`` on the support of ``rho`` are needed; their row
    range grows until the output state is captured to 1e-14.
    """
    xs = _grid(grid)
    d = state.dim
    n = np.arange(d)
    rho = state.rho
    vals = np.empty(xs.shape)
    for i, x in enumerate(xs):
        m0, _ = _kraus0_columns(meas.beta, float(x), d)
        D = m0.shape[0]
        j = np.arange(D)
        K = np.exp(1j * meas.phi * (n[None, :] - j[:, None])) * m0
        vals[i] = np.einsum("jk,kl,jl->", K, rho, K.conj()).real
    return _finalize(xs, vals, {"method": "kraus-quadrature", "beta": meas.beta,
                                "phi": meas.phi}, norm_tol)


def limit_density_from_dicke(state: DickeCoefficients, meas: LimitMeasurement, grid=None):
    """Limit density predicted for a finite-N Dicke state (``|N,k> -> |k>``)."""
    return single_meas_density(FockState.mixed(state.rho), meas, grid)


# --- sequential measurements -------------------------------------------------

@dataclass(frozen=True)
class SequentialValue:
    density: float
    leak: float


def sequential_density(state: FockState, settings, xs, D=None, full=False):
    """Joint density of ``n`` consecutive limit measurements.

    ``tr[K_n ... K_1 rho K_1^dagger ... K_n^dagger]`` on the truncated basis.
    After each step the weight on the top quarter of the basis is recorded;
    its maximum is the truncation estimate.

    Raises
    ------
    NumericalError
        If that estimate exceeds 1e-6 (increase ``D``).
    """
    settings = list(settings)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if len(settings) != len(xs) or not settings:
        raise ValidationError("need one outcome per measurement setting")
    D = D or 4 * state.dim + 20
    rho = state.padded(D).rho
    q = D - D // 4
    leak = float(np.trace(rho[q:, q:]).real)
    for meas, x in zip(settings, xs):
        K = limit_kraus(meas, x, D).m
        rho = K @ rho @ K.conj().T
        leak = max(leak, float(np.trace(rho[q:, q:]).real))
    if leak > LEAK_TOL:
        raise NumericalError("truncation leak too large; increase D", leak=leak, D=D)
    val = float(np.trace(rho).real)
    return SequentialValue(val, leak) if full else val


def sequential_density_resolved(state: FockState, settings, xs, D=None):
    """Two-route variant: chained Kraus products for all but the last step,
    then the closed-form POVM inserted through a truncated resolution of the
    identity ``sum_m |m><m|``."""
    settings = list(settings)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    D = D or 4 * state.dim + 20
    rho = state.padded(D).rho
    for meas, x in zip(settings[:-1], xs[:-1]):
        K = limit_kraus(meas, x, D).m
        rho = K @ rho @ K.conj().T
    E = povm_matrix(settings[-1], [xs[-1]], D)[0]
    return float(np.einsum("kl,lk->", rho, E).real)


# --- Laguerre polynomials and the f = g lemma --------------------------------

def laguerre_poly(n, m, x):
    """Associated Laguerre polynomial ``L_n^m(x)``.

    The three-term recurrence is used for real arguments, the defining sum
    ``sum_q C(n+m, n-q) (-x)^q / q!`` otherwise. ``L_n^m = 0`` for ``n < 0``.
    """
    if n < 0:
        return 0.0
    xa = np.asarray(x)
    if np.iscomplexobj(xa):
        q = np.arange(n + 1)
        lc = gammaln(n + m + 1) - gammaln(n - q + 1) - gammaln(m + q + 1) - gammaln(q + 1)
        terms = np.exp(lc) * (-xa[..., None]) ** q
        out = terms.sum(axis=-1)
        return complex(out) if xa.ndim == 0 else out
    xa = xa.astype(float)
    prev = np.zeros_like(xa)
    cur = np.ones_like(xa)
    for k in range(n):
        prev, cur = cur, ((2 * k + 1 + m - xa) * cur - (k + m) * prev) / (k + 1)
    return float(cur) if xa.ndim == 0 else cur


def laguerre_direct(n, m, x):
    """Defining finite sum, kept separate as an oracle for the recurrence."""
    if n < 0:
        return 0.0
    return sum(_binom(n + m, n - q) * (-x) ** q / factorial(q) for q in range(n + 1))


def _binom(a, b):
    if b < 0 or b > a:
        return 0
    return factorial(a) // (factorial(b) * factorial(a - b))


def lemma_f(k, l, a, b, ap, bp):
    """Closed-form side of the f = g lemma,

    ``exp(a b') (a+a')^{l-min} (b+b')^{k-min} / max! L_min^{|k-l|}(-(a+a')(b+b'))``
    with ``min = min(k, l)``, ``max = max(k, l)``.
    """
    lo, hi = min(k, l), max(k, l)
    s, t = a + ap, b + bp
    return complex(np.exp(a * bp) * s ** (l - lo) * t ** (k - lo) / factorial(hi)
                   * laguerre_poly(lo, hi - lo, complex(-s * t)))


def _g_factor(k, j, z):
    """``z^{-min(k,j)} / max(k,j)! L_min^{|k-j|}(-z)`` for ``z != 0``."""
    lo, hi = min(k, j), max(k, j)
    return z ** (-lo) / factorial(hi) * laguerre_poly(lo, hi - lo, complex(-z))


@dataclass(frozen=True)
class SeriesValue:
    value: complex
    terms: int
    tail: float


def lemma_g(k, l, a, b, ap, bp, J=None, tol=1e-12, full=False):
    """Series side of the f = g lemma,

    ``(a')^l b^k sum_j j! (a b')^j (ab)^{-min(k,j)}/max(k,j)! L(-ab)
    (a'b')^{-min(l,j)}/max(l,j)! L(-a'b')``.

    Without ``J`` the series is summed until a term drops below
    1e-16 of the partial sum (at most 500 terms). The tail estimate is the
    magnitude of the last included term, which dominates the remainder once
    the factorial decay has set in.

    Raises
    ------
    NumericalError
        If a fixed ``J`` leaves a tail estimate above ``tol`` relative to the sum.
    """
    a, b, ap, bp = (complex(v) for v in (a, b, ap, bp))
    if a * b == 0 or ap * bp == 0:
        return _lemma_g_expanded(k, l, a, b, ap, bp, J, tol, full)
    ab, apbp, abp = a * b, ap * bp, a * bp
    pre = ap**l * b**k
    total = 0j
    cap = 500 if J is None else J
    last = np.inf
    for j in range(cap + 1):
        term = (np.exp(gammaln(j + 1)) * abp**j * _g_factor(k, j, ab) * _g_factor(l, j, apbp))
        total += term
        last = abs(term)
        if J is None and j > max(k, l) and last <= 1e-16 * abs(total):
            break
    tail = abs(pre) * last
    val = pre * total
    if tail > tol * max(1.0, abs(val)):
        raise NumericalError("g-series not converged; increase J", tail=tail, J=cap)
    return SeriesValue(val, j + 1, tail) if full else val


def _lemma_g_expanded(k, l, a, b, ap, bp, J, tol, full):
    # Same series with the negative powers cleared analytically:
    # sum_j j! sum_s a^{j-s} b^{k-s} / (s!(k-s)!(j-s)!) sum_t (a')^{l-t} (b')^{j-t} / (t!(l-t)!(j-t)!)
    cap = 500 if J is None else J
    total = 0j
    last = np.inf
    for j in range(cap + 1):
        s1 = sum(a ** (j - s) * b ** (k - s) / (factorial(s) * factorial(k - s) * factorial(j - s))
                 for s in range(min(k, j) + 1))
        s2 = sum(ap ** (l - t) * bp ** (j - t) / (factorial(t) * factorial(l - t) * factorial(j - t))
                 for t in range(min(l, j) + 1))
        term = factorial(j) * s1 * s2
        total += term
        last = abs(term)
        if J is None and j > max(k, l) and last <= 1e-16 * abs(total):
            break
    if last > tol * max(1.0, abs(total)):
        raise NumericalError("g-series not converged; increase J", tail=last, J=cap)
    return SeriesValue(total, j + 1, last) if full else total


# --- Hermite product lemma ---------------------------------------------------

def _hermite_lemma_lhs(alpha, gamma, k, l, x):
    x = np.asarray(x, dtype=float)
    u = x / alpha
    out = np.zeros_like(x)
    for m in range(min(k, l) + 1):
        n = k + l - 2 * m
        # H_n(u) e^{-u^2}/(sqrt2^n n!) via oscillator functions for stability
        hn = ho_wavefunction(n, u) * np.exp(-0.5 * u * u) * np.pi**0.25 / np.sqrt(factorial(n))
        out += _binom(n, l - m) / factorial(m) * (gamma / alpha) ** n * hn
    return out / np.sqrt(np.pi * alpha**2)


def _hermite_lemma_rhs(beta, gamma, k, l, x, tol):
    x = np.asarray(x, dtype=float)
    norm_k = np.sqrt(2.0**k) * factorial(k)
    norm_l = np.sqrt(2.0**l) * factorial(l)
    # |x'| beyond gamma*(sqrt(2(k+l)+1) + 9) is negligible for the Hermite factor
    R = gamma * (np.sqrt(2 * (k + l) + 1) + 9.0)

    def fn(xp):
        v = xp / gamma
        inner = (np.exp(-v * v) / np.sqrt(np.pi * gamma**2)
                 * eval_hermite(k, v) * eval_hermite(l, v) / (norm_k * norm_l))
        g = np.exp(-((x[:, None] - xp[None, :]) ** 2) / beta**2) / np.sqrt(np.pi * beta**2)
        return g * inner

    width = min(beta, gamma, 1.0) / 2
    val, err = integrate_converged(fn, -R, R, width, tol, order=20)
    return val, err


def hermite_product_lemma_check(alpha, beta, gamma, k, l, xs, tol=1e-12):
    """Max residual of the Hermite convolution identity on ``xs``.

    Left side: single Hermite sum in ``x/alpha``. Right side: Gaussian of
    variance ``beta^2/2`` convolved with ``H_k H_l`` weighted by a Gaussian of
    variance ``gamma^2/2``, by adaptive quadrature. Requires
    ``alpha^2 = beta^2 + gamma^2`` and ``k >= l >= 0``.
    """
    if abs(alpha**2 - beta**2 - gamma**2) > 1e-12 * max(1.0, alpha**2):
        raise ValidationError("need alpha^2 = beta^2 + gamma^2")
    if not k >= l >= 0:
        raise ValidationError("need k >= l >= 0")
    lhs = _hermite_lemma_lhs(alpha, gamma, k, l, xs)
    rhs, _ = _hermite_lemma_rhs(beta, gamma, k, l, xs, tol)
    return float(np.max(np.abs(lhs - rhs)))


def identity_report(identity, parameters, residual, tolerance):
    """Record in the form written by the identities experiment."""
    return {"identity": identity, "parameters": parameters, "residual": float(residual),
            "tolerance": float(tolerance), "pass": bool(residual < tolerance)}
