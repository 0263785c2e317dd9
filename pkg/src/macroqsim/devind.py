"""Bell and Leggett-Garg CHSH tests in the limit theory.

Both tests bin each continuous outcome by its sign. For the Leggett-Garg
experiment two limit measurements act in sequence on one oscillator. The
correlator of the two signs then depends only on the relative quadrature
angle and on the pointer width ``sigma``, and is an integral of the Wigner
function against two error functions. For the Bell experiment each half of a
Schmidt-diagonal state ``sum_k c_k |k>|k>`` is measured once.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import factorial, gamma as gamma_fn

import numpy as np
from scipy.optimize import minimize
from scipy.integrate import trapezoid
from scipy.special import erf

from ._quad import integrate_converged, uniform_panels
from .errors import NumericalError, ValidationError
from .limit_theory import FockState, laguerre_poly, ho_wavefunctions, povm_matrix
from .qubit_algebra import LimitMeasurement

TSIRELSON = 2 * np.sqrt(2)


# --- Wigner function -------------------------------------------------------

@dataclass
class WignerGrid:
    xs: np.ndarray
    ps: np.ndarray
    values: np.ndarray  # values[i, j] = W(xs[i], ps[j])

    def integral(self):
        return float(trapezoid(trapezoid(self.values, self.ps, axis=1), self.xs))


def _wigner_complex(rho, x, p):
    x, p = np.broadcast_arrays(np.asarray(x, float), np.asarray(p, float))
    r2 = 2 * (x * x + p * p)
    out = np.zeros(x.shape, dtype=complex)
    D = rho.shape[0]
    # the Laguerre sum is written for rho = sum c_kl |l><k|, i.e. c_kl = rho[l, k]
    for k in range(D):
        for l in range(D):
            c = rho[l, k]
            if c == 0:
                continue
            if k >= l:
                pref = (-1) ** l * np.sqrt(2.0 ** k * factorial(l) / (2.0 ** l * factorial(k)))
                out += c * pref * (x + 1j * p) ** (k - l) * laguerre_poly(l, k - l, r2)
            else:
                pref = (-1) ** l * np.sqrt(2.0 ** l * factorial(k) / (2.0 ** k * factorial(l)))
                out += c * pref * (-x + 1j * p) ** (l - k) * laguerre_poly(k, l - k, r2)
    return out * np.exp(-x * x - p * p) / np.pi


def wigner_fock(state: FockState, x, p):
    """Wigner function from the Laguerre closed form in the number basis.

    Raises
    ------
    NumericalError
        If the imaginary part exceeds 1e-10 (non-Hermitian input).
    """
    w = _wigner_complex(state.rho, x, p)
    if np.max(np.abs(w.imag), initial=0.0) > 1e-10:
        raise NumericalError("Wigner function not real", max_imag=float(np.max(np.abs(w.imag))))
    return w.real if np.ndim(w) else float(w.real)


def wigner_grid(state: FockState, xs, ps) -> WignerGrid:
    X, P = np.meshgrid(xs, ps, indexing="ij")
    return WignerGrid(np.asarray(xs), np.asarray(ps), wigner_fock(state, X, P))


# --- Leggett-Garg correlator ------------------------------------------------

def _lg_kernel_width(phi, sigma):
    return np.sqrt((sigma**4 + np.sin(phi) ** 2) / sigma**2)


def _lg_correlator_quadrature(state: FockState, phi, sigma, tol=1e-10):
    """Two-dimensional Gauss-Legendre quadrature of the Wigner-erf double integral."""
    s = _lg_kernel_width(phi, sigma)
    c, sn = np.cos(phi), np.sin(phi)
    D = state.dim
    L = np.sqrt(2 * D + 1) + 7.0
    rho = state.rho

    def inner(xv):
        # returns, for each x node, the p-integral; vectorised over p nodes
        def f(pv):
            X, P = np.meshgrid(xv, pv, indexing="ij")
            w = _wigner_complex(rho, X, P).real
            return (w * erf((X * c + P * sn) / s)).T  # (np, nx) -> integrate over p
        # panels finer than the width of the erf front in p
        width = min(0.5, s / max(abs(sn), 1e-300) / 2)
        ps, wp = uniform_panels(-L, L, width, order=20)
        return wp @ f(ps)

    def fx(xv):
        return inner(xv) * erf(xv / sigma)

    width = min(0.5, sigma / 2, s / max(abs(c), 1e-300) / 2)
    val, err = integrate_converged(fx, -L, L, width, tol, order=20, breakpoints=(0.0,))
    return float(val), err


# Closed form for polynomial-times-Gaussian Wigner functions ---------------

def _wigner_poly(rho):
    """Coefficients q[m, n] with pi W = exp(-x^2-p^2) sum q[m,n] x^m p^n."""
    D = rho.shape[0]
    deg = 2 * (D - 1)
    q = np.zeros((deg + 1, deg + 1), dtype=complex)

    binom = _comb

    def lag_poly(n, m):
        # L_n^m(2x^2 + 2p^2) as coefficient array
        out = np.zeros((deg + 1, deg + 1))
        for qq in range(n + 1):
            cq = binom(n + m, n - qq) * (-2.0) ** qq / factorial(qq)
            for i in range(qq + 1):
                out[2 * i, 2 * (qq - i)] += cq * binom(qq, i)
        return out

    def lin_pow(sx, j):
        # (sx*x + i p)^j
        out = np.zeros((deg + 1, deg + 1), dtype=complex)
        for i in range(j + 1):
            out[i, j - i] += binom(j, i) * sx**i * (1j) ** (j - i)
        return out

    def mul(a, b):
        out = np.zeros((deg + 1, deg + 1), dtype=complex)
        for (i, j) in zip(*np.nonzero(a)):
            for (k, l) in zip(*np.nonzero(b)):
                if i + k <= deg and j + l <= deg:
                    out[i + k, j + l] += a[i, j] * b[k, l]
        return out

    for k in range(D):
        for l in range(D):
            c = rho[l, k]
            if c == 0:
                continue
            if k >= l:
                pref = (-1) ** l * np.sqrt(2.0 ** k * factorial(l) / (2.0 ** l * factorial(k)))
                q += c * pref * mul(lin_pow(1.0, k - l), lag_poly(l, k - l))
            else:
                pref = (-1) ** l * np.sqrt(2.0 ** l * factorial(k) / (2.0 ** k * factorial(l)))
                q += c * pref * mul(lin_pow(-1.0, l - k), lag_poly(k, l - k))
    return q.real


def _inner_coeffs(nmax, a):
    """Decompose F_n(B) = int p^n e^{-p^2} erf(a p + B) dp as
    e_n erf(B/sqrt(A)) + exp(-B^2/A) sum_r beta[n, r] B^r, with A = 1 + a^2."""
    A = 1.0 + a * a
    e = np.zeros(nmax + 1)
    beta = np.zeros((nmax + 1, nmax + 1))
    e[0] = np.sqrt(np.pi)

    def M(i):
        return gamma_fn((i + 1) / 2) / A ** ((i + 1) / 2) if i % 2 == 0 else 0.0

    def G_poly(j):
        # int p^j exp(-p^2 - (a p + B)^2) dp = exp(-B^2/A) sum_r g[r] B^r
        g = np.zeros(nmax + 1)
        for i in range(j + 1):
            r = j - i
            g[r] += _comb(j, i) * (-a / A) ** r * M(i)
        return g

    for n in range(1, nmax + 1):
        if n >= 2:
            e[n] = (n - 1) / 2 * e[n - 2]
            beta[n] = (n - 1) / 2 * beta[n - 2]
        beta[n] += a / np.sqrt(np.pi) * G_poly(n - 1)
    return e, beta


def _comb(a, b):
    return factorial(a) // (factorial(b) * factorial(a - b))


def _K_odd(j, A, C):
    """int x^j e^{-A x^2} erf(C x) dx for odd j (zero for even j)."""
    if j % 2 == 0:
        return 0.0
    val = C / (A * np.sqrt(A + C * C))
    for i in range(1, (j - 1) // 2 + 1):
        val = i / A * val + C / (A * np.sqrt(np.pi)) * gamma_fn(i + 0.5) / (A + C * C) ** (i + 0.5)
    return val


def _J_even(j, A, B, C):
    """int x^j e^{-A x^2} erf(B x) erf(C x) dx for even j (zero for odd j)."""
    if j % 2 == 1:
        return 0.0
    val = 2 / np.sqrt(np.pi * A) * np.arctan(B * C / np.sqrt(A * A + A * (B * B + C * C)))
    for jj in range(1, j // 2 + 1):
        val = ((2 * jj - 1) / (2 * A) * val
               + B / (A * np.sqrt(np.pi)) * _K_odd(2 * jj - 1, A + B * B, C)
               + C / (A * np.sqrt(np.pi)) * _K_odd(2 * jj - 1, A + C * C, B))
    return val


def _lg_correlator_closed(state: FockState, phi, sigma):
    """Exact evaluation through Gaussian-erf moment identities."""
    s = _lg_kernel_width(phi, sigma)
    a, b = np.sin(phi) / s, np.cos(phi) / s
    A = 1.0 + a * a
    q = _wigner_poly(state.rho)
    deg = q.shape[0] - 1
    e, beta = _inner_coeffs(deg, a)
    kappa = b / np.sqrt(A)
    total = 0.0
    for m in range(deg + 1):
        for n in range(deg + 1):
            if q[m, n] == 0:
                continue
            t = e[n] * _J_even(m, 1.0, 1.0 / sigma, kappa)
            for r in range(deg + 1):
                if beta[n, r] != 0:
                    t += beta[n, r] * b**r * _K_odd(m + r, 1.0 + b * b / A, 1.0 / sigma)
            total += q[m, n] * t
    return total / np.pi


def lg_correlator(state: FockState, phi, sigma, route="closed", tol=1e-10):
    """Correlation ``<sgn(x1) sgn(x2)>`` of two consecutive sign-binned limit
    measurements whose quadratures differ by ``phi``.

    Parameters
    ----------
    route : {'closed', 'quadrature'}
        ``closed`` integrates the polynomial-Gaussian Wigner function against
        the error functions exactly through moment recursions; ``quadrature``
        evaluates the double integral numerically (error below ``tol``).
    """
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    if route == "closed":
        if state.dim > 12:
            raise ValidationError("closed route supports dim <= 12")
        return float(_lg_correlator_closed(state, phi, sigma))
    if route == "quadrature":
        val, err = _lg_correlator_quadrature(state, phi, sigma, tol)
        if err > 1e-6:
            raise NumericalError("correlator quadrature residual too large", residual=err)
        return val
    raise ValidationError(f"unknown route {route!r}")


@dataclass
class CHSHResult:
    """Outcome of a CHSH evaluation; ``value = c1 + c2 + c3 - c4``."""

    value: float
    settings: tuple
    state: FockState
    kind: str
    correlators: tuple
    sigma: float | None = None
    beta: float | None = None
    error_bound: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        c = self.correlators
        if abs(self.value - (c[0] + c[1] + c[2] - c[3])) > 1e-12:
            raise ValidationError("CHSH value inconsistent with correlators")
        if max(abs(x) for x in c) > 1 + 1e-9:
            raise NumericalError("correlator outside [-1, 1]", correlators=list(c))

    def to_record(self):
        rho = self.state.rho
        rec = {"kind": self.kind, "value": self.value, "settings": list(self.settings),
               "correlators": list(self.correlators),
               "state": {"re": rho.real.tolist(), "im": rho.imag.tolist()},
               "sigma": self.sigma, "beta": self.beta, "error_bound": self.error_bound}
        rec.update(self.extra)
        return rec


def _chsh_pairs(angles):
    a1, a2, b1, b2 = angles
    return ((a1, b1), (a1, b2), (a2, b1), (a2, b2))


def lg_chsh(state: FockState, angles, sigma, route="closed") -> CHSHResult:
    """CHSH combination of four Leggett-Garg correlators at angle differences
    ``A1-B1, A1-B2, A2-B1, A2-B2``."""
    angles = tuple(float(a) for a in angles)
    if len(angles) != 4:
        raise ValidationError("need four angles")
    cs = tuple(lg_correlator(state, a - b, sigma, route) for a, b in _chsh_pairs(angles))
    err = 0.0 if route == "closed" else 4e-10
    return CHSHResult(cs[0] + cs[1] + cs[2] - cs[3], angles, state, "leggett-garg", cs,
                      sigma=float(sigma), error_bound=err)


def lg_reference_value():
    """``(2/(675 pi)) (577 + sqrt(1244179) + 2700 arctan(1/3))``."""
    return 2.0 / (675.0 * np.pi) * (577.0 + np.sqrt(1244179.0) + 2700.0 * np.arctan(1.0 / 3.0))


def lg_reference_state():
    """Optimal superposition of ``|0>`` and ``|2>`` attaining :func:`lg_reference_value` at sigma = 1."""
    r = 577.0 / (2.0 * np.sqrt(1244179.0))
    return FockState.pure([np.sqrt(0.5 - r), 0.0, np.sqrt(0.5 + r)])


LG_REFERENCE_ANGLES = (np.pi / 4, 3 * np.pi / 4, np.pi / 2, 0.0)


def lg_sigma_scan(state, angles, lo=0.05, hi=2.0, n=40, xtol=1e-10):
    """Maximise the LG CHSH value over ``sigma``.

    ``n`` log-spaced points on ``[lo, hi]``, then golden-section refinement on
    the bracket around the best grid point. Returns ``(sigma*, C*, trace)``
    where ``trace`` lists every evaluated ``(sigma, C)``.
    """
    trace = []

    def f(s):
        v = lg_chsh(state, angles, s).value
        trace.append((float(s), float(v)))
        return v

    grid = np.geomspace(lo, hi, n)
    vals = [f(s) for s in grid]
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
    g = (np.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol * max(1.0, abs(a)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    best = max(trace, key=lambda t: t[1])
    return best[0], best[1], trace


# --- Bell experiment --------------------------------------------------------

def _schmidt(state_c):
    c = np.asarray(state_c, dtype=complex).ravel()
    if abs(np.linalg.norm(c) - 1) > 1e-10:
        raise ValidationError("Schmidt coefficients must have unit norm")
    return c


BELL_PAD = 20


def bell_joint_density(c, measA: LimitMeasurement, measB: LimitMeasurement, x, y):
    """``P(x, y) = <psi| E_A(x) (x) E_B(y) |psi>`` for ``psi = sum c_k |k>|k>``.

    Only the Schmidt block of each POVM enters, so no truncation occurs.
    Vectorised over ``x`` and ``y`` (outer product grid when both are arrays).
    """
    c = _schmidt(c)
    d = len(c)
    EA = povm_matrix(measA, np.atleast_1d(x), d)
    EB = povm_matrix(measB, np.atleast_1d(y), d)
    M = np.outer(c.conj(), c)
    P = np.einsum("kl,xkl,ykl->xy", M, EA, EB).real
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        return float(P[0, 0])
    return P


def _sign_operator0_quadrature(beta, d, tol=1e-14):
    """``S0 = int sgn(x) E_0(x) dx = erf(X / beta)`` restricted to ``d`` levels,
    by quadrature over the position variable. Returns (matrix, error)."""
    L = np.sqrt(2 * d + 1) + 8.0

    def fn(xp):
        psi = ho_wavefunctions(d, xp)
        return (psi[:, None, :] * psi[None, :, :] * erf(xp / beta)).reshape(d * d, -1)

    val, err = integrate_converged(fn, -L, L, min(beta, 1.0), tol, order=20,
                                   breakpoints=(0.0,))
    return val.reshape(d, d), err


def _sign_operator0_closed(beta, d):
    """Same matrix from ``psi_j psi_k = exp(-x^2) * poly(x)`` and the odd
    Gaussian-erf moments. Exact up to rounding; intended for ``d <= 10``."""
    if d > 10:
        raise ValidationError("closed sign operator supports d <= 10")
    polys = []
    for k in range(d):
        ck = np.zeros(k + 1)
        ck[k] = 1.0
        h = np.polynomial.hermite.herm2poly(ck)
        polys.append(h / np.sqrt(2.0**k * factorial(k) * np.sqrt(np.pi)))
    mom = [_K_odd(m, 1.0, 1.0 / beta) for m in range(2 * d)]
    S = np.zeros((d, d))
    for j in range(d):
        for k in range(d):
            r = np.polynomial.polynomial.polymul(polys[j], polys[k])
            S[j, k] = sum(r[m] * mom[m] for m in range(len(r)))
    return S, 0.0


def _sign_operator0(beta, d, route="closed"):
    if route == "closed":
        return _sign_operator0_closed(beta, d)
    if route == "quadrature":
        return _sign_operator0_quadrature(beta, d)
    raise ValidationError(f"unknown route {route!r}")


def bell_correlator(c, measA, measB, route="closed"):
    """``<sgn(x) sgn(y)>`` and its error bound (quadrature route only)."""
    c = _schmidt(c)
    d = len(c)
    SA0, ea = _sign_operator0(measA.beta, d, route)
    SB0, eb = (SA0, ea) if measB.beta == measA.beta else _sign_operator0(measB.beta, d, route)
    n = np.arange(d)
    rotA = np.exp(1j * measA.phi * (n[None, :] - n[:, None]))
    rotB = np.exp(1j * measB.phi * (n[None, :] - n[:, None]))
    M = np.outer(c.conj(), c)
    val = np.einsum("kl,kl,kl->", M, rotA * SA0, rotB * SB0).real
    # |d(SA*SB)| <= |dSA| + |dSB| elementwise since |S| <= 1
    err = float(np.sum(np.abs(M)) * (ea + eb))
    return float(val), err


def bell_marginal(c, measA: LimitMeasurement, xs):
    """Alice's marginal density, independent of Bob's setting."""
    c = _schmidt(c)
    EA = povm_matrix(measA, np.atleast_1d(xs), len(c))
    return np.einsum("k,xkk->x", np.abs(c) ** 2, EA).real


def bell_chsh(c, settings, beta, route="closed") -> CHSHResult:
    """CHSH value for sign-binned outcomes; ``settings = (A1, A2, B1, B2)``
    quadrature angles, all measurements of width ``beta``.

    ``route='quadrature'`` integrates the sign operator numerically and fills
    ``error_bound`` from the observed convergence of the rule.
    """
    c = _schmidt(c)
    settings = tuple(float(s) for s in settings)
    cs, errs = [], []
    for a, b in _chsh_pairs(settings):
        v, e = bell_correlator(c, LimitMeasurement(beta, a), LimitMeasurement(beta, b), route)
        cs.append(v)
        errs.append(e)
    return CHSHResult(cs[0] + cs[1] + cs[2] - cs[3], settings, FockState.pure(c), "bell",
                      tuple(cs), beta=float(beta), error_bound=float(sum(errs)))


def no_signalling_residual(c, beta, settings_a, settings_b, xs, ys):
    """Max deviation between Alice's marginal computed from the joint density
    for two different Bob settings (and vice versa)."""
    c = _schmidt(c)
    res = 0.0
    dy = ys[1] - ys[0]
    dx = xs[1] - xs[0]
    for a in settings_a:
        margs = [bell_joint_density(c, LimitMeasurement(beta, a), LimitMeasurement(beta, b),
                                    xs, ys).sum(axis=1) * dy for b in settings_b]
        for m in margs[1:]:
            res = max(res, float(np.max(np.abs(m - margs[0]))))
    for b in settings_b:
        margs = [bell_joint_density(c, LimitMeasurement(beta, a), LimitMeasurement(beta, b),
                                    xs, ys).sum(axis=0) * dx for a in settings_a]
        for m in margs[1:]:
            res = max(res, float(np.max(np.abs(m - margs[0]))))
    return res


# --- optimiser --------------------------------------------------------------

def _amplitudes(u):
    """Unit vector from hyperspherical angles (real amplitudes)."""
    d = len(u) + 1
    c = np.empty(d)
    s = 1.0
    for i, t in enumerate(u):
        c[i] = s * np.cos(t)
        s *= np.sin(t)
    c[-1] = s
    return c


BELL_BETA_RANGE = (0.02, 3.0)


@dataclass
class OptimizeOutcome:
    best: CHSHResult
    runs: list  # one CHSHResult per seed, in seed order
    trace: list  # (seed, iteration, value, params...)


def optimize_chsh(kind, d=3, seeds=tuple(range(16)), sigma=1.0, beta_range=BELL_BETA_RANGE,
                  threads=None, maxiter=4000):
    """Multi-start Nelder-Mead search for the largest CHSH value.

    Parameters
    ----------
    kind : {'leggett-garg', 'bell'}
    d : int, 1..3
        Number of oscillator levels carrying the (real) state amplitudes.
    seeds : sequence of int
        One start per seed; starts drawn from ``numpy.random.default_rng(seed)``.
    sigma : float
        Pointer width for the Leggett-Garg search (held fixed).
    beta_range : (float, float)
        Search interval for the Bell measurement width.
    threads : int, optional
        Worker threads. The reduction runs in seed order, so the result does
        not depend on this.
    """
    if kind not in ("leggett-garg", "bell"):
        raise ValidationError(f"unknown kind {kind!r}")
    if not 1 <= d <= 3:
        raise ValidationError("d must be 1, 2 or 3")
    nstate = d - 1
    lo_b, hi_b = np.log(beta_range[0]), np.log(beta_range[1])

    def unpack(v):
        ang = v[:4]
        c = _amplitudes(v[4:4 + nstate])
        if kind == "bell":
            lb = lo_b + (hi_b - lo_b) * (0.5 - 0.5 * np.cos(v[4 + nstate]))
            return ang, c, float(np.exp(lb))
        return ang, c, None

    def evaluate(v):
        ang, c, beta = unpack(v)
        if kind == "bell":
            return bell_chsh(c, ang, beta)
        return lg_chsh(FockState.pure(c), ang, sigma)

    def run(seed):
        rng = np.random.default_rng(seed)
        npar = 4 + nstate + (1 if kind == "bell" else 0)
        x0 = rng.uniform(0, 2 * np.pi, npar)
        hist = []

        def obj(v):
            val = evaluate(v).value
            hist.append(val)
            return -val

        res = minimize(obj, x0, method="Nelder-Mead",
                       options={"maxiter": maxiter, "maxfev": 2 * maxiter,
                                "xatol": 1e-9, "fatol": 1e-12, "adaptive": True})
        best = evaluate(res.x)
        ang, c, beta = unpack(res.x)
        best.extra.update({"seed": int(seed), "iterations": int(res.nit),
                           "amplitudes": c.tolist()})
        return best, hist

    seeds = [int(s) for s in seeds]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            outs = list(ex.map(run, seeds))
    else:
        outs = [run(s) for s in seeds]
    runs = [o[0] for o in outs]
    trace = []
    for s, (_, hist) in zip(seeds, outs):
        trace.extend((s, i, v) for i, v in enumerate(hist))
    best = runs[0]
    for r in runs[1:]:
        if r.value > best.value:
            best = r
    if kind == "bell":
        best = _certify_bell(best)
    return OptimizeOutcome(best, runs, trace)


def _certify_bell(res: CHSHResult) -> CHSHResult:
    """Re-evaluate a Bell optimum by quadrature. The error bound covers the
    quadrature's own estimate and its disagreement with the closed form."""
    c = np.asarray(res.extra["amplitudes"], dtype=float)
    q = bell_chsh(c, res.settings, res.beta, route="quadrature")
    bound = q.error_bound + abs(q.value - res.value)
    q.error_bound = float(bound)
    q.extra.update(res.extra)
    q.extra["closed_form_value"] = res.value
    return q


def lg_orbit_distance(angles, reference=LG_REFERENCE_ANGLES):
    """Smallest max-component circular distance between ``angles`` and any
    image of ``reference`` under the symmetries of the LG CHSH value.

    The orbit is generated by a common shift, global negation, swapping the
    two A angles while shifting B2 by pi, and swapping the two B angles while
    shifting A2 by pi; representatives are normalised so B2 = 0.
    """
    def norm(t):
        t = np.mod(np.asarray(t, float) - t[3], 2 * np.pi)
        return tuple(np.round(t, 12))

    def gens(t):
        a1, a2, b1, b2 = t
        yield (-a1, -a2, -b1, -b2)
        yield (a2, a1, b1, b2 + np.pi)
        yield (a1, a2 + np.pi, b2, b1)

    seen = {norm(reference)}
    frontier = list(seen)
    while frontier:
        nxt = []
        for t in frontier:
            for g in gens(t):
                n = norm(g)
                if n not in seen:
                    seen.add(n)
                    nxt.append(n)
        frontier = nxt
    target = np.mod(np.asarray(angles, float) - angles[3], 2 * np.pi)
    best = np.inf
    for t in seen:
        diff = np.abs(np.mod(target - np.asarray(t) + np.pi, 2 * np.pi) - np.pi)
        best = min(best, float(diff.max()))
    return best
