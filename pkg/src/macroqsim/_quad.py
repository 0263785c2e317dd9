"""Composite Gauss-Legendre rules used throughout the package."""

from functools import lru_cache

import numpy as np

from .errors import NumericalError


@lru_cache(maxsize=32)
def _legendre(order):
    t, w = np.polynomial.legendre.leggauss(order)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def panel_nodes(edges, order=16):
    """Nodes and weights of a composite Gauss-Legendre rule.

    ``edges`` is an increasing sequence of panel boundaries.
    """
    edges = np.asarray(edges, dtype=float)
    t, w = _legendre(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def uniform_panels(a, b, width, order=16, breakpoints=()):
    """Composite rule on [a, b] with panels no wider than ``width``.

    Any ``breakpoints`` inside (a, b) become panel edges, which keeps kinks
    and steep fronts off the interior of a panel.
    """
    cuts = sorted({a, b, *(float(c) for c in breakpoints if a < c < b)})
    edges = [cuts[0]]
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(np.ceil((hi - lo) / width)))
        edges.extend(np.linspace(lo, hi, n + 1)[1:])
    return panel_nodes(np.asarray(edges), order)


def integrate_converged(fn, a, b, width, tol, order=16, breakpoints=(), max_halvings=6):
    """Integrate ``fn`` (vectorised over nodes, trailing axis) to absolute ``tol``.

    The panel width is halved until two successive rules agree. Returns the
    finer estimate and the observed difference, which serves as the error
    bound reported to callers.
    """
    nodes, weights = uniform_panels(a, b, width, order, breakpoints)
    prev = fn(nodes) @ weights
    for _ in range(max_halvings):
        width = width / 2
        nodes, weights = uniform_panels(a, b, width, order, breakpoints)
        cur = fn(nodes) @ weights
        err = float(np.max(np.abs(cur - prev)))
        if err <= tol:
            return cur, err
        prev = cur
    raise NumericalError("quadrature did not converge", residual=err, tolerance=tol)
