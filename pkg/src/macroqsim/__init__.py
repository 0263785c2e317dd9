"""Numerics for coarse-grained measurements on macroscopic qubit ensembles.

Modules
-------
qubit_algebra
    Single-qubit observables, local channels and limit parameters.
finite_n
    Exact finite-N outcome densities and a brute-force oracle.
limit_theory
    Oscillator-space limit: Kraus operators, closed-form densities,
    sequential measurements and special-function identities.
devind
    Bell and Leggett-Garg CHSH tests in the limit theory.
cli
    Batch front end.
"""

from .errors import DiagonalObservableError, NumericalError, ValidationError

__version__ = "0.1.0"

__all__ = ["DiagonalObservableError", "NumericalError", "ValidationError", "__version__"]
