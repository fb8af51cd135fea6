"""Shared helpers for building random test instances."""

import numpy as np

from soflqr import CostSpec, Plant, spectral_abscissa


def stable_plant(rng, n, m, q, margin=0.7):
    """Random plant whose open loop is Hurwitz with the given margin.

    The state matrix is shifted so its spectral abscissa is exactly
    ``-margin``, which makes the zero gain stabilizing and keeps the
    Lyapunov solves well conditioned.
    """
    A = rng.standard_normal((n, n))
    A = A - (spectral_abscissa(A) + margin) * np.eye(n)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((q, n))
    return Plant(A=A, B=B, C=C)


def identity_cost(n, m):
    """Unit state and input weights with identity initial-state moment."""
    return CostSpec(Q=np.eye(n), R=np.eye(m), X0=np.eye(n))


def random_spd(rng, n, floor=0.1):
    """Random symmetric positive definite matrix."""
    M = rng.standard_normal((n, n))
    return M @ M.T + floor * np.eye(n)
