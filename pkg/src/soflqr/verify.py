"""Independent verification oracles.

Everything here deliberately avoids the production solve paths: costs
are differenced numerically, Lyapunov equations are solved through the
dense Kronecker linear system, the optimal full-information gain comes
from a Riccati fixed-point iteration, and the cost integral is evaluated
by quadrature on matrix exponentials.  These routines back the test
suite and the CLI ``check-gradient`` / ``check-hessian`` commands.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import expm

from .first_order import gradient
from .lyapunov import NotHurwitzError, solve_lyapunov_primal, unvec, vec
from .problem import InfiniteCostError, closed_loop, cost, effective_weight

__all__ = [
    "OracleReport",
    "error_report",
    "fd_gradient",
    "fd_hessian",
    "kron_lyapunov",
    "are_gain",
    "quadrature_cost",
]


@dataclass(frozen=True)
class OracleReport:
    """Worst-case agreement between a candidate and a reference array.

    ``max_rel_error`` is the largest absolute error normalized by the
    largest reference magnitude, so near-zero entries are compared on
    the scale of the reference rather than against themselves.
    """

    max_abs_error: float
    max_rel_error: float
    location: tuple


def error_report(reference, candidate):
    """Compare ``candidate`` against ``reference`` entry by entry."""
    reference = np.asarray(reference, dtype=float)
    candidate = np.asarray(candidate, dtype=float)
    if reference.shape != candidate.shape:
        raise ValueError(
            f"shape mismatch: reference {reference.shape} vs candidate "
            f"{candidate.shape}"
        )
    err = np.abs(candidate - reference)
    location = np.unravel_index(int(np.argmax(err)), err.shape)
    max_abs = float(err[location])
    scale = float(np.abs(reference).max()) if reference.size else 0.0
    max_rel = max_abs / max(scale, np.finfo(float).tiny)
    return OracleReport(max_abs_error=max_abs, max_rel_error=max_rel,
                        location=location)


def _central_difference(evaluate, h):
    # Shrink the step once if a perturbation destabilizes the loop, then
    # give up; the base point is too close to the stability boundary.
    try:
        return evaluate(h)
    except (InfiniteCostError, NotHurwitzError):
        return evaluate(h / 10.0)


def fd_gradient(plant, costspec, K, h=1e-5):
    """Central-difference gradient of the cost at ``K``.

    Perturbs one gain entry at a time by ``+-h``.  If a perturbation
    destabilizes the closed loop the step is shrunk once by a factor of
    ten for that entry; a second failure propagates.
    """
    if h <= 0.0:
        raise ValueError(f"step size h must be positive, got {h}")
    K = np.asarray(K, dtype=float)
    m, q = K.shape
    out = np.empty((m, q))
    for i in range(m):
        for j in range(q):
            E = np.zeros((m, q))
            E[i, j] = 1.0

            def difference(step, E=E):
                upper = cost(plant, costspec, K + step * E)
                lower = cost(plant, costspec, K - step * E)
                return (upper - lower) / (2.0 * step)

            out[i, j] = _central_difference(difference, h)
    return out


def fd_hessian(plant, costspec, K, h=1e-4):
    """Central differences of the analytic gradient, symmetrized.

    Column ``(i, j)`` is ``vec((grad(K + h E_ij) - grad(K - h E_ij)) /
    (2 h))`` in the column-major entry ordering, matching the layout of
    the analytic Hessian.
    """
    if h <= 0.0:
        raise ValueError(f"step size h must be positive, got {h}")
    K = np.asarray(K, dtype=float)
    m, q = K.shape
    H = np.empty((m * q, m * q))
    col = 0
    for j in range(q):
        for i in range(m):
            E = np.zeros((m, q))
            E[i, j] = 1.0

            def difference(step, E=E):
                upper = gradient(plant, costspec, K + step * E).grad
                lower = gradient(plant, costspec, K - step * E).grad
                return (upper - lower) / (2.0 * step)

            H[:, col] = vec(_central_difference(difference, h))
            col += 1
    return 0.5 * (H + H.T)


def kron_lyapunov(Ac, Qc, max_order=8):
    """Lyapunov solve through the dense Kronecker linear system.

    Solves ``(I (x) Ac^T + Ac^T (x) I) vec(P) = vec(-Qc)`` directly,
    which is O(n^6) and serves as the reference for the Schur-based
    solver on small problems.

    Raises
    ------
    ValueError
        If ``n > max_order``, or if ``Ac`` and ``-Ac`` share an
        eigenvalue so the parameter matrix is singular.
    """
    Ac = np.asarray(Ac, dtype=float)
    Qc = np.asarray(Qc, dtype=float)
    n = Ac.shape[0]
    if Ac.shape != (n, n) or Qc.shape != (n, n):
        raise ValueError(
            f"Ac and Qc must be square with equal size, got {Ac.shape} "
            f"and {Qc.shape}"
        )
    if n > max_order:
        raise ValueError(
            f"dense Kronecker solve is limited to order {max_order}, "
            f"got n={n}"
        )
    eigs = np.linalg.eigvals(Ac)
    sums = np.abs(eigs[:, None] + eigs[None, :])
    if sums.min() <= 1e-12 * max(1.0, np.abs(eigs).max()):
        raise ValueError(
            "parameter matrix is singular: Ac and -Ac share an eigenvalue"
        )
    M = np.kron(np.eye(n), Ac.T) + np.kron(Ac.T, np.eye(n))
    return unvec(np.linalg.solve(M, vec(-Qc)), n, n)


def are_gain(plant, costspec, K_init=None, tol=1e-12, max_iters=500):
    """Optimal full-information gain by Riccati fixed-point iteration.

    Requires ``C = I``.  Alternates the closed-loop Lyapunov solve with
    the gain update ``K <- -inv(R) B^T P`` (Kleinman iteration) until
    the gain change drops below ``tol``; each iterate is stabilizing, so
    divergence surfaces as a stability failure or iteration overrun.

    Parameters
    ----------
    K_init : ndarray, optional
        Stabilizing initial state-feedback gain.  Defaults to zero,
        which requires the open-loop plant to be stable.
    """
    n = plant.nstates
    if plant.C.shape != (n, n) or not np.array_equal(plant.C, np.eye(n)):
        raise ValueError("are_gain requires full state feedback, C = I")
    A, B = plant.A, plant.B
    Q, R = costspec.Q, costspec.R
    Rinv = np.linalg.inv(R)
    if K_init is None:
        K = np.zeros((plant.ninputs, n))
    else:
        K = np.asarray(K_init, dtype=float).copy()

    for _ in range(max_iters):
        try:
            P = solve_lyapunov_primal(A + B @ K, Q + K.T @ R @ K)
        except NotHurwitzError as exc:
            raise RuntimeError(
                "Riccati iteration left the stabilizing set; the initial "
                "gain must stabilize A + B K"
            ) from exc
        K_next = -Rinv @ B.T @ P.value
        if np.abs(K_next - K).max() <= tol:
            return K_next
        K = K_next
    raise RuntimeError(
        f"Riccati iteration did not converge within {max_iters} steps; "
        f"the pair (A, B) may not be stabilizable"
    )


def quadrature_cost(plant, costspec, K, horizon=40.0, steps=2000):
    """Cost integral evaluated by composite Simpson quadrature.

    Samples ``trace(Phi(t)^T Qc Phi(t) X0)`` with ``Phi(t)`` the
    closed-loop matrix exponential, propagated by repeated products of
    ``expm(Ac * dt)``.  ``horizon`` must be long enough for the
    integrand tail to be negligible.

    Raises :class:`InfiniteCostError` for non-stabilizing gains.
    """
    if horizon <= 0.0 or steps < 2:
        raise ValueError("horizon must be positive and steps at least 2")
    K = np.asarray(K, dtype=float)
    Ac = closed_loop(plant, K)
    abscissa = float(np.max(np.linalg.eigvals(Ac).real))
    if abscissa >= 0.0:
        raise InfiniteCostError(
            f"gain is not stabilizing (spectral abscissa {abscissa:.6e}); "
            f"the cost integral diverges"
        )
    Qc = effective_weight(costspec, plant, K)
    X0 = costspec.X0
    dt = horizon / steps
    step_exp = expm(Ac * dt)
    values = np.empty(steps + 1)
    Phi = np.eye(plant.nstates)
    for k in range(steps + 1):
        values[k] = np.trace(Phi.T @ Qc @ Phi @ X0)
        Phi = Phi @ step_exp
    return float(simpson(values, dx=dt))
