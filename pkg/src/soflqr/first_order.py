"""Analytic cost gradient and the gradient-projection baseline solver.

The gradient of the infinite-horizon cost with respect to the gain is
assembled from two Lyapunov solves against the closed loop,

    grad = 2 (B^T P + R K C) G C^T,

where ``P`` solves the primal equation with the effective state weight
and ``G`` is the state-covariance Gramian for the initial-state second
moment.  The baseline solver projects this gradient orthogonally onto
the homogeneous constraint subspace and descends along it with the
stability-guarded backtracking line search.
"""

import logging
import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .linesearch import LineSearchStalled, line_search
from .lyapunov import (
    LyapunovSolution,
    SchurSolver,
    solve_lyapunov_adjoint,
    solve_lyapunov_primal,
    spectral_abscissa,
    unvec,
    vec,
)
from .problem import (
    SolveResult,
    SolveTrace,
    TraceRecord,
    check_feasible,
    closed_loop,
    effective_weight,
    is_stabilizing,
)

__all__ = ["GradientPair", "gradient", "project_gradient", "first_order_solve"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GradientPair:
    """Cost gradient together with the Lyapunov solutions behind it.

    Attributes
    ----------
    grad : ndarray
        m x q gradient of the cost with respect to the gain.
    cost_matrix : LyapunovSolution
        Solution ``P`` of the primal equation; ``trace(P @ X0)`` is the
        cost at the evaluated gain.
    gramian : LyapunovSolution
        State-covariance Gramian ``G`` from the adjoint equation.
    """

    grad: np.ndarray
    cost_matrix: LyapunovSolution
    gramian: LyapunovSolution

    def cost(self, costspec):
        """Cost at the gain where this gradient was evaluated."""
        return float(np.trace(self.cost_matrix.value @ costspec.X0))


def gradient(plant, costspec, K):
    """Analytic gradient of the cost at a stabilizing gain ``K``.

    Both Lyapunov solves reuse a single Schur factorization of the
    closed loop.  Raises :class:`NotHurwitzError` if ``K`` does not
    stabilize the plant.
    """
    K = np.asarray(K, dtype=float)
    solver = SchurSolver(closed_loop(plant, K))
    P = solve_lyapunov_primal(solver, effective_weight(costspec, plant, K))
    G = solve_lyapunov_adjoint(solver, costspec.X0)
    grad = 2.0 * (plant.B.T @ P.value
                  + costspec.R @ K @ plant.C) @ G.value @ plant.C.T
    return GradientPair(grad=grad, cost_matrix=P, gramian=G)


def project_gradient(grad, cs):
    """Orthogonal projection of ``grad`` onto the constraint null space.

    Returns the feasible direction closest to ``grad`` in the Frobenius
    norm, i.e. ``unvec((I - Abar^T (Abar Abar^T)^-1 Abar) vec(grad))``.
    The dual variables of the projection are recovered by the Cholesky
    solve of the normal equations; ``Abar`` must have full row rank
    (guaranteed by the pruning in ``flatten_constraints``).
    """
    grad = np.asarray(grad, dtype=float)
    Abar, cbar = cs.flattened(grad.shape)
    if Abar.shape[0] == 0:
        return grad.copy()
    if np.any(cbar != 0.0):
        # Directions live in the null space regardless of the constraint
        # right-hand side: steps from a feasible gain then stay feasible.
        warnings.warn(
            "constraint set has a nonzero right-hand side; the projected "
            "direction satisfies the homogeneous condition so that steps "
            "preserve feasibility of the current gain",
            RuntimeWarning, stacklevel=2,
        )
    g = vec(grad)
    try:
        lam = cho_solve(cho_factor(Abar @ Abar.T), Abar @ g)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "constraint matrix is rank deficient; redundant rows should "
            "have been pruned during flattening"
        ) from exc
    return unvec(g - Abar.T @ lam, *grad.shape)


def first_order_solve(plant, costspec, cs, K0, tol=1e-5, alpha=0.2,
                      beta=0.1, max_iters=10000, keep_iterates=False):
    """Projected-gradient descent on the constrained cost.

    Iterates ``K <- K - t * Gp`` where ``Gp`` is the projected gradient
    and ``t`` comes from the stability-guarded backtracking line search,
    until ``||vec(Gp)|| <= tol``.  Every iterate is feasible and
    stabilizing.

    Parameters
    ----------
    K0 : ndarray
        Initial gain; must be stabilizing and feasible.
    tol : float
        Stopping threshold on the projected-gradient norm.

    Returns
    -------
    SolveResult
        Final gain, cost, convergence status, and per-iteration trace.
        ``status == "stalled"`` means the line search hit the numerical
        precision floor of the cost before the tolerance was met.
    """
    K = np.asarray(K0, dtype=float).copy()
    if not is_stabilizing(plant, K):
        raise ValueError("initial gain K0 does not stabilize the plant")
    if not check_feasible(cs, K):
        raise ValueError("initial gain K0 does not satisfy the constraints")

    trace = SolveTrace()
    iterates = [K.copy()] if keep_iterates else None
    start = time.perf_counter()
    status = "max_iters"
    evals_total = 0
    last_step_norm = 0.0
    last_t = 0.0
    gnorm = np.inf

    for it in range(max_iters + 1):
        gp = gradient(plant, costspec, K)
        J = gp.cost(costspec)
        direction = -project_gradient(gp.grad, cs)
        gnorm = float(np.linalg.norm(vec(direction)))
        trace.append(TraceRecord(
            iteration=it, cost=J, grad_norm=gnorm,
            step_norm=last_step_norm, step_size=last_t,
            spectral_abscissa=spectral_abscissa(closed_loop(plant, K)),
            seconds=time.perf_counter() - start,
        ))
        if gnorm <= tol:
            status = "converged"
            break
        if it == max_iters:
            break
        try:
            K, t, evals = line_search(plant, costspec, cs, K, direction,
                                      gp.grad, alpha, beta, current_cost=J)
        except LineSearchStalled:
            status = "stalled"
            logger.info(
                "first-order solve stalled after %d iterations at "
                "projected-gradient norm %.3e (tol %.1e)", it, gnorm, tol,
            )
            break
        evals_total += evals
        last_step_norm = float(t * np.linalg.norm(vec(direction)))
        last_t = t
        if keep_iterates:
            iterates.append(K.copy())

    final = trace.records[-1]
    return SolveResult(
        K=K, cost=final.cost, converged=(status == "converged"),
        status=status, iterations=final.iteration, grad_norm=gnorm,
        step_norm=final.step_norm, line_search_evals=evals_total,
        trace=trace, iterates=iterates,
    )
