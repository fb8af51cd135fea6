"""Backtracking line search with a closed-loop stability guard.

Shared by the gradient-projection and Newton solvers: starting from a
unit step, the step size is shrunk geometrically until the trial gain
satisfies the Armijo sufficient-decrease condition, keeps the closed
loop Hurwitz, and yields a positive definite cost certificate matrix.
"""

import numpy as np

from .lyapunov import NotHurwitzError, SchurSolver, solve_lyapunov_primal
from .problem import check_feasible, closed_loop, cost, effective_weight

__all__ = ["LineSearchStalled", "line_search", "MIN_STEP"]

# Step sizes below this are treated as underflow: the search has reached
# the floating-point floor of the cost along the given direction.
MIN_STEP = 1e-16

# Slack on the Armijo comparison, scaled by the cost magnitude.  Near a
# minimizer the true per-step decrease falls below one ulp of J, where a
# strict sufficient-decrease test cannot be certified in double
# precision; acceptance still requires a strictly lower cost, so the
# monotone-descent invariant is unaffected.
_ARMIJO_SLACK = 16.0 * np.finfo(float).eps


class LineSearchStalled(RuntimeError):
    """No acceptable step found before the step size underflowed."""

    def __init__(self, grad_norm=None, message=None):
        self.grad_norm = grad_norm
        if message is None:
            message = (
                f"line search stalled: no trial step above {MIN_STEP:.0e} "
                f"produced a certified cost decrease"
            )
        super().__init__(message)


def line_search(plant, costspec, cs, K, delta, grad, alpha, beta,
                current_cost=None):
    """Backtracking search along the descent direction ``delta``.

    Accepts the first ``t`` in ``1, beta, beta^2, ...`` for which
    ``J(K + t*delta)`` is strictly below ``J(K)``, satisfies the Armijo
    condition with parameter ``alpha`` (evaluated with the full gradient
    ``grad``), and has a positive definite cost certificate matrix.
    Destabilizing trial points count as rejections.

    Parameters
    ----------
    cs : ConstraintSet
        Used to verify the accepted iterate stays feasible.
    grad : ndarray
        Cost gradient at ``K`` (not the projected gradient).
    current_cost : float, optional
        ``J(K)`` if already known; avoids one Lyapunov solve.

    Returns
    -------
    (ndarray, float, int)
        Accepted gain ``K + t*delta``, the accepted ``t``, and the
        number of cost evaluations performed.
    """
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must be in (0, 0.5), got {alpha}")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    K = np.asarray(K, dtype=float)
    delta = np.asarray(delta, dtype=float)
    slope = float(np.trace(np.asarray(grad).T @ delta))
    if slope >= 0.0:
        raise ValueError(
            f"delta is not a descent direction: <grad, delta> = {slope:.3e}"
        )
    if current_cost is None:
        current_cost = cost(plant, costspec, K)
    slack = _ARMIJO_SLACK * max(1.0, abs(current_cost))

    X0 = costspec.X0
    t = 1.0
    evals = 0
    while t > MIN_STEP:
        Kt = K + t * delta
        evals += 1
        try:
            # The solver gates on the spectral abscissa before solving, so
            # a destabilizing trial never reaches the Lyapunov solve.
            solver = SchurSolver(closed_loop(plant, Kt))
        except NotHurwitzError:
            t *= beta
            continue
        P = solve_lyapunov_primal(solver,
                                  effective_weight(costspec, plant, Kt))
        trial_cost = float(np.trace(P.value @ X0))
        sufficient = current_cost + alpha * t * slope + slack
        if (trial_cost < current_cost
                and trial_cost <= sufficient
                and np.linalg.eigvalsh(P.value).min() > 0.0):
            if len(cs) and not check_feasible(cs, Kt):
                raise RuntimeError(
                    "accepted line-search iterate violates the constraint "
                    "set; the step direction was not in the constraint "
                    "null space"
                )
            return Kt, t, evals
        t *= beta
    raise LineSearchStalled()
