"""Problem data model for structured static output feedback LQR synthesis.

Holds the plant ``(A, B, C)``, the quadratic cost specification
``(Q, R, X0)``, linear matrix-equality constraints on the gain, and the
basic evaluations built on them: closed loop, effective state weight,
infinite-horizon cost, stability and feasibility checks, and constraint
flattening to the vectorized form ``Abar vec(K) = cbar``.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr

from .lyapunov import (
    HURWITZ_MARGIN,
    NotHurwitzError,
    SchurSolver,
    solve_lyapunov_primal,
    spectral_abscissa,
    vec,
)

__all__ = [
    "FEASIBILITY_TOL",
    "InfiniteCostError",
    "InfeasibleConstraintsError",
    "Plant",
    "CostSpec",
    "ConstraintTerm",
    "Constraint",
    "ConstraintSet",
    "TraceRecord",
    "SolveTrace",
    "SolveResult",
    "closed_loop",
    "effective_weight",
    "cost",
    "cost_certificate",
    "is_stabilizing",
    "flatten_constraints",
    "check_feasible",
    "weights_from_performance_output",
]

logger = logging.getLogger(__name__)

# Infinity-norm tolerance for membership in the constraint set.
FEASIBILITY_TOL = 1e-9


class InfiniteCostError(ArithmeticError):
    """The quadratic cost is infinite because the gain is not stabilizing.

    A typed signal rather than a floating-point infinity, so callers such
    as the line search can treat destabilizing trial points explicitly.
    """


class InfeasibleConstraintsError(ValueError):
    """The constraint right-hand side is outside the range of the system."""


def _as_matrix(value, name):
    M = np.asarray(value, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def _check_symmetric(M, name, tol=1e-12):
    scale = max(1.0, np.abs(M).max()) if M.size else 1.0
    if np.abs(M - M.T).max() > tol * scale:
        raise ValueError(f"{name} must be symmetric")


@dataclass(frozen=True)
class Plant:
    """Continuous-time LTI plant ``xdot = A x + B u``, ``y = C x``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got shape {B.shape}")
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got shape {C.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def nstates(self):
        return self.A.shape[0]

    @property
    def ninputs(self):
        return self.B.shape[1]

    @property
    def noutputs(self):
        return self.C.shape[0]

    def gain_shape(self):
        """Shape of a compatible output feedback gain."""
        return (self.ninputs, self.noutputs)


@dataclass(frozen=True)
class CostSpec:
    """Quadratic cost data: state weight ``Q`` (PSD), input weight ``R``
    (PD), and the initial-state second moment ``X0`` (PSD)."""

    Q: np.ndarray
    R: np.ndarray
    X0: np.ndarray

    def __post_init__(self):
        Q = _as_matrix(self.Q, "Q")
        R = _as_matrix(self.R, "R")
        X0 = _as_matrix(self.X0, "X0")
        for M, name in ((Q, "Q"), (R, "R"), (X0, "X0")):
            if M.shape[0] != M.shape[1]:
                raise ValueError(f"{name} must be square, got shape {M.shape}")
            _check_symmetric(M, name)
        if np.linalg.eigvalsh(Q).min() < -1e-10:
            raise ValueError("Q must be positive semidefinite")
        if R.size == 0 or np.linalg.eigvalsh(R).min() <= 0.0:
            raise ValueError("R must be positive definite")
        if np.linalg.eigvalsh(X0).min() < -1e-10:
            raise ValueError("X0 must be positive semidefinite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "X0", X0)

    @classmethod
    def identity_moment(cls, Q, R):
        """Cost spec with ``X0 = I``, the expected second moment of an
        initial state drawn with identity covariance."""
        Q = _as_matrix(Q, "Q")
        return cls(Q=Q, R=R, X0=np.eye(Q.shape[0]))


def weights_from_performance_output(C1, D1, Qw):
    """Build ``(Q, R)`` from a performance output ``z = C1 x + D1 u``.

    The weights are ``Q = C1^T Qw C1`` and ``R = D1^T Qw D1`` for a
    symmetric positive semidefinite output weight ``Qw``.  ``R`` must come
    out positive definite; otherwise the cost has flat input directions
    and a ValueError is raised.
    """
    C1 = _as_matrix(C1, "C1")
    D1 = _as_matrix(D1, "D1")
    Qw = _as_matrix(Qw, "Qw")
    _check_symmetric(Qw, "Qw")
    if C1.shape[0] != Qw.shape[0] or D1.shape[0] != Qw.shape[0]:
        raise ValueError(
            f"C1 and D1 must have {Qw.shape[0]} rows to match Qw, got "
            f"{C1.shape} and {D1.shape}"
        )
    if np.linalg.eigvalsh(Qw).min() < -1e-10:
        raise ValueError("Qw must be positive semidefinite")
    Q = C1.T @ Qw @ C1
    R = D1.T @ Qw @ D1
    Q = 0.5 * (Q + Q.T)
    R = 0.5 * (R + R.T)
    if R.size == 0 or np.linalg.eigvalsh(R).min() <= 0.0:
        raise ValueError("D1^T Qw D1 is not positive definite")
    return Q, R


@dataclass(frozen=True)
class ConstraintTerm:
    """One bilinear term ``left @ K @ right`` of a matrix equality."""

    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "left", _as_matrix(self.left, "left"))
        object.__setattr__(self, "right", _as_matrix(self.right, "right"))


@dataclass(frozen=True)
class Constraint:
    """Matrix equality ``sum_j left_j @ K @ right_j = rhs``."""

    terms: tuple
    rhs: np.ndarray

    def __post_init__(self):
        if not self.terms:
            raise ValueError("constraint must have at least one term")
        rhs = _as_matrix(self.rhs, "rhs")
        terms = []
        for k, term in enumerate(self.terms):
            if not isinstance(term, ConstraintTerm):
                term = ConstraintTerm(*term)
            shape = (term.left.shape[0], term.right.shape[1])
            if shape != rhs.shape:
                raise ValueError(
                    f"constraint term {k} maps to shape {shape}, but the "
                    f"right-hand side has shape {rhs.shape}"
                )
            terms.append(term)
        object.__setattr__(self, "terms", tuple(terms))
        object.__setattr__(self, "rhs", rhs)

    def evaluate(self, K):
        K = np.asarray(K, dtype=float)
        out = np.zeros_like(self.rhs)
        for term in self.terms:
            out += term.left @ K @ term.right
        return out


@dataclass
class ConstraintSet:
    """Collection of linear matrix-equality constraints on an m x q gain.

    The flattened form ``Abar vec(K) = cbar`` is computed lazily by
    :func:`flatten_constraints` and cached; redundant rows are pruned
    there so ``Abar`` always has full row rank.
    """

    constraints: list = field(default_factory=list)
    _flattened: tuple = field(default=None, repr=False, compare=False)

    @classmethod
    def empty(cls):
        return cls(constraints=[])

    def __len__(self):
        return len(self.constraints)

    def flattened(self, gain_shape):
        """Cached ``(Abar, cbar)`` for gains of the given shape."""
        if self._flattened is None or self._flattened[0] != gain_shape:
            Abar, cbar = flatten_constraints(self, gain_shape)
            self._flattened = (gain_shape, Abar, cbar)
        return self._flattened[1], self._flattened[2]


def flatten_constraints(cs, gain_shape):
    """Convert matrix equalities to the vector form ``Abar vec(K) = cbar``.

    Each constraint ``sum_j L_j K R_j = C0`` contributes the block
    ``sum_j kron(R_j^T, L_j)`` and the stacked right-hand side
    ``vec(C0)``.  Redundant rows are removed with a rank-revealing
    pivoted QR factorization (threshold ``1e-10 * ||Abar||_2``); an
    inconsistent system raises :class:`InfeasibleConstraintsError`.

    Returns
    -------
    (ndarray, ndarray)
        ``Abar`` with full row rank, shape ``(p, m*q)``, and ``cbar``
        of length ``p``.
    """
    m, q = gain_shape
    blocks = []
    rhs_parts = []
    for k, con in enumerate(cs.constraints):
        block = np.zeros((con.rhs.size, m * q))
        for term in con.terms:
            if term.left.shape[1] != m or term.right.shape[0] != q:
                raise ValueError(
                    f"constraint {k}: term shapes "
                    f"{term.left.shape} x K x {term.right.shape} do not "
                    f"match gain shape {m}x{q}"
                )
            block += np.kron(term.right.T, term.left)
        blocks.append(block)
        rhs_parts.append(vec(con.rhs))
    if not blocks:
        return np.zeros((0, m * q)), np.zeros(0)
    Abar = np.vstack(blocks)
    cbar = np.concatenate(rhs_parts)

    # Consistency before pruning: cbar must lie in the range of Abar.
    x = np.linalg.lstsq(Abar, cbar, rcond=None)[0]
    misfit = float(np.linalg.norm(Abar @ x - cbar))
    if misfit > 1e-8 * max(1.0, np.linalg.norm(cbar)):
        raise InfeasibleConstraintsError(
            f"constraints are inconsistent: no gain satisfies them "
            f"(least-squares misfit {misfit:.3e})"
        )

    r, pivots = qr(Abar.T, mode="r", pivoting=True)
    diag = np.abs(np.diag(r))
    threshold = 1e-10 * np.linalg.norm(Abar, 2)
    rank = int(np.sum(diag > threshold))
    if rank < Abar.shape[0]:
        keep = np.sort(pivots[:rank])
        logger.info(
            "pruned %d redundant constraint row(s): kept rows %s of %d",
            Abar.shape[0] - rank, keep.tolist(), Abar.shape[0],
        )
        Abar = Abar[keep]
        cbar = cbar[keep]
    return Abar, cbar


def check_feasible(cs, K):
    """True iff ``K`` satisfies every constraint to within
    ``FEASIBILITY_TOL`` in the infinity norm of the flattened system."""
    K = np.asarray(K, dtype=float)
    Abar, cbar = cs.flattened(K.shape)
    if Abar.shape[0] == 0:
        return True
    return bool(np.abs(Abar @ vec(K) - cbar).max() <= FEASIBILITY_TOL)


def closed_loop(plant, K):
    """Closed-loop state matrix ``A + B K C``."""
    K = np.asarray(K, dtype=float)
    if K.shape != plant.gain_shape():
        raise ValueError(
            f"gain shape {K.shape} does not match plant gain shape "
            f"{plant.gain_shape()}"
        )
    return plant.A + plant.B @ K @ plant.C


def effective_weight(costspec, plant, K):
    """Effective state weight ``Q + (K C)^T R (K C)`` of the closed loop."""
    K = np.asarray(K, dtype=float)
    KC = K @ plant.C
    W = costspec.Q + KC.T @ costspec.R @ KC
    return 0.5 * (W + W.T)


def is_stabilizing(plant, K):
    """True iff the closed loop is Hurwitz with margin below
    ``HURWITZ_MARGIN``."""
    return spectral_abscissa(closed_loop(plant, K)) < HURWITZ_MARGIN


def cost_certificate(plant, costspec, K):
    """Cost and its certificate matrix.

    Returns ``(J, P)`` where ``P`` solves the closed-loop Lyapunov
    equation with the effective weight and ``J = trace(P @ X0)``.
    Stability of the closed loop is certified by ``P`` being positive
    definite whenever the effective weight is positive definite.

    Raises
    ------
    InfiniteCostError
        If ``K`` is not stabilizing.
    """
    Ac = closed_loop(plant, K)
    try:
        solver = SchurSolver(Ac)
    except NotHurwitzError as exc:
        raise InfiniteCostError(
            f"gain is not stabilizing (spectral abscissa {exc.abscissa:.6e}); "
            f"the infinite-horizon cost is infinite"
        ) from exc
    P = solve_lyapunov_primal(solver, effective_weight(costspec, plant, K))
    return float(np.trace(P.value @ costspec.X0)), P.value


def cost(plant, costspec, K):
    """Infinite-horizon quadratic cost ``trace(P X0)`` of the closed loop.

    Raises :class:`InfiniteCostError` for non-stabilizing gains.
    """
    return cost_certificate(plant, costspec, K)[0]


@dataclass(frozen=True)
class TraceRecord:
    """State of one solver iterate plus the step that produced it."""

    iteration: int
    cost: float
    grad_norm: float
    step_norm: float
    step_size: float
    spectral_abscissa: float
    seconds: float


@dataclass
class SolveTrace:
    """Per-iteration convergence record of a solver run."""

    records: list = field(default_factory=list)

    CSV_HEADER = (
        "iter", "J", "grad_norm", "step_norm", "step_size_t",
        "spectral_abscissa", "cumulative_seconds",
    )

    def append(self, record):
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    @property
    def costs(self):
        return [r.cost for r in self.records]

    @property
    def grad_norms(self):
        return [r.grad_norm for r in self.records]

    def write_csv(self, path):
        """Write the trace as comma-separated values with a header row."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_HEADER)
            for r in self.records:
                writer.writerow([
                    r.iteration, repr(r.cost), repr(r.grad_norm),
                    repr(r.step_norm), repr(r.step_size),
                    repr(r.spectral_abscissa), repr(r.seconds),
                ])


@dataclass
class SolveResult:
    """Outcome of a solver run.

    ``status`` is one of ``"converged"``, ``"stalled"`` (the line search
    could not certify further decrease in floating point), or
    ``"max_iters"``.  ``iterations`` counts accepted steps.
    """

    K: np.ndarray
    cost: float
    converged: bool
    status: str
    iterations: int
    grad_norm: float
    step_norm: float
    line_search_evals: int
    trace: SolveTrace
    iterates: list = None
