"""Problem bundles, JSON problem files, and the bundled benchmarks.

A problem file is a JSON object with named matrix fields::

    {
      "name": "...",                       # optional
      "A": [[...]], "B": [[...]], "C": [[...]],
      "Q": [[...]], "R": [[...]],
      "X0": [[...]],                       # optional, defaults to identity
      "K0": [[...]],
      "constraints": [                     # optional
        {"terms": [{"left": [[...]], "right": [[...]]}], "rhs": [[...]]}
      ],
      "solver": {"method": "newton", "tol": 1e-9, "pt_eps": 1e-9,
                 "alpha": 0.2, "beta": 0.1, "max_iters": 200}
    }

JSON floats round-trip exactly, so a written file parses back to
bit-identical matrices.  Two benchmarks ship as built-ins: ``example1``,
an unconstrained fourth-order aircraft model with a 2x3 gain, and
``example2``, a third-order plant under decentralized (diagonal) gain
constraints.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .problem import Constraint, ConstraintSet, ConstraintTerm, CostSpec, Plant

__all__ = [
    "ProblemFormatError",
    "SolverParams",
    "Problem",
    "problem_from_dict",
    "problem_to_dict",
    "load_problem",
    "save_problem",
    "builtin_problem",
    "BUILTIN_NAMES",
]

BUILTIN_NAMES = ("example1", "example2")

_METHODS = ("newton", "grad")

# Per-method defaults used when a problem file leaves a field unset.
_DEFAULT_TOL = {"newton": 1e-9, "grad": 1e-5}
_DEFAULT_MAX_ITERS = {"newton": 200, "grad": 10000}


class ProblemFormatError(ValueError):
    """A problem file could not be parsed into a valid problem."""


@dataclass(frozen=True)
class SolverParams:
    """Solver selection and tuning knobs carried by a problem file."""

    method: str = "newton"
    tol: float = None
    pt_eps: float = 1e-6
    alpha: float = 0.2
    beta: float = 0.1
    max_iters: int = None

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ProblemFormatError(
                f"field 'solver.method': expected one of {_METHODS}, "
                f"got {self.method!r}"
            )

    def resolved_tol(self):
        return _DEFAULT_TOL[self.method] if self.tol is None else self.tol

    def resolved_max_iters(self):
        if self.max_iters is None:
            return _DEFAULT_MAX_ITERS[self.method]
        return self.max_iters


@dataclass(frozen=True)
class Problem:
    """A complete solvable instance: plant, cost, constraints, start."""

    plant: Plant
    costspec: CostSpec
    constraints: ConstraintSet
    gain0: np.ndarray
    params: SolverParams = field(default_factory=SolverParams)
    name: str = None

    def with_params(self, **overrides):
        """Copy of the problem with solver parameters replaced."""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, params=replace(self.params, **overrides))


def _matrix_field(data, key, required=True):
    if key not in data:
        if required:
            raise ProblemFormatError(f"field '{key}': missing")
        return None
    try:
        M = np.array(data[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"field '{key}': not a numeric matrix "
                                 f"({exc})") from exc
    if M.ndim != 2:
        raise ProblemFormatError(
            f"field '{key}': expected a 2-D array, got ndim={M.ndim}"
        )
    return M


def problem_from_dict(data):
    """Build a :class:`Problem` from parsed JSON, validating field by
    field so errors name the offending entry."""
    if not isinstance(data, dict):
        raise ProblemFormatError("problem file must be a JSON object")
    A = _matrix_field(data, "A")
    B = _matrix_field(data, "B")
    C = _matrix_field(data, "C")
    try:
        plant = Plant(A=A, B=B, C=C)
    except ValueError as exc:
        raise ProblemFormatError(f"plant: {exc}") from exc

    Q = _matrix_field(data, "Q")
    R = _matrix_field(data, "R")
    X0 = _matrix_field(data, "X0", required=False)
    if X0 is None:
        X0 = np.eye(plant.nstates)
    try:
        costspec = CostSpec(Q=Q, R=R, X0=X0)
    except ValueError as exc:
        raise ProblemFormatError(f"cost: {exc}") from exc
    if Q.shape[0] != plant.nstates:
        raise ProblemFormatError(
            f"field 'Q': expected order {plant.nstates}, got {Q.shape[0]}"
        )
    if R.shape[0] != plant.ninputs:
        raise ProblemFormatError(
            f"field 'R': expected order {plant.ninputs}, got {R.shape[0]}"
        )
    if X0.shape[0] != plant.nstates:
        raise ProblemFormatError(
            f"field 'X0': expected order {plant.nstates}, got {X0.shape[0]}"
        )

    K0 = _matrix_field(data, "K0")
    if K0.shape != plant.gain_shape():
        raise ProblemFormatError(
            f"field 'K0': expected shape {plant.gain_shape()}, "
            f"got {K0.shape}"
        )

    constraints = []
    for k, entry in enumerate(data.get("constraints", [])):
        if not isinstance(entry, dict) or "terms" not in entry \
                or "rhs" not in entry:
            raise ProblemFormatError(
                f"field 'constraints[{k}]': expected an object with "
                f"'terms' and 'rhs'"
            )
        terms = []
        for t, term in enumerate(entry["terms"]):
            left = _matrix_field(term, "left")
            right = _matrix_field(term, "right")
            if left.shape[1] != plant.ninputs:
                raise ProblemFormatError(
                    f"field 'constraints[{k}].terms[{t}].left': expected "
                    f"{plant.ninputs} columns, got {left.shape[1]}"
                )
            if right.shape[0] != plant.noutputs:
                raise ProblemFormatError(
                    f"field 'constraints[{k}].terms[{t}].right': expected "
                    f"{plant.noutputs} rows, got {right.shape[0]}"
                )
            terms.append(ConstraintTerm(left=left, right=right))
        rhs = _matrix_field(entry, "rhs")
        try:
            constraints.append(Constraint(terms=tuple(terms), rhs=rhs))
        except ValueError as exc:
            raise ProblemFormatError(
                f"field 'constraints[{k}]': {exc}") from exc

    solver = data.get("solver", {})
    if not isinstance(solver, dict):
        raise ProblemFormatError("field 'solver': expected an object")
    try:
        params = SolverParams(
            method=solver.get("method", "newton"),
            tol=solver.get("tol"),
            pt_eps=solver.get("pt_eps", 1e-6),
            alpha=solver.get("alpha", 0.2),
            beta=solver.get("beta", 0.1),
            max_iters=solver.get("max_iters"),
        )
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"field 'solver': {exc}") from exc

    return Problem(
        plant=plant, costspec=costspec,
        constraints=ConstraintSet(constraints=constraints),
        gain0=K0, params=params, name=data.get("name"),
    )


def problem_to_dict(problem):
    """Serialize a :class:`Problem` to a JSON-compatible dict."""
    data = {}
    if problem.name is not None:
        data["name"] = problem.name
    data["A"] = problem.plant.A.tolist()
    data["B"] = problem.plant.B.tolist()
    data["C"] = problem.plant.C.tolist()
    data["Q"] = problem.costspec.Q.tolist()
    data["R"] = problem.costspec.R.tolist()
    data["X0"] = problem.costspec.X0.tolist()
    data["K0"] = np.asarray(problem.gain0, dtype=float).tolist()
    if len(problem.constraints):
        data["constraints"] = [
            {
                "terms": [
                    {"left": t.left.tolist(), "right": t.right.tolist()}
                    for t in con.terms
                ],
                "rhs": con.rhs.tolist(),
            }
            for con in problem.constraints.constraints
        ]
    params = problem.params
    solver = {"method": params.method}
    if params.tol is not None:
        solver["tol"] = params.tol
    solver["pt_eps"] = params.pt_eps
    solver["alpha"] = params.alpha
    solver["beta"] = params.beta
    if params.max_iters is not None:
        solver["max_iters"] = params.max_iters
    data["solver"] = solver
    return data


def load_problem(path):
    """Parse a JSON problem file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    return problem_from_dict(data)


def save_problem(problem, path):
    """Write a problem file; floats are emitted at full precision."""
    with open(path, "w") as fh:
        json.dump(problem_to_dict(problem), fh, indent=2)
        fh.write("\n")


def _example1():
    # Fourth-order aircraft longitudinal model with three measured
    # outputs; unconstrained 2x3 gain starting from zero.
    plant = Plant(
        A=np.array([
            [-0.037, 0.0123, 0.00055, -1.0],
            [0.0, 0.0, 1.0, 0.0],
            [-6.37, 0.0, -0.23, 0.0618],
            [1.25, 0.0, 0.016, -0.0457],
        ]),
        B=np.array([
            [0.00084, 0.000236],
            [0.0, 0.0],
            [0.08, 0.804],
            [-0.0862, -0.0665],
        ]),
        C=np.array([
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]),
    )
    return Problem(
        plant=plant,
        costspec=CostSpec.identity_moment(np.eye(4), np.eye(2)),
        constraints=ConstraintSet.empty(),
        gain0=np.zeros((2, 3)),
        params=SolverParams(method="newton", tol=1e-9, pt_eps=1e-9,
                            alpha=0.2, beta=0.1),
        name="example1",
    )


def _example2():
    # Third-order plant with a decentralized 2x2 gain: each input may
    # use only its own measured output, pinning both off-diagonal gain
    # entries to zero through one matrix equality apiece.
    plant = Plant(
        A=np.array([
            [-4.0, 2.0, 1.0],
            [3.0, -2.0, 5.0],
            [-7.0, 0.0, 3.0],
        ]),
        B=np.array([
            [1.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
        ]),
        C=np.array([
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ]),
    )
    constraints = ConstraintSet(constraints=[
        Constraint(
            terms=(ConstraintTerm(left=np.array([[1.0, 0.0]]),
                                  right=np.array([[0.0], [1.0]])),),
            rhs=np.array([[0.0]]),
        ),
        Constraint(
            terms=(ConstraintTerm(left=np.array([[0.0, 1.0]]),
                                  right=np.array([[1.0], [0.0]])),),
            rhs=np.array([[0.0]]),
        ),
    ])
    return Problem(
        plant=plant,
        costspec=CostSpec.identity_moment(np.eye(3), np.eye(2)),
        constraints=constraints,
        gain0=np.diag([-2.0, -3.0]),
        params=SolverParams(method="newton", tol=1e-9, pt_eps=1e-6,
                            alpha=0.2, beta=0.1),
        name="example2",
    )


def builtin_problem(name):
    """Return one of the bundled benchmark problems by name."""
    if name == "example1":
        return _example1()
    if name == "example2":
        return _example2()
    raise ValueError(
        f"unknown built-in problem {name!r}; available: "
        f"{', '.join(BUILTIN_NAMES)}"
    )
