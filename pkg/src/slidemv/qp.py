"""Long-only minimum-variance portfolio with a target-return floor.

Solves

    min 1/2 w'(Q + ridge I)w   s.t.  w >= 0,  sum(w) = 1,  R'w >= R0

with a primal active-set method (:func:`slidemv.kernels.active_set_qp`),
and re-checks solutions through an independent KKT audit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels

FEASIBILITY_TOL = 1e-10
KKT_TOL = 1e-8
MULTIPLIER_TOL = 1e-10
STEP_TOL = 1e-12
RIDGE_REL = 1e-8
RIDGE_FLOOR = 1e-12
MAX_CHANGES_PER_DIM = 100


class SolverError(RuntimeError):
    """Numerical failure of the QP solver (distinct from infeasibility)."""


@dataclass(frozen=True)
class QpProblem:
    Q: np.ndarray
    R: np.ndarray
    R0: float
    ridge: Optional[float] = None  # None -> relative rule of regularize()

    def __post_init__(self):
        Q = np.ascontiguousarray(self.Q, dtype=float)
        R = np.ascontiguousarray(self.R, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or R.shape != (Q.shape[0],):
            raise ValueError(f"dimension mismatch: Q {Q.shape}, R {R.shape}")
        if R.size == 0:
            raise ValueError("empty problem")
        with np.errstate(invalid="ignore"):  # NaN entries are the solver's to report
            asym = np.max(np.abs(Q - Q.T), initial=0.0)
        if asym > 1e-14:
            raise ValueError("Q is not symmetric")
        if self.ridge is not None and not self.ridge >= 0:
            raise ValueError("ridge must be nonnegative")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "R0", float(self.R0))

    @property
    def dim(self) -> int:
        return self.R.shape[0]

    @property
    def effective_ridge(self) -> float:
        if self.ridge is None:
            return default_ridge(self.Q)
        return float(self.ridge)


@dataclass(frozen=True)
class PortfolioSolution:
    status: str  # "optimal" | "infeasible"
    weights: Optional[np.ndarray] = None
    objective: Optional[float] = None
    active_set: tuple = ()
    kkt_residual: Optional[float] = None
    budget_multiplier: float = 0.0
    return_multiplier: float = 0.0
    bound_multipliers: Optional[np.ndarray] = None
    ridge: float = 0.0
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class KktReport:
    stationarity: float
    primal_violation: float
    dual_violation: float
    complementarity: float
    budget_multiplier: float
    return_multiplier: float
    bound_multipliers: dict = field(default_factory=dict)
    tol: float = KKT_TOL

    @property
    def gaps(self) -> dict:
        return {
            "stationarity": self.stationarity,
            "primal": self.primal_violation,
            "dual": self.dual_violation,
            "complementarity": self.complementarity,
        }

    @property
    def flags(self) -> list:
        return [name for name, gap in self.gaps.items() if gap > self.tol]

    @property
    def ok(self) -> bool:
        return not self.flags


def is_feasible(R, R0: float) -> bool:
    # on the simplex the best attainable R'w is the best single asset
    R = np.asarray(R, dtype=float)
    if R.size == 0 or not np.all(np.isfinite(R)):
        raise ValueError("R must be nonempty and finite")
    return bool(R.max() >= R0)


def default_ridge(Q) -> float:
    return float(kernels.relative_ridge(np.ascontiguousarray(Q, dtype=float), RIDGE_REL, RIDGE_FLOOR))


def regularize(Q, ridge: Optional[float] = None) -> np.ndarray:
    """Return ``Q + ridge * I``; ``ridge=None`` uses 1e-8 * trace(Q)/d (1e-12 if the trace is 0)."""
    Q = np.asarray(Q, dtype=float)
    if ridge is None:
        ridge = default_ridge(Q)
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    return Q + ridge * np.eye(Q.shape[0])


def solution_from_kernel(Q, R, result) -> PortfolioSolution:
    """Wrap raw :func:`kernels.active_set_qp` output; raises SolverError on numerical failure."""
    status, w, fixed, ret_in, mu, lam, s, changes, ridge_used = result
    d = R.shape[0]
    if status == kernels.INFEASIBLE:
        return PortfolioSolution(status="infeasible", ridge=ridge_used)
    if status == kernels.ITERATION_CAP:
        raise SolverError(f"iteration cap of {MAX_CHANGES_PER_DIM * d} working-set changes exceeded")
    if status == kernels.SINGULAR:
        raise SolverError("singular KKT subsystem after ridge escalation")
    if status == kernels.NON_FINITE:
        raise SolverError("non-finite arithmetic in QP data or iterates")

    H = Q + ridge_used * np.eye(d)
    grad = H @ w - mu - lam * R
    kkt = float(np.max(np.abs(grad[~fixed]), initial=0.0))
    if kkt > KKT_TOL:
        raise SolverError(f"KKT residual {kkt:.3e} above {KKT_TOL:g} at termination")

    weights = clean_weights(w)
    active = tuple(int(i) for i in np.flatnonzero(fixed))
    if ret_in:
        active += (d,)
    return PortfolioSolution(
        status="optimal",
        weights=weights,
        objective=0.5 * float(weights @ Q @ weights),
        active_set=active,
        kkt_residual=kkt,
        budget_multiplier=float(mu),
        return_multiplier=float(lam),
        bound_multipliers=np.where(fixed, s, 0.0),
        ridge=float(ridge_used),
        iterations=int(changes),
    )


def clean_weights(w) -> np.ndarray:
    w = np.clip(np.asarray(w, dtype=float), 0.0, 1.0)
    return w / w.sum()


def solve(problem: QpProblem) -> PortfolioSolution:
    """Minimum-variance long-only weights meeting the return floor.

    Returns an ``infeasible`` solution when no simplex point reaches ``R0``.
    Raises :class:`SolverError` on iteration-cap or numerical breakdown.
    """
    result = kernels.active_set_qp(
        problem.Q, problem.R, problem.R0, problem.effective_ridge,
        MAX_CHANGES_PER_DIM * problem.dim, MULTIPLIER_TOL, STEP_TOL,
    )
    return solution_from_kernel(problem.Q, problem.R, result)


def verify_kkt(problem: QpProblem, solution: PortfolioSolution, tol: float = KKT_TOL) -> KktReport:
    """Audit an optimal solution against the first-order conditions.

    Multipliers are re-derived from scratch by least squares on the reported
    active set, so the check does not trust the solver's own multipliers.
    """
    if not solution.optimal:
        raise ValueError("verify_kkt needs an optimal solution")
    d = problem.dim
    w = np.asarray(solution.weights, dtype=float)
    H = regularize(problem.Q, solution.ridge)
    R = problem.R
    bounds = [i for i in solution.active_set if i < d]
    ret_active = d in solution.active_set

    # stationarity: Hw = mu*1 + lam*R + sum_i s_i e_i
    cols = [np.ones(d)]
    if ret_active:
        cols.append(R)
    for i in bounds:
        e = np.zeros(d)
        e[i] = 1.0
        cols.append(e)
    A = np.column_stack(cols)
    g = H @ w
    mult, *_ = np.linalg.lstsq(A, g, rcond=None)
    stationarity = float(np.max(np.abs(g - A @ mult)))

    mu = float(mult[0])
    lam = float(mult[1]) if ret_active else 0.0
    s = dict(zip(bounds, (float(v) for v in mult[1 + int(ret_active):])))

    primal = max(
        float(np.max(-w, initial=0.0)),
        abs(float(w.sum()) - 1.0),
        max(problem.R0 - float(R @ w), 0.0),
    )
    dual = max([0.0, -lam] + [-v for v in s.values()])
    compl = max(
        [abs(lam * (float(R @ w) - problem.R0))] + [abs(v * w[i]) for i, v in s.items()],
    )
    return KktReport(
        stationarity=stationarity,
        primal_violation=primal,
        dual_violation=dual,
        complementarity=compl,
        budget_multiplier=mu,
        return_multiplier=lam,
        bound_multipliers=s,
        tol=tol,
    )
