"""One convexified iteration of the penalty convex-concave direction search.

Slack layout for K blocks: slots 0..K-1 hold trait-angle constraints (included or
excluded block k), slots K..2K-1 the object-angle constraints of included blocks,
slot 2K the linearized lower norm bound and slot 2K+1 the upper norm bound.
"""

import logging
from typing import Callable, List, Optional, Tuple

import cvxpy as cp
import numpy as np
from pydantic import Field, model_validator
from scipy import optimize

from ..core.models import NumericModel

logger = logging.getLogger(__name__)

# Tried in order after the configured solver fails
FALLBACK_SOLVERS = ("CLARABEL", "ECOS", "SCS")


class IncludedTerms(NumericModel):
    """Constraint data of a block inside the collection."""

    block_index: int
    trait_basis: np.ndarray = Field(..., description="n x r orthonormal (shrunk) V̌_k")
    cos2_phi: float
    object_factor: np.ndarray = Field(..., description="R_k with ‖R_k v‖ = ‖X_k v‖")
    object_proj_factor: np.ndarray = Field(..., description="F_k = Ǔ_kᵀ X_k")
    cos2_psi: float
    nu1: float = Field(..., description="Leading singular value of X_k")


class ExcludedTerms(NumericModel):
    """Constraint data of a block outside the collection."""

    block_index: int
    trait_basis: np.ndarray
    cos2_phi: float


class SubproblemSpec(NumericModel):
    """Everything one linearized subproblem needs."""

    n_blocks: int
    included: List[IncludedTerms]
    excluded: List[ExcludedTerms] = Field(default_factory=list)
    ortho: np.ndarray = Field(..., description="n x p orthonormal basis v must avoid")
    v0: np.ndarray
    tau: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _check(self) -> "SubproblemSpec":
        cosines = [t.cos2_phi for t in self.included] + [t.cos2_psi for t in self.included]
        cosines += [t.cos2_phi for t in self.excluded]
        if any(not 0.0 < c <= 1.0 for c in cosines):
            raise ValueError("squared cosines must lie in (0, 1]")
        if self.ortho.ndim != 2 or self.ortho.shape[0] != self.dim:
            raise ValueError("ortho must be an n x p matrix")
        if self.ortho.shape[1] and not np.allclose(self.ortho.T @ self.ortho, np.eye(self.ortho.shape[1]), atol=1e-8):
            raise ValueError("ortho columns must be orthonormal")
        if np.linalg.norm(self.v0) > 1.0 + 1e-6:
            raise ValueError("linearization point must satisfy ‖v0‖ <= 1")
        return self

    @property
    def dim(self) -> int:
        return int(self.v0.shape[0])

    @property
    def n_slacks(self) -> int:
        return 2 * self.n_blocks + 2

    def at(self, v0: np.ndarray, tau: Optional[float] = None) -> "SubproblemSpec":
        """Same constraints, new linearization point and penalty."""
        return self.model_copy(update={"v0": np.asarray(v0, dtype=float), "tau": self.tau if tau is None else tau})

    def projector_sum(self, v: np.ndarray) -> np.ndarray:
        """Σ_k V̌_k V̌_kᵀ v over included blocks, applied factored."""
        out = np.zeros_like(v)
        for term in self.included:
            out += term.trait_basis @ (term.trait_basis.T @ v)
        return out


class SubproblemResult(NumericModel):
    """Solution of one subproblem with its optimality certificates."""

    v: np.ndarray
    slacks: np.ndarray
    objective: float
    certified: bool
    slack_residual: float
    stationarity_residual: float
    status: str


class _Constraint:
    """One penalized constraint: its slot, violation g(v) and gradient at v."""

    def __init__(self, slot: int, g: Callable[[np.ndarray], float], grad: Callable[[np.ndarray], np.ndarray]):
        self.slot = slot
        self.g = g
        self.grad = grad


def _linearized_constraints(spec: SubproblemSpec) -> List[_Constraint]:
    """Numeric counterparts of the cvxpy constraints at spec.v0."""
    v0, k_total = spec.v0, spec.n_blocks
    constraints: List[_Constraint] = []
    for t in spec.included:
        b, c = t.trait_basis, t.cos2_phi
        pv0 = b @ (b.T @ v0)
        const = float(v0 @ pv0) / c
        constraints.append(_Constraint(
            t.block_index,
            lambda v, pv0=pv0, c=c, const=const: float(v @ v - 2.0 * (pv0 @ v) / c + const),
            lambda v, pv0=pv0, c=c: 2.0 * v - 2.0 * pv0 / c,
        ))
    for t in spec.excluded:
        b, c = t.trait_basis, t.cos2_phi
        constraints.append(_Constraint(
            t.block_index,
            lambda v, b=b, c=c: float(np.sum((b.T @ v) ** 2) / c - 2.0 * (v0 @ v) + v0 @ v0),
            lambda v, b=b, c=c: 2.0 * b @ (b.T @ v) / c - 2.0 * v0,
        ))
    for t in spec.included:
        r, f, c, w = t.object_factor, t.object_proj_factor, t.cos2_psi, t.nu1 ** 2
        fv0 = f @ v0
        ftf_v0 = f.T @ fv0
        const = float(fv0 @ fv0) / c
        constraints.append(_Constraint(
            k_total + t.block_index,
            lambda v, r=r, ftf_v0=ftf_v0, c=c, w=w, const=const: float(
                (np.sum((r @ v) ** 2) - 2.0 * (ftf_v0 @ v) / c + const) / w
            ),
            lambda v, r=r, ftf_v0=ftf_v0, c=c, w=w: (2.0 * r.T @ (r @ v) - 2.0 * ftf_v0 / c) / w,
        ))
    constraints.append(_Constraint(
        2 * k_total,
        lambda v: float(1.0 - 2.0 * (v0 @ v) + v0 @ v0),
        lambda v: -2.0 * v0,
    ))
    constraints.append(_Constraint(2 * k_total + 1, lambda v: float(v @ v - 1.0), lambda v: 2.0 * v))
    return constraints


def penalty_objective(spec: SubproblemSpec, v: np.ndarray) -> float:
    """Exact penalized objective -vᵀPv + τ Σ max(0, G_t(v)) before linearization."""
    v = np.asarray(v, dtype=float)
    norm2 = float(v @ v)
    violations: List[float] = []
    for t in spec.included:
        violations.append(norm2 - float(np.sum((t.trait_basis.T @ v) ** 2)) / t.cos2_phi)
    for t in spec.excluded:
        violations.append(float(np.sum((t.trait_basis.T @ v) ** 2)) / t.cos2_phi - norm2)
    for t in spec.included:
        full = float(np.sum((t.object_factor @ v) ** 2))
        proj = float(np.sum((t.object_proj_factor @ v) ** 2))
        violations.append((full - proj / t.cos2_psi) / t.nu1 ** 2)
    violations += [1.0 - norm2, norm2 - 1.0]
    return float(-(v @ spec.projector_sum(v)) + spec.tau * sum(max(0.0, g) for g in violations))


class SubproblemSolver:
    """Parametrized cvxpy program for one direction search.

    The constraint structure is compiled once; each CCP iteration only updates the
    linearization coefficients and the penalty.
    """

    def __init__(self, spec: SubproblemSpec, solver: str = "CLARABEL", tol: float = 1e-6):
        """Build the convex program for spec's constraint structure."""
        self.spec = spec
        self.solver = solver
        self.tol = tol
        n, k_total = spec.dim, spec.n_blocks

        self._v = cp.Variable(n)
        self._s = cp.Variable(spec.n_slacks, nonneg=True)
        self._tau = cp.Parameter(nonneg=True)
        self._obj_lin = cp.Parameter(n)
        self._obj_const = cp.Parameter()
        self._lin: List[Tuple[cp.Parameter, cp.Parameter]] = []

        # (convex quadratic part, slot) in the order of _linearized_constraints
        rows = []
        for t in spec.included:
            rows.append((cp.sum_squares(self._v), t.block_index))
        for t in spec.excluded:
            rows.append((cp.sum_squares(t.trait_basis.T @ self._v) / t.cos2_phi, t.block_index))
        for t in spec.included:
            scaled = t.object_factor / t.nu1
            rows.append((cp.sum_squares(scaled @ self._v), k_total + t.block_index))
        rows.append((None, 2 * k_total))
        rows.append((cp.sum_squares(self._v), 2 * k_total + 1))

        self._handles: List[cp.Constraint] = []
        for quad, slot in rows:
            a, b = cp.Parameter(n), cp.Parameter()
            self._lin.append((a, b))
            expr = a @ self._v + b if quad is None else quad + a @ self._v + b
            handle = expr <= self._s[slot]
            self._handles.append(handle)

        constraints = list(self._handles)
        if spec.ortho.shape[1]:
            constraints.append(spec.ortho.T @ self._v == 0)
        objective = cp.Minimize(self._obj_lin @ self._v + self._obj_const + self._tau * cp.sum(self._s))
        self.problem = cp.Problem(objective, constraints)

    def _set_parameters(self, spec: SubproblemSpec) -> None:
        v0 = spec.v0
        pv0 = spec.projector_sum(v0)
        self._obj_lin.value = -2.0 * pv0
        self._obj_const.value = float(v0 @ pv0)
        self._tau.value = spec.tau

        coeffs: List[Tuple[np.ndarray, float]] = []
        for t in spec.included:
            p_k = t.trait_basis @ (t.trait_basis.T @ v0)
            coeffs.append((-2.0 * p_k / t.cos2_phi, float(v0 @ p_k) / t.cos2_phi))
        for _ in spec.excluded:
            coeffs.append((-2.0 * v0, float(v0 @ v0)))
        for t in spec.included:
            fv0 = t.object_proj_factor @ v0
            w = t.nu1 ** 2
            coeffs.append((-2.0 * (t.object_proj_factor.T @ fv0) / (t.cos2_psi * w), float(fv0 @ fv0) / (t.cos2_psi * w)))
        coeffs.append((-2.0 * v0, 1.0 + float(v0 @ v0)))
        coeffs.append((np.zeros(spec.dim), -1.0))
        for (a, b), (a_val, b_val) in zip(self._lin, coeffs):
            a.value = a_val
            b.value = b_val

    def _solver_order(self) -> List[str]:
        installed = set(cp.installed_solvers())
        fallbacks = [name for name in FALLBACK_SOLVERS if name in installed and name != self.solver.upper()]
        return [self.solver] + fallbacks

    def _run_solvers(self) -> str:
        for name in self._solver_order():
            try:
                self.problem.solve(solver=name)
            except cp.error.SolverError as e:
                logger.warning("Subproblem solver %s failed: %s", name, e)
                continue
            status = str(self.problem.status)
            if self._v.value is not None and status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
                return status
            logger.warning("Subproblem solver %s returned status %s", name, status)
        return "failed"

    def solve(self, v0: np.ndarray, tau: float) -> SubproblemResult:
        """Solve at linearization point v0 with penalty tau and certify the answer."""
        spec = self.spec.at(v0, tau)
        self._set_parameters(spec)
        status = self._run_solvers()

        numeric = _linearized_constraints(spec)
        solved = status != "failed"
        v = np.asarray(self._v.value if solved else spec.v0, dtype=float).copy()
        # slacks of the exact-penalty form at v
        slacks = np.zeros(spec.n_slacks)
        for c in numeric:
            slacks[c.slot] = max(0.0, c.g(v))
        objective = float(self._obj_lin.value @ v + self._obj_const.value + spec.tau * slacks.sum())
        if not solved:
            return SubproblemResult(
                v=v, slacks=slacks, objective=objective, certified=False,
                slack_residual=float("inf"), stationarity_residual=float("inf"), status=status,
            )

        solver_slacks = np.clip(np.asarray(self._s.value, dtype=float), 0.0, None)
        slack_residual, stationarity = self._certificates(spec, numeric, v, solver_slacks)
        certified = slack_residual <= self.tol and stationarity <= self.tol * (1.0 + spec.tau)
        if not certified:
            logger.warning(
                "Subproblem not certified (status=%s, slack residual=%.2e, stationarity=%.2e)",
                status, slack_residual, stationarity,
            )
        return SubproblemResult(
            v=v,
            slacks=slacks,
            objective=objective,
            certified=certified,
            slack_residual=slack_residual,
            stationarity_residual=stationarity,
            status=status,
        )

    def _certificates(
        self, spec: SubproblemSpec, numeric: List[_Constraint], v: np.ndarray, slacks: np.ndarray
    ) -> Tuple[float, float]:
        # (a) exact-penalty identity on every used slot
        used = {c.slot for c in numeric}
        slack_residual = 0.0
        for c in numeric:
            g = c.g(v)
            slack_residual = max(slack_residual, abs(slacks[c.slot] - max(0.0, g)) / (1.0 + abs(g)))
        unused = [i for i in range(spec.n_slacks) if i not in used]
        if unused:
            slack_residual = max(slack_residual, float(np.max(np.abs(slacks[unused]))))

        # (b) projected stationarity of the reduced objective
        return float(slack_residual), stationarity_residual(spec, numeric, v, self.tol)


def _project(spec: SubproblemSpec, x: np.ndarray) -> np.ndarray:
    if not spec.ortho.shape[1]:
        return x
    return x - spec.ortho @ (spec.ortho.T @ x)


def stationarity_residual(spec: SubproblemSpec, numeric: List[_Constraint], v: np.ndarray, tol: float) -> float:
    """Smallest projected subgradient norm of the reduced penalty objective at v.

    Violated constraints carry weight tau and satisfied ones weight 0; constraints
    within tol of their boundary get multipliers in [0, tau] fitted by bounded least
    squares.
    """
    fixed = -2.0 * spec.projector_sum(spec.v0)
    active: List[np.ndarray] = []
    for c in numeric:
        g = c.g(v)
        if abs(g) <= tol:
            active.append(_project(spec, c.grad(v)))
        elif g > 0.0:
            fixed = fixed + spec.tau * c.grad(v)
    fixed = _project(spec, fixed)
    if not active:
        return float(np.linalg.norm(fixed))
    fit = optimize.lsq_linear(np.column_stack(active), -fixed, bounds=(0.0, spec.tau), method="bvls")
    return float(np.linalg.norm(fixed + np.column_stack(active) @ fit.x))


def solve_subproblem(spec: SubproblemSpec, tol: float = 1e-6, solver: str = "CLARABEL") -> SubproblemResult:
    """Solve a single subproblem at spec.v0 and spec.tau."""
    return SubproblemSolver(spec, solver=solver, tol=tol).solve(spec.v0, spec.tau)
