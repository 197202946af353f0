"""Damped Newton solve of a patch system with a barrier-safe line search.

The search direction comes from a Cholesky solve of (S + tau I) dX = -f,
where tau is raised through powers of ten times the largest diagonal entry
until the factorization succeeds (quality is non-convex, so raw Newton can
point uphill).  The backtracking line search then accepts the first step
that keeps every ring element strictly above the barrier and achieves an
Armijo decrease of the patch objective; because no accepted step may cross
the barrier, a mesh that starts valid can never acquire an inverted element
while gamma >= 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from tetforge.barrier import BarrierParams, PatchSystem, assemble_patch_system, barrier_values_batch
from tetforge.constraints import ConstraintSystem, project_system
from tetforge.errors import NoProgressError
from tetforge.quality import quality_batch

logger = logging.getLogger("tetforge")

ARMIJO_C = 1e-4
MIN_ALPHA = 2.0 ** -20
MAX_SHIFT_EXP = 4
DEFAULT_MAX_INNER = 3
GRAD_TOL = 1e-10
STEP_TOL = 1e-12


@dataclass
class SolveReport:
    """Outcome of optimizing one patch."""

    iterations: int = 0
    objective: float = np.nan
    step_norms: list = field(default_factory=list)
    shifts: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)
    barrier_violations: int = 0
    stalled: bool = False
    min_quality: float = np.inf  # worst ring quality seen right after accepted steps


def newton_direction(S: np.ndarray, f: np.ndarray):
    """Solve (S + tau I) dX = -f with the smallest workable shift tau.

    tau is 0 when S is positive definite, otherwise the smallest power of
    ten times max|diag(S)| that lets the Cholesky factorization succeed and
    produces a descent direction.  Raises NoProgressError beyond 1e4 times
    the diagonal scale.
    """
    n = len(f)
    if n == 0:
        return np.zeros(0), 0.0
    scale = float(np.abs(np.diag(S)).max()) or 1.0
    shifts = [0.0] + [10.0 ** k * scale for k in range(-12, MAX_SHIFT_EXP + 1)]
    for tau in shifts:
        try:
            cho = scipy.linalg.cho_factor(S + tau * np.eye(n) if tau else S, check_finite=False)
        except scipy.linalg.LinAlgError:
            continue
        dx = scipy.linalg.cho_solve(cho, -f, check_finite=False)
        if not np.all(np.isfinite(dx)):
            continue
        if float(f @ dx) <= 0.0:
            return dx, tau
    raise NoProgressError(f"system singular or ascent-only up to shift {shifts[-1]:.3g}")


def line_search(mesh, patch, system: PatchSystem, direction: np.ndarray,
                params: BarrierParams, squared: bool = False) -> tuple:
    """Backtracking step along `direction`; moves the mesh on acceptance.

    Halves alpha from 1 until every ring element stays strictly above gamma
    and the patch objective satisfies the Armijo decrease.  Returns
    (alpha, violations, new_objective, min_ring_quality); alpha == 0.0 means
    the step was rejected below 2^-20 and the mesh is untouched.
    """
    free = np.asarray(patch.free_vertices, dtype=np.int64)
    step = direction.reshape(-1, 3)
    if len(free) == 0 or float(np.linalg.norm(direction)) == 0.0:
        q = quality_batch(mesh.tet_points(patch.ring_tets))
        return 1.0, 0, system.objective, float(q.min()) if len(q) else np.inf

    base = mesh.vertices[free].copy()
    slope = float(system.f @ direction)
    ring_tets = mesh.tets[np.asarray(patch.ring_tets, dtype=np.int64)]
    violations = 0
    alpha = 1.0
    while alpha >= MIN_ALPHA:
        mesh.vertices[free] = base + alpha * step
        q = quality_batch(mesh.vertices[ring_tets])
        if not np.all(np.isfinite(q)) or q.min() <= params.gamma:
            violations += 1
            alpha *= 0.5
            continue
        vals = barrier_values_batch(q, params.gamma)
        obj = float((vals * vals).sum()) if squared else float(vals.sum())
        if obj <= system.objective + ARMIJO_C * alpha * slope:
            return alpha, violations, obj, float(q.min())
        alpha *= 0.5
    mesh.vertices[free] = base
    return 0.0, violations, system.objective, np.inf


def optimize_patch(mesh, patch, params: BarrierParams,
                   constraints: ConstraintSystem | None = None,
                   max_inner: int = DEFAULT_MAX_INNER,
                   squared: bool = False) -> SolveReport:
    """Run up to max_inner Newton iterations on one patch at fixed gamma.

    Constraint rows, when given, are frozen for the whole solve; the mesh
    coordinates of the patch's free vertices are updated in place.  A patch
    that cannot make progress is reported as stalled, not raised.
    """
    report = SolveReport()
    for _ in range(max_inner):
        system = assemble_patch_system(mesh, patch, params, squared=squared)
        report.objective = system.objective
        if system.ndof == 0:
            break
        if constraints is not None and constraints.num_rows:
            S_eff, f_eff, _ = project_system(system.S, system.f, constraints.C, constraints.g)
        else:
            S_eff, f_eff = system.S, system.f
        if float(np.linalg.norm(f_eff)) <= GRAD_TOL * max(1.0, abs(system.objective)):
            break
        try:
            dx, tau = newton_direction(S_eff, f_eff)
        except NoProgressError:
            report.stalled = True
            break
        alpha, violations, obj, min_q = line_search(mesh, patch, system, dx, params, squared=squared)
        report.barrier_violations += violations
        if alpha == 0.0:
            report.stalled = True
            break
        report.iterations += 1
        report.shifts.append(tau)
        report.step_norms.append(alpha * float(np.linalg.norm(dx)))
        report.objective_history.append(obj)
        report.objective = obj
        report.min_quality = min(report.min_quality, min_q)
        if report.step_norms[-1] <= STEP_TOL:
            break
    return report
