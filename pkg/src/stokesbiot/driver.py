"""Backward-Euler time loop for the coupled system on a fixed mesh.

Observers hook into the loop after each accepted step; error accumulation
and estimation both run that way so states never pile up in memory.  The
initial state carries only the pore pressure (cell means) and displacement
(vertex interpolant): those are the only fields the backward difference sees,
and all time-integrated norms start at the first step.
"""

from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    TimeGrid,
    assemble_load,
    assemble_operator,
    boundary_values,
    initial_state,
)
from .solver import StepSolver
from .spaces import build_dof_map

__all__ = ["Problem", "TransientResult", "run_transient"]


@dataclass
class Problem:
    mesh: object
    dofmap: object
    params: object
    source: object
    time_grid: TimeGrid
    case: object = None  # optional manufactured reference

    @classmethod
    def from_case(cls, mesh, case, time_grid):
        return cls(
            mesh=mesh,
            dofmap=build_dof_map(mesh),
            params=case.params,
            source=case.source_data(),
            time_grid=time_grid,
            case=case,
        )


@dataclass
class TransientResult:
    times: np.ndarray
    final_state: np.ndarray
    solve_report: object
    states: list = field(default_factory=list)  # filled if store_states


def run_transient(problem, observers=(), store_states=False):
    mesh, dm = problem.mesh, problem.dofmap
    grid = problem.time_grid
    dt = grid.dt
    op = assemble_operator(mesh, dm, problem.params)
    A_full = op.matrix(dt)
    free = dm.full_free
    solver = StepSolver(A_full[free][:, free].tocsc())

    x_prev = initial_state(mesh, dm, problem.source)
    states = [x_prev.copy()] if store_states else []
    for obs in observers:
        start = getattr(obs, "start", None)
        if start is not None:
            start(problem, op)

    times = grid.times()
    for n in range(1, grid.n_steps + 1):
        t = times[n]
        F = assemble_load(mesh, dm, problem.params, problem.source, t, operator=op)
        F += op.history_rhs(dt, x_prev)
        lift = boundary_values(mesh, dm, problem.source, t)
        rhs_red = (F - A_full @ lift)[free]
        x_red = solver.solve(rhs_red)
        x = lift
        x[free] = x_red
        for obs in observers:
            obs.step(n, t, x, x_prev, dt)
        if store_states:
            states.append(x.copy())
        x_prev = x

    for obs in observers:
        finish = getattr(obs, "finish", None)
        if finish is not None:
            finish()
    return TransientResult(
        times=times,
        final_state=x_prev,
        solve_report=solver.report,
        states=states,
    )
