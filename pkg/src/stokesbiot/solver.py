"""Direct sparse solution of the reduced step systems.

One LU factorization per mesh is reused for every time step, since the step
matrix depends on the mesh and dt but not on time.  Solutions are verified
a posteriori against a relative-residual tolerance; a factorization failure
or a residual above tolerance raises SolverFailure rather than letting bad
numbers propagate into estimates.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

__all__ = ["SolverFailure", "SolveReport", "StepSolver"]

DEFAULT_TOL = 1e-10


class SolverFailure(Exception):
    """Factorization failed or the computed solution does not satisfy the
    linear system to tolerance."""


@dataclass
class SolveReport:
    n_sys: int
    factor_seconds: float
    n_solves: int = 0
    worst_rel_residual: float = 0.0


class StepSolver:
    def __init__(self, A_red, tol=DEFAULT_TOL):
        self.A = A_red.tocsc()
        self.tol = tol
        t0 = time.perf_counter()
        try:
            self.lu = splu(self.A)
        except Exception as err:
            raise SolverFailure(f"sparse LU factorization failed: {err}") from err
        self.report = SolveReport(
            n_sys=self.A.shape[0], factor_seconds=time.perf_counter() - t0
        )

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        x = self.lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SolverFailure("solution contains non-finite entries")
        normb = float(np.linalg.norm(rhs))
        res = float(np.linalg.norm(self.A @ x - rhs))
        rel = res / max(normb, 1e-30)
        if rel > self.tol:
            raise SolverFailure(
                f"relative residual {rel:.3e} exceeds tolerance {self.tol:.1e}"
            )
        self.report.n_solves += 1
        self.report.worst_rel_residual = max(self.report.worst_rel_residual, rel)
        return x
