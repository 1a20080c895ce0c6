"""Error norms against manufactured references, convergence and effectivity
studies.

Norms follow the natural energy bookkeeping of the scheme: velocity error in
L2-in-time of the full H1 norm, filtration velocity and fluid pressure in
L2-in-time of L2, displacement in max-in-time of H1, pore pressure in
max-in-time of L2, and the multiplier in a mesh-weighted edge norm
(sum_E h_E ||.||_E^2)^(1/2) taken L2-in-time.  Time integrals use the
right-endpoint rectangle rule over the accepted steps, so the initial state
never enters; the combined error is the root-sum-square of the six.
"""

import math
from dataclasses import dataclass

import numpy as np

from .assembly import TimeGrid
from .driver import Problem, run_transient
from .mesh import refine_uniform, split_rectangle_mesh
from .quadrature import edge_rule, triangle_rule
from .spaces import build_dof_map, edge_point_bary, p1_grads_ref, p1_values, p2_grads_ref, p2_values

__all__ = [
    "ErrorNorms",
    "ErrorObserver",
    "convergence_study",
    "effectivity_study",
    "rates_from_records",
]

ERROR_DEGREE = 7


@dataclass
class ErrorNorms:
    e_f: float
    e_p: float
    e_s: float
    e_pp: float
    e_fp: float
    e_lam: float

    @property
    def combined(self):
        return math.sqrt(
            self.e_f**2
            + self.e_p**2
            + self.e_s**2
            + self.e_pp**2
            + self.e_fp**2
            + self.e_lam**2
        )

    def as_dict(self):
        return {
            "e_f": self.e_f,
            "e_p": self.e_p,
            "e_s": self.e_s,
            "e_pp": self.e_pp,
            "e_fp": self.e_fp,
            "e_lam": self.e_lam,
            "combined": self.combined,
        }


class ErrorObserver:
    """Accumulates the six error norms over a transient run."""

    def __init__(self, mesh, dofmap, case):
        self.mesh = mesh
        self.dm = dofmap
        self.case = case
        dm = dofmap

        rule = triangle_rule(ERROR_DEGREE)
        bary = np.column_stack(
            [1 - rule.points[:, 0] - rule.points[:, 1], rule.points[:, 0], rule.points[:, 1]]
        )
        _, Jinv, _ = mesh.affine_maps()

        FC = dm.fluid_cells
        self.Xf = np.einsum("qk,ckd->cqd", bary, mesh.vertices[mesh.cells[FC]])
        self.wf = 2.0 * mesh.cell_area[FC][:, None] * rule.weights[None, :]
        self.P2v = p2_values(bary)
        self.P2g = np.einsum("qbd,cde->cqbe", p2_grads_ref(bary), Jinv[FC])
        self.P1v = p1_values(bary)

        PC = dm.porous_cells
        self.Xp = np.einsum("qk,ckd->cqd", bary, mesh.vertices[mesh.cells[PC]])
        self.wp = 2.0 * mesh.cell_area[PC][:, None] * rule.weights[None, :]
        self.P1g_p = np.einsum("bd,cde->cbe", p1_grads_ref(), Jinv[PC])
        verts = mesh.vertices[mesh.cells[PC]]
        self.rt = np.einsum(
            "ck,cqkd->cqkd",
            dm.up_cell_signs,
            self.Xp[:, :, None, :] - verts[:, None, :, :],
        ) / (2.0 * mesh.cell_area[PC])[:, None, None, None]

        er = edge_rule(ERROR_DEGREE)
        self.lam_w = []
        self.lam_X = []
        self.lam_h = []
        for e in dm.iface_edges:
            a, b = mesh.edges[e]
            X = (1 - er.points)[:, None] * mesh.vertices[a] + er.points[
                :, None
            ] * mesh.vertices[b]
            L = mesh.edge_length[e]
            self.lam_X.append(X)
            self.lam_w.append(L * er.weights)
            self.lam_h.append(L)

        self._l2 = {"e_f": 0.0, "e_p": 0.0, "e_fp": 0.0, "e_lam": 0.0}
        self._linf = {"e_s": 0.0, "e_pp": 0.0}

    def start(self, problem, operator):
        pass

    def step(self, n, t, x, x_prev, dt):
        dm, case = self.dm, self.case
        sq = self.step_squares(x, t)
        for key in self._l2:
            self._l2[key] += dt * sq[key]
        for key in self._linf:
            self._linf[key] = max(self._linf[key], sq[key])

    def step_squares(self, x, t):
        """Squared spatial norms of all six errors at one time."""
        dm, case = self.dm, self.case
        out = {}

        c_uf = x[dm.full_slice("uf")][dm.uf_cell_dofs].reshape(-1, 6, 2)
        vals = np.einsum("qb,cbd->cqd", self.P2v, c_uf)
        grads = np.einsum("cqbe,cbd->cqde", self.P2g, c_uf)
        ex = case.uf.d(self.Xf[..., 0], self.Xf[..., 1], t)
        exg = case.uf.grad(self.Xf[..., 0], self.Xf[..., 1], t)
        dv = vals - ex
        dg = grads - exg
        out["e_f"] = float(
            np.einsum("cq,cqd,cqd->", self.wf, dv, dv)
            + np.einsum("cq,cqde,cqde->", self.wf, dg, dg)
        )

        c_pf = x[dm.full_slice("pf")][dm.pf_cell_dofs]
        vals = np.einsum("qb,cb->cq", self.P1v, c_pf)
        ex = case.pf.d(self.Xf[..., 0], self.Xf[..., 1], t)
        out["e_fp"] = float(np.einsum("cq,cq->", self.wf, (vals - ex) ** 2))

        c_up = x[dm.full_slice("up")][dm.up_cell_dofs]
        vals = np.einsum("cqkd,ck->cqd", self.rt, c_up)
        ex = case.up(self.Xp[..., 0], self.Xp[..., 1], t)
        dv = vals - ex
        out["e_p"] = float(np.einsum("cq,cqd,cqd->", self.wp, dv, dv))

        c_pp = x[dm.full_slice("pp")]
        ex = case.pp.d(self.Xp[..., 0], self.Xp[..., 1], t)
        dv = c_pp[:, None] - ex
        out["e_pp"] = float(np.einsum("cq,cq->", self.wp, dv * dv))

        c_eta = x[dm.full_slice("eta")][dm.eta_cell_dofs].reshape(-1, 3, 2)
        vals = np.einsum("qb,cbd->cqd", self.P1v, c_eta)
        grads = np.einsum("cbe,cbd->cde", self.P1g_p, c_eta)
        ex = case.eta.d(self.Xp[..., 0], self.Xp[..., 1], t)
        exg = case.eta.grad(self.Xp[..., 0], self.Xp[..., 1], t)
        dv = vals - ex
        dg = grads[:, None, :, :] - exg
        out["e_s"] = float(
            np.einsum("cq,cqd,cqd->", self.wp, dv, dv)
            + np.einsum("cq,cqde,cqde->", self.wp, dg, dg)
        )

        lam_h = x[dm.full_slice("lam")]
        acc = 0.0
        for k in range(len(dm.iface_edges)):
            ex = case.lam(self.lam_X[k][:, 0], self.lam_X[k][:, 1], t)
            acc += self.lam_h[k] * float(self.lam_w[k] @ (ex - lam_h[k]) ** 2)
        out["e_lam"] = acc
        return out

    def result(self):
        return ErrorNorms(
            e_f=math.sqrt(self._l2["e_f"]),
            e_p=math.sqrt(self._l2["e_p"]),
            e_s=math.sqrt(self._linf["e_s"]),
            e_pp=math.sqrt(self._linf["e_pp"]),
            e_fp=math.sqrt(self._l2["e_fp"]),
            e_lam=math.sqrt(self._l2["e_lam"]),
        )


def convergence_study(
    case,
    n_levels=4,
    nx0=2,
    ny0=2,
    t_end=0.25,
    dt0=0.125,
    with_estimator=False,
    estimator_options=None,
):
    """Uniform refinement study with dt scaled as h^2.

    Level k uses the base split mesh refined by 2k bisection sweeps (each
    pair of sweeps halves h) and time step dt0 / 4^k.  Returns one record
    per level with mesh data and all error norms; with_estimator also runs
    the residual estimator and records its totals.
    """
    base = split_rectangle_mesh(nx0, ny0)
    records = []
    mesh = base
    for level in range(n_levels):
        if level > 0:
            mesh = refine_uniform(mesh, sweeps=2)
        dt = dt0 / 4**level
        grid = TimeGrid(t_end, dt)
        prob = Problem.from_case(mesh, case, grid)
        errobs = ErrorObserver(mesh, prob.dofmap, case)
        observers = [errobs]
        estobs = None
        if with_estimator:
            from .estimator import EstimatorObserver

            estobs = EstimatorObserver(
                mesh, prob.dofmap, prob.params, prob.source, options=estimator_options
            )
            observers.append(estobs)
        run_transient(prob, observers=observers)
        errs = errobs.result()
        rec = {
            "level": level,
            "h_max": float(mesh.h_max),
            "n_cells": int(mesh.n_cells),
            "dofs": int(prob.dofmap.n_sys),
            "dt": dt,
            **errs.as_dict(),
        }
        if estobs is not None:
            est = estobs.result()
            rec["theta"] = est.theta_total
            rec["zeta"] = est.zeta_total
            rec["effectivity"] = est.theta_total / max(errs.combined, 1e-300)
        records.append(rec)
    return records


def effectivity_study(case, **kwargs):
    """Convergence study that also runs the estimator on every level."""
    kwargs.setdefault("with_estimator", True)
    return convergence_study(case, **kwargs)


def rates_from_records(records, key="combined"):
    """Observed orders between consecutive levels, log2 of error ratios."""
    rates = []
    for a, b in zip(records, records[1:]):
        ea, eb = a[key], b[key]
        if ea <= 0 or eb <= 0:
            rates.append(float("nan"))
        else:
            rates.append(math.log2(ea / eb))
    return rates
