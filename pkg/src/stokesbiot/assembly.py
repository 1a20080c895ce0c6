"""Monolithic block assembly for the backward-Euler step system.

Unknown ordering is (uf, pf, up, pp, eta, lam) over full entity dofs; the
step matrix splits as A0 + (1/dt) Mt where Mt collects every pairing that
acts on a backward time difference (the slip rate of the displacement in the
fluid momentum and multiplier rows, the storage mass, the alpha-coupling of
the dilatation rate, and the displacement-rate friction).  Assembling on full
dofs keeps Dirichlet handling out of the element loops: constrained values
enter through a lifting vector, and reduction to free dofs is a single slice.

Sign conventions.  All three divergence-coupling blocks use
b(v, w) = -(div v, w); the multiplier pairing on the interface is
b_G(v_f, xi, v_p; psi) = <v_f . n_f + (xi + v_p) . n_p, psi> and appears
untransposed in the momentum/elasticity rows (acting on lam) and transposed
in the multiplier row.  The friction (slip) terms carry the coefficient
mu alpha_bjs / sqrt(tau . K tau) per edge.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

from .mesh import GAMMA_PD, GAMMA_PN
from .model import ConfigError
from .quadrature import edge_rule, triangle_rule
from .spaces import edge_point_bary, p1_grads_ref, p1_values, p2_grads_ref, p2_values

__all__ = [
    "TimeGrid",
    "StepOperator",
    "assemble_operator",
    "assemble_load",
    "boundary_values",
    "initial_state",
    "interpolate_case",
    "reduce_system",
    "expand_solution",
]

CELL_DEGREE = 4
EDGE_DEGREE = 4


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, t_end] with step dt; dt must divide t_end."""

    t_end: float
    dt: float

    def __post_init__(self):
        if self.t_end <= 0 or self.dt <= 0:
            raise ConfigError("t_end and dt must be positive")
        ratio = self.t_end / self.dt
        if abs(ratio - round(ratio)) > 1e-8 * max(1.0, ratio):
            raise ConfigError(
                f"dt={self.dt} does not divide t_end={self.t_end}"
            )

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def times(self):
        return np.linspace(0.0, self.t_end, self.n_steps + 1)


class _Triplets:
    def __init__(self):
        self.i, self.j, self.v = [], [], []

    def add(self, rows, cols, vals):
        """rows (..., m), cols (..., k), vals (..., m, k) broadcast over
        leading axes; scatter the outer index product."""
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        vals = np.asarray(vals, dtype=float)
        ii = np.broadcast_to(rows[..., :, None], vals.shape)
        jj = np.broadcast_to(cols[..., None, :], vals.shape)
        self.i.append(ii.ravel())
        self.j.append(jj.ravel())
        self.v.append(vals.ravel())

    def build(self, n):
        if not self.i:
            return sparse.csr_matrix((n, n))
        i = np.concatenate(self.i)
        j = np.concatenate(self.j)
        v = np.concatenate(self.v)
        return sparse.coo_matrix((v, (i, j)), shape=(n, n)).tocsr()


def _cell_rule():
    rule = triangle_rule(CELL_DEGREE)
    bary = np.column_stack(
        [1.0 - rule.points[:, 0] - rule.points[:, 1], rule.points[:, 0], rule.points[:, 1]]
    )
    return rule, bary


def _phys_points(mesh, cells, bary):
    return np.einsum("qk,ckd->cqd", bary, mesh.vertices[mesh.cells[cells]])


def _vector_stiffness(Jinv, area, wq, Gref, two_mu, lam):
    """Element matrices of 2*mu (D(u), D(v)) + lam (div u, div v) for a
    vector element built from the scalar basis with reference gradients Gref.
    Dof interleaving is 2*basis + component."""
    GP = np.einsum("qbd,cde->cqbe", Gref, Jinv) if Gref.ndim == 3 else np.einsum(
        "bd,cde->cbe", Gref, Jinv
    )
    nb = Gref.shape[-2]
    nc = len(area)
    if GP.ndim == 3:  # constant gradients (P1): fold the quadrature weight
        X = np.einsum("c,cbd,cke->cbdke", area, GP, GP)
    else:
        w = 2.0 * area[:, None] * wq[None, :]
        X = np.einsum("cq,cqbd,cqke->cbdke", w, GP, GP)
    graddot = np.einsum("cbdkd->cbk", X)
    mu = 0.5 * two_mu
    K = np.zeros((nc, 2 * nb, 2 * nb))
    for cc in range(2):
        for dd in range(2):
            blk = mu * X[:, :, dd, :, cc] + lam * X[:, :, cc, :, dd]
            if cc == dd:
                blk = blk + mu * graddot
            K[:, cc::2, dd::2] = blk
    return K


def _interface_data(mesh, dofmap, params):
    """Per-interface-edge quantities shared by matrix and load assembly."""
    erule = edge_rule(EDGE_DEGREE)
    t = erule.points
    out = []
    for k, e in enumerate(dofmap.iface_edges):
        cf = int(dofmap.iface_fluid_cell[k])
        cp = int(dofmap.iface_porous_cell[k])
        L = float(mesh.edge_length[e])
        n_f = dofmap.iface_normal_f[k]
        n_p = -n_f
        tau = dofmap.iface_tangent[k]
        c_bjs = params.bjs_coefficient(tau)
        p2v = p2_values(edge_point_bary(mesh, cf, e, t))  # (nq, 6)
        p1v = p1_values(edge_point_bary(mesh, cp, e, t))  # (nq, 3)
        tvec_f = np.einsum("qb,c->qbc", p2v, tau).reshape(len(t), 12)
        nvec_f = np.einsum("qb,c->qbc", p2v, n_f).reshape(len(t), 12)
        tvec_e = np.einsum("qb,c->qbc", p1v, tau).reshape(len(t), 6)
        nvec_e = np.einsum("qb,c->qbc", p1v, n_p).reshape(len(t), 6)
        vvec_e = p1v[:, :, None] * np.ones(2)  # (nq, 3, 2) for vector loads
        a, b = mesh.edges[e]
        X = (1.0 - t)[:, None] * mesh.vertices[a] + t[:, None] * mesh.vertices[b]
        s_np = float(np.sign(n_p @ dofmap.edge_normal[e]))
        uf_dofs = dofmap.uf_cell_dofs[dofmap.fluid_cell_loc[cf]]
        eta_dofs = dofmap.eta_cell_dofs[dofmap.porous_cell_loc[cp]]
        up_dof = dofmap.porous_edge_loc[e]
        out.append(
            dict(
                k=k,
                L=L,
                w=erule.weights,
                c_bjs=c_bjs,
                tvec_f=tvec_f,
                nvec_f=nvec_f,
                tvec_e=tvec_e,
                nvec_e=nvec_e,
                p1v=p1v,
                X=X,
                s_np=s_np,
                uf_dofs=uf_dofs,
                eta_dofs=eta_dofs,
                up_dof=up_dof,
            )
        )
    return out


class StepOperator:
    """Time-independent pieces of the step system on one mesh.

    matrix(dt) returns the full monolithic matrix; the load and lifting
    assemblers live alongside so a time loop touches one object.
    """

    def __init__(self, mesh, dofmap, params):
        self.mesh = mesh
        self.dofmap = dofmap
        self.params = params
        self._assemble()

    def _assemble(self):
        mesh, dm, prm = self.mesh, self.dofmap, self.params
        off = dm.full_offset
        a0 = _Triplets()
        mt = _Triplets()
        rule, bary = _cell_rule()
        J, Jinv, _ = mesh.affine_maps()

        # fluid cells: viscous block, pressure coupling
        F = dm.fluid_cells
        areaF = mesh.cell_area[F]
        G2 = p2_grads_ref(bary)  # (nq, 6, 2)
        AF = _vector_stiffness(Jinv[F], areaF, rule.weights, G2, 2.0 * prm.mu, 0.0)
        uf_rows = off["uf"] + dm.uf_cell_dofs
        a0.add(uf_rows, uf_rows, AF)

        # BFp[(b,cc), k] = -int d_cc phi_b psi_k
        GP2 = np.einsum("qbd,cde->cqbe", G2, Jinv[F])
        P1 = p1_values(bary)  # (nq, 3)
        wF = 2.0 * areaF[:, None] * rule.weights[None, :]
        DXP = np.einsum("cq,cqbd,qk->cbdk", wF, GP2, P1)  # int d_d phi_b psi_k
        BFp = np.zeros((len(F), 12, 3))
        for cc in range(2):
            BFp[:, cc::2, :] = -DXP[:, :, cc, :]
        pf_cols = off["pf"] + dm.pf_cell_dofs
        a0.add(uf_rows, pf_cols, BFp)
        a0.add(pf_cols, uf_rows, -np.transpose(BFp, (0, 2, 1)))

        # porous cells: Darcy mass, divergence couplings, elasticity
        P = dm.porous_cells
        areaP = mesh.cell_area[P]
        XP = _phys_points(mesh, P, bary)  # (ncp, nq, 2)
        verts = mesh.vertices[mesh.cells[P]]  # (ncp, 3, 2)
        signs = dm.up_cell_signs  # (ncp, 3)
        rt = np.einsum(
            "ck,cqkd->cqkd",
            signs,
            XP[:, :, None, :] - verts[:, None, :, :],
        ) / (2.0 * areaP)[:, None, None, None]
        wP = 2.0 * areaP[:, None] * rule.weights[None, :]
        Kinv = prm.Kinv
        APD = prm.mu * np.einsum("cq,cqjd,de,cqke->cjk", wP, rt, Kinv, rt)
        up_rows = off["up"] + dm.up_cell_dofs
        a0.add(up_rows, up_rows, APD)

        # BPp[j, cell] = -int div phi_j = -sign_j ; exact
        pp_cols = off["pp"] + np.arange(dm.n_field["pp"])[:, None]
        a0.add(up_rows, pp_cols, -signs[:, :, None])
        a0.add(pp_cols, up_rows, np.transpose(signs[:, :, None], (0, 2, 1)))

        # storage mass (pp, pp) into Mt
        if prm.s0 > 0:
            mt.add(
                pp_cols,
                pp_cols,
                prm.s0 * areaP[:, None, None] * np.ones((1, 1, 1)),
            )

        # BPE[(b,cc), cell] = -int d_cc phi_b  (P1 grads constant)
        GP1 = np.einsum("bd,cde->cbe", p1_grads_ref(), Jinv[P])  # (ncp, 3, 2)
        BPE = np.zeros((len(P), 6, 1))
        for cc in range(2):
            BPE[:, cc::2, 0] = -areaP[:, None] * GP1[:, :, cc]
        eta_rows = off["eta"] + dm.eta_cell_dofs
        a0.add(eta_rows, pp_cols, prm.alpha * BPE)
        # pp row: + alpha d/dt div eta  -> -alpha BPE^T into Mt
        mt.add(pp_cols, eta_rows, -prm.alpha * np.transpose(BPE, (0, 2, 1)))

        APE = _vector_stiffness(
            Jinv[P], areaP, rule.weights, p1_grads_ref(), 2.0 * prm.mu_p, prm.lambda_p
        )
        a0.add(eta_rows, eta_rows, APE)

        # interface terms
        self._iface = _interface_data(mesh, dm, prm)
        for d in self._iface:
            Lw = d["L"] * d["w"]
            ufr = off["uf"] + d["uf_dofs"]
            etr = off["eta"] + d["eta_dofs"]
            lamr = np.array([off["lam"] + d["k"]])
            upr = np.array([off["up"] + d["up_dof"]])
            c = d["c_bjs"]
            a0.add(ufr, ufr, c * np.einsum("q,qi,qj->ij", Lw, d["tvec_f"], d["tvec_f"]))
            mt.add(ufr, etr, -c * np.einsum("q,qi,qj->ij", Lw, d["tvec_f"], d["tvec_e"]))
            a0.add(etr, ufr, -c * np.einsum("q,qi,qj->ij", Lw, d["tvec_e"], d["tvec_f"]))
            mt.add(etr, etr, c * np.einsum("q,qi,qj->ij", Lw, d["tvec_e"], d["tvec_e"]))
            gf = np.einsum("q,qi->i", Lw, d["nvec_f"])[:, None]
            a0.add(ufr, lamr, gf)
            a0.add(lamr, ufr, gf.T)
            ge = np.einsum("q,qi->i", Lw, d["nvec_e"])[:, None]
            a0.add(etr, lamr, ge)
            mt.add(lamr, etr, ge.T)
            gp = np.array([[d["s_np"]]])
            a0.add(upr, lamr, gp)
            a0.add(lamr, upr, gp)

        n = dm.n_full
        self.A0 = a0.build(n)
        self.Mt = mt.build(n)

    def matrix(self, dt):
        return (self.A0 + self.Mt / dt).tocsr()

    def history_rhs(self, dt, x_prev_full):
        """(1/dt) Mt x_prev: the backward-difference part of the load."""
        return self.Mt @ x_prev_full / dt


def assemble_operator(mesh, dofmap, params):
    return StepOperator(mesh, dofmap, params)


def _eval(fun, *args, default_shape=None):
    if fun is None:
        return np.zeros(default_shape)
    return np.asarray(fun(*args), dtype=float)


def assemble_load(mesh, dofmap, params, source, t, operator=None):
    """Full right-hand side F(t): body forces, mass sources, interface data,
    and the porous Dirichlet pressure.  The backward-difference history term
    is added separately by the caller."""
    dm = dofmap
    off = dm.full_offset
    F = np.zeros(dm.n_full)
    rule, bary = _cell_rule()

    # fluid loads
    FC = dm.fluid_cells
    XF = _phys_points(mesh, FC, bary)
    wF = 2.0 * mesh.cell_area[FC][:, None] * rule.weights[None, :]
    if source.f_f is not None:
        ff = _eval(source.f_f, XF[..., 0], XF[..., 1], t)
        P2 = p2_values(bary)
        vals = np.einsum("cq,qb,cqd->cbd", wF, P2, ff)
        np.add.at(
            F,
            (off["uf"] + dm.uf_cell_dofs).ravel(),
            vals.reshape(len(FC), 12 // 2, 2).reshape(len(FC), 12).ravel(),
        )
    if source.q_f is not None:
        qf = _eval(source.q_f, XF[..., 0], XF[..., 1], t)
        P1 = p1_values(bary)
        vals = np.einsum("cq,qb,cq->cb", wF, P1, qf)
        np.add.at(F, (off["pf"] + dm.pf_cell_dofs).ravel(), vals.ravel())

    # porous loads
    PC = dm.porous_cells
    XP = _phys_points(mesh, PC, bary)
    wP = 2.0 * mesh.cell_area[PC][:, None] * rule.weights[None, :]
    if source.f_p is not None:
        fp = _eval(source.f_p, XP[..., 0], XP[..., 1], t)
        P1 = p1_values(bary)
        vals = np.einsum("cq,qb,cqd->cbd", wP, P1, fp)
        np.add.at(
            F,
            (off["eta"] + dm.eta_cell_dofs).ravel(),
            vals.reshape(len(PC), 6).ravel(),
        )
    if source.q_p is not None:
        qp = _eval(source.q_p, XP[..., 0], XP[..., 1], t)
        vals = np.einsum("cq,cq->c", wP, qp)
        F[off["pp"] : off["pp"] + dm.n_field["pp"]] += vals

    # porous Dirichlet pressure on the normal-flux dofs
    pd_edges = np.where(mesh.edge_tag == GAMMA_PD)[0]
    if len(pd_edges) and source.bc_pressure is not None:
        erule = edge_rule(EDGE_DEGREE)
        for e in pd_edges:
            c = int(mesh.edge_cells[e][mesh.edge_cells[e] >= 0][0])
            k = int(np.where(mesh.cell_edges[c] == e)[0][0])
            s = dm.up_cell_signs[dm.porous_cell_loc[c], k]
            a, b = mesh.edges[e]
            X = (1 - erule.points)[:, None] * mesh.vertices[a] + erule.points[
                :, None
            ] * mesh.vertices[b]
            pd = _eval(source.bc_pressure, X[:, 0], X[:, 1], t)
            F[off["up"] + dm.porous_edge_loc[e]] += -s * float(erule.weights @ pd)

    # interface data
    iface = operator._iface if operator is not None else _interface_data(mesh, dm, params)
    for d in iface:
        Lw = d["L"] * d["w"]
        X = d["X"]
        if source.g4 is not None:
            g4 = _eval(source.g4, X[:, 0], X[:, 1], t)
            np.add.at(
                F,
                off["uf"] + d["uf_dofs"],
                np.einsum("q,q,qi->i", Lw, g4, d["tvec_f"]),
            )
            np.add.at(
                F,
                off["eta"] + d["eta_dofs"],
                -np.einsum("q,q,qi->i", Lw, g4, d["tvec_e"]),
            )
        if source.g3 is not None:
            g3 = _eval(source.g3, X[:, 0], X[:, 1], t)
            vals = np.einsum("q,qb,qd->bd", Lw, d["p1v"], g3).reshape(6)
            np.add.at(F, off["eta"] + d["eta_dofs"], vals)
        if source.g2 is not None:
            g2 = _eval(source.g2, X[:, 0], X[:, 1], t)
            F[off["up"] + d["up_dof"]] += -d["s_np"] * float(Lw @ g2) / d["L"]
        if source.g1 is not None:
            g1 = _eval(source.g1, X[:, 0], X[:, 1], t)
            F[off["lam"] + d["k"]] += float(Lw @ g1)
    return F


def boundary_values(mesh, dofmap, source, t):
    """Lifting vector: constrained dofs carry their Dirichlet values at time
    t, free dofs are zero."""
    dm = dofmap
    g = np.zeros(dm.n_full)
    off = dm.full_offset

    cmask = ~dm.free["uf"][0::2]
    if cmask.any():
        xy = dm.uf_node_xy[cmask]
        vals = (
            _eval(source.bc_velocity, xy[:, 0], xy[:, 1], t)
            if source.bc_velocity is not None
            else np.zeros((len(xy), 2))
        )
        idx = np.where(cmask)[0]
        g[off["uf"] + 2 * idx] = vals[:, 0]
        g[off["uf"] + 2 * idx + 1] = vals[:, 1]

    emask = ~dm.free["eta"][0::2]
    if emask.any():
        xy = dm.eta_node_xy[emask]
        vals = (
            _eval(source.bc_displacement, xy[:, 0], xy[:, 1], t)
            if source.bc_displacement is not None
            else np.zeros((len(xy), 2))
        )
        idx = np.where(emask)[0]
        g[off["eta"] + 2 * idx] = vals[:, 0]
        g[off["eta"] + 2 * idx + 1] = vals[:, 1]

    pn_edges = np.where(mesh.edge_tag == GAMMA_PN)[0]
    if len(pn_edges) and source.bc_flux is not None:
        erule = edge_rule(EDGE_DEGREE)
        for e in pn_edges:
            c = int(mesh.edge_cells[e][mesh.edge_cells[e] >= 0][0])
            k = int(np.where(mesh.cell_edges[c] == e)[0][0])
            s = dm.up_cell_signs[dm.porous_cell_loc[c], k]
            n_out = s * dm.edge_normal[e]
            a, b = mesh.edges[e]
            X = (1 - erule.points)[:, None] * mesh.vertices[a] + erule.points[
                :, None
            ] * mesh.vertices[b]
            flux = _eval(source.bc_flux, X[:, 0], X[:, 1], t, n_out[0], n_out[1])
            L = mesh.edge_length[e]
            # dof is the flux along the global edge normal
            g[off["up"] + dm.porous_edge_loc[e]] = s * L * float(erule.weights @ flux)
    return g


def initial_state(mesh, dofmap, source):
    """State vector at t=0.  Only the pore pressure (cell means) and the
    displacement (vertex interpolant) matter: they are the only fields the
    backward difference reaches."""
    dm = dofmap
    x0 = np.zeros(dm.n_full)
    off = dm.full_offset
    if source.pp_initial is not None:
        rule, bary = _cell_rule()
        X = _phys_points(mesh, dm.porous_cells, bary)
        vals = np.asarray(source.pp_initial(X[..., 0], X[..., 1]), dtype=float)
        x0[dm.full_slice("pp")] = 2.0 * np.einsum("q,cq->c", rule.weights, vals)
    if source.eta_initial is not None:
        xy = dm.eta_node_xy
        vals = np.asarray(source.eta_initial(xy[:, 0], xy[:, 1]), dtype=float)
        x0[off["eta"] + 2 * np.arange(len(xy))] = vals[:, 0]
        x0[off["eta"] + 2 * np.arange(len(xy)) + 1] = vals[:, 1]
    return x0


def interpolate_case(mesh, dofmap, case, t):
    """Interpolate all six exact fields of a manufactured case into the
    discrete spaces at time t (nodal for P2/P1, edge fluxes for the Darcy
    velocity, cell/edge means for the piecewise constants)."""
    dm = dofmap
    x = np.zeros(dm.n_full)
    off = dm.full_offset

    xy = dm.uf_node_xy
    vals = case.uf.d(xy[:, 0], xy[:, 1], t)
    x[off["uf"] + 2 * np.arange(len(xy))] = vals[:, 0]
    x[off["uf"] + 2 * np.arange(len(xy)) + 1] = vals[:, 1]

    xy = dm.pf_node_xy
    x[dm.full_slice("pf")] = case.pf.d(xy[:, 0], xy[:, 1], t)

    erule = edge_rule(EDGE_DEGREE)
    for eloc, e in enumerate(dm.porous_edges):
        a, b = mesh.edges[e]
        X = (1 - erule.points)[:, None] * mesh.vertices[a] + erule.points[
            :, None
        ] * mesh.vertices[b]
        up = case.up(X[:, 0], X[:, 1], t)
        L = mesh.edge_length[e]
        x[off["up"] + eloc] = L * float(
            erule.weights @ (up @ dm.edge_normal[e])
        )

    rule, bary = _cell_rule()
    X = _phys_points(mesh, dm.porous_cells, bary)
    x[dm.full_slice("pp")] = 2.0 * np.einsum(
        "q,cq->c", rule.weights, case.pp.d(X[..., 0], X[..., 1], t)
    )

    xy = dm.eta_node_xy
    vals = case.eta.d(xy[:, 0], xy[:, 1], t)
    x[off["eta"] + 2 * np.arange(len(xy))] = vals[:, 0]
    x[off["eta"] + 2 * np.arange(len(xy)) + 1] = vals[:, 1]

    for k, e in enumerate(dm.iface_edges):
        a, b = mesh.edges[e]
        X = (1 - erule.points)[:, None] * mesh.vertices[a] + erule.points[
            :, None
        ] * mesh.vertices[b]
        x[off["lam"] + k] = float(erule.weights @ case.lam(X[:, 0], X[:, 1], t))
    return x


def reduce_system(A_full, rhs_full, dofmap, lifting):
    """Eliminate constrained dofs: keep free rows/cols, move the lifting
    contribution to the right-hand side."""
    free = dofmap.full_free
    A_red = A_full[free][:, free]
    rhs_red = (rhs_full - A_full @ lifting)[free]
    return A_red.tocsc(), rhs_red


def expand_solution(x_red, dofmap, lifting):
    x = lifting.copy()
    x[dofmap.full_free] = x_red
    return x
