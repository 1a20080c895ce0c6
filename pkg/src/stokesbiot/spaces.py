"""Finite element spaces on the split mesh and their degree-of-freedom maps.

The discretization is fixed: Taylor-Hood (continuous vector P2 velocity,
continuous P1 pressure) on the fluid cells, lowest-order Raviart-Thomas flux
with piecewise-constant pressure on the porous cells, continuous vector P1
displacement on the porous cells clamped on the whole exterior porous
boundary, and an edgewise-constant multiplier on the interface.

Reference bases live on the triangle (0,0),(1,0),(0,1) in barycentric
coordinates; the RT0 basis is evaluated directly in physical coordinates
(which is what the contravariant Piola map of the reference basis produces):
for local edge k opposite vertex p_k,

    phi_k(x) = sign_k * (x - p_k) / (2 |K|),   div phi_k = sign_k / |K|,

normalized so the dof is the total flux across the edge in the direction of
the globally fixed edge normal (rot-right of the lower-to-higher vertex
direction); sign_k is +-1 according to whether that global normal points out
of the cell.
"""

from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .mesh import FLUID, POROUS, GAMMA_F, GAMMA_PD, GAMMA_PN, GAMMA_FP

__all__ = [
    "SpaceDescriptor",
    "FIELD_SPECS",
    "DofMap",
    "build_dof_map",
    "eval_basis",
    "p1_values",
    "p1_grads_ref",
    "p2_values",
    "p2_grads_ref",
    "p2_hessians_ref",
    "rt0_cell_basis",
    "edge_point_bary",
    "trace_on_edge",
]

FIELD_ORDER = ("uf", "pf", "up", "pp", "eta", "lam")


@dataclass(frozen=True)
class SpaceDescriptor:
    """What a field is discretized with and where it lives."""

    name: str
    family: str
    degree: int
    components: int
    subdomain: str
    constrained_on: tuple = field(default_factory=tuple)


FIELD_SPECS = {
    "uf": SpaceDescriptor("uf", "P", 2, 2, "fluid", (GAMMA_F,)),
    "pf": SpaceDescriptor("pf", "P", 1, 1, "fluid"),
    "up": SpaceDescriptor("up", "RT", 0, 2, "porous", (GAMMA_PN,)),
    "pp": SpaceDescriptor("pp", "DP", 0, 1, "porous"),
    "eta": SpaceDescriptor("eta", "P", 1, 2, "porous", (GAMMA_PD, GAMMA_PN)),
    "lam": SpaceDescriptor("lam", "DP", 0, 1, "interface"),
}


# -- reference bases -------------------------------------------------------

_P1_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def p1_values(bary):
    """P1 nodal basis = the barycentric coordinates themselves."""
    return np.asarray(bary, dtype=float)


def p1_grads_ref():
    """Reference gradients of the P1 basis, shape (3, 2)."""
    return _P1_GRADS.copy()


def p2_values(bary):
    """P2 nodal basis at barycentric points.

    Ordering: three vertex functions, then the midpoint function of local
    edge k (the edge opposite vertex k) for k = 0, 1, 2.  Output shape is
    bary.shape[:-1] + (6,).
    """
    b = np.asarray(bary, dtype=float)
    out = np.empty(b.shape[:-1] + (6,))
    for i in range(3):
        out[..., i] = b[..., i] * (2.0 * b[..., i] - 1.0)
    for k in range(3):
        out[..., 3 + k] = 4.0 * b[..., (k + 1) % 3] * b[..., (k + 2) % 3]
    return out


def p2_grads_ref(bary):
    """Reference-coordinate gradients of the P2 basis, shape (..., 6, 2)."""
    b = np.asarray(bary, dtype=float)
    out = np.empty(b.shape[:-1] + (6, 2))
    for i in range(3):
        out[..., i, :] = (4.0 * b[..., i, None] - 1.0) * _P1_GRADS[i]
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        out[..., 3 + k, :] = 4.0 * (
            b[..., i, None] * _P1_GRADS[j] + b[..., j, None] * _P1_GRADS[i]
        )
    return out


def p2_hessians_ref():
    """Constant reference Hessians of the P2 basis, shape (6, 2, 2)."""
    H = np.empty((6, 2, 2))
    for i in range(3):
        H[i] = 4.0 * np.outer(_P1_GRADS[i], _P1_GRADS[i])
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        H[3 + k] = 4.0 * (
            np.outer(_P1_GRADS[i], _P1_GRADS[j])
            + np.outer(_P1_GRADS[j], _P1_GRADS[i])
        )
    return H


def rt0_cell_basis(xy, cell_vertices, area, signs):
    """RT0 basis values at physical points for one cell.

    xy: (..., 2) physical points; cell_vertices: (3, 2); signs: (3,).
    Returns values of shape (..., 3, 2) and the three constant divergences.
    """
    xy = np.asarray(xy, dtype=float)
    vals = np.empty(xy.shape[:-1] + (3, 2))
    for k in range(3):
        vals[..., k, :] = signs[k] * (xy - cell_vertices[k]) / (2.0 * area)
    divs = signs / area
    return vals, divs


def eval_basis(family, degree, bary):
    """Dispatch reference-basis evaluation by family name (P1/P2/DP0)."""
    if family == "P" and degree == 1:
        return p1_values(bary)
    if family == "P" and degree == 2:
        return p2_values(bary)
    if family == "DP" and degree == 0:
        b = np.asarray(bary, dtype=float)
        return np.ones(b.shape[:-1] + (1,))
    raise ValueError(f"no reference tabulation for {family}{degree}")


def edge_point_bary(mesh, cell, edge, t):
    """Barycentric coordinates, in `cell`, of points on `edge` at parameters
    t in [0,1] measured from the lower-indexed to the higher-indexed vertex
    of the edge (a global convention, so the two sides of an interior edge
    see the same physical points)."""
    a, b = mesh.edges[edge]
    cv = mesh.cells[cell]
    la = int(np.where(cv == a)[0][0])
    lb = int(np.where(cv == b)[0][0])
    t = np.asarray(t, dtype=float)
    bary = np.zeros(t.shape + (3,))
    bary[..., la] = 1.0 - t
    bary[..., lb] = t
    return bary


def trace_on_edge(mesh, dofmap, field, coeffs, edge, cell, t):
    """Field values on `edge` seen from `cell`, at edge parameters `t`.

    `coeffs` is the full entity-dof vector of `field`.  Scalar fields return
    shape t.shape; vector fields t.shape + (2,).
    """
    t = np.asarray(t, dtype=float)
    if field == "lam":
        loc = dofmap.iface_edge_loc[edge]
        if loc < 0:
            raise KeyError("edge is not on the interface")
        return np.full(t.shape, coeffs[loc])
    if field == "pp":
        loc = dofmap.pp_cell_of[cell]
        return np.full(t.shape, coeffs[loc])
    bary = edge_point_bary(mesh, cell, edge, t)
    if field == "pf":
        vals = p1_values(bary)
        return vals @ coeffs[dofmap.pf_vertex_loc[mesh.cells[cell]]]
    if field == "uf":
        vals = p2_values(bary)  # (nq, 6)
        dofs = dofmap.uf_cell_dofs[dofmap.fluid_cell_loc[cell]]
        cu = coeffs[dofs].reshape(6, 2)
        return vals @ cu
    if field == "eta":
        vals = p1_values(bary)
        dofs = dofmap.eta_cell_dofs[dofmap.porous_cell_loc[cell]]
        ce = coeffs[dofs].reshape(3, 2)
        return vals @ ce
    if field == "up":
        xy = (1.0 - t)[:, None] * mesh.vertices[mesh.edges[edge, 0]] + t[
            :, None
        ] * mesh.vertices[mesh.edges[edge, 1]]
        cloc = dofmap.porous_cell_loc[cell]
        vals, _ = rt0_cell_basis(
            xy,
            mesh.vertices[mesh.cells[cell]],
            mesh.cell_area[cell],
            dofmap.up_cell_signs[cloc],
        )
        return np.einsum("qkd,k->qd", vals, coeffs[dofmap.up_cell_dofs[cloc]])
    raise ValueError(f"unknown field {field!r}")


# -- dof map ---------------------------------------------------------------


class DofMap:
    """Entity-based dof numbering for all six fields plus the free/constrained
    split used for Dirichlet elimination with boundary-value lifting.

    Full per-field dof vectors are indexed 0..n_field-1; `sys[field]` maps
    each full dof either to its row in the reduced (free) system or to -1 if
    it is constrained.  Velocity dofs interleave components (2*node + comp);
    P2 velocity nodes are the fluid vertices followed by the fluid edge
    midpoints.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        nv, ne, nc = mesh.n_vertices, mesh.n_edges, mesh.n_cells

        self.fluid_cells = mesh.cells_where(FLUID)
        self.porous_cells = mesh.cells_where(POROUS)
        if len(self.fluid_cells) == 0 or len(self.porous_cells) == 0:
            raise ValueError("both subdomains must be nonempty")
        self.fluid_cell_loc = _loc_array(nc, self.fluid_cells)
        self.porous_cell_loc = _loc_array(nc, self.porous_cells)

        fluid_edge_mask = np.zeros(ne, dtype=bool)
        fluid_edge_mask[mesh.cell_edges[self.fluid_cells].ravel()] = True
        porous_edge_mask = np.zeros(ne, dtype=bool)
        porous_edge_mask[mesh.cell_edges[self.porous_cells].ravel()] = True
        self.fluid_edges = np.where(fluid_edge_mask)[0]
        self.porous_edges = np.where(porous_edge_mask)[0]
        self.fluid_edge_loc = _loc_array(ne, self.fluid_edges)
        self.porous_edge_loc = _loc_array(ne, self.porous_edges)

        fluid_vert_mask = np.zeros(nv, dtype=bool)
        fluid_vert_mask[mesh.cells[self.fluid_cells].ravel()] = True
        porous_vert_mask = np.zeros(nv, dtype=bool)
        porous_vert_mask[mesh.cells[self.porous_cells].ravel()] = True
        self.fluid_verts = np.where(fluid_vert_mask)[0]
        self.porous_verts = np.where(porous_vert_mask)[0]
        self.fluid_vert_loc = _loc_array(nv, self.fluid_verts)
        self.porous_vert_loc = _loc_array(nv, self.porous_verts)

        self.iface_edges = mesh.interface_edges
        self.iface_edge_loc = _loc_array(ne, self.iface_edges)

        nfv, nfe = len(self.fluid_verts), len(self.fluid_edges)
        npv, npe = len(self.porous_verts), len(self.porous_edges)
        self.n_field = {
            "uf": 2 * (nfv + nfe),
            "pf": nfv,
            "up": npe,
            "pp": len(self.porous_cells),
            "eta": 2 * npv,
            "lam": len(self.iface_edges),
        }
        self.n_uf_nodes = nfv + nfe

        # aliases used by trace/interp helpers
        self.pf_vertex_loc = self.fluid_vert_loc
        self.pp_cell_of = self.porous_cell_loc

        # cell gather tables -------------------------------------------------
        fcells = mesh.cells[self.fluid_cells]  # (ncf, 3)
        fedges = mesh.cell_edges[self.fluid_cells]  # (ncf, 3)
        vnode = self.fluid_vert_loc[fcells]  # node ids of vertex dofs
        enode = nfv + self.fluid_edge_loc[fedges]
        nodes = np.concatenate([vnode, enode], axis=1)  # (ncf, 6)
        self.uf_cell_dofs = np.empty((len(self.fluid_cells), 12), dtype=np.int64)
        self.uf_cell_dofs[:, 0::2] = 2 * nodes
        self.uf_cell_dofs[:, 1::2] = 2 * nodes + 1
        self.pf_cell_dofs = vnode.copy()

        pcells = mesh.cells[self.porous_cells]
        pedges = mesh.cell_edges[self.porous_cells]
        self.up_cell_dofs = self.porous_edge_loc[pedges]
        pvert = self.porous_vert_loc[pcells]
        self.eta_cell_dofs = np.empty((len(self.porous_cells), 6), dtype=np.int64)
        self.eta_cell_dofs[:, 0::2] = 2 * pvert
        self.eta_cell_dofs[:, 1::2] = 2 * pvert + 1

        # global edge normals and per-cell orientation signs
        evec = mesh.vertices[mesh.edges[:, 1]] - mesh.vertices[mesh.edges[:, 0]]
        evec /= np.linalg.norm(evec, axis=1)[:, None]
        self.edge_normal = np.column_stack([evec[:, 1], -evec[:, 0]])
        outward = mesh._cell_normals[self.porous_cells]  # (ncp, 3, 2)
        glob = self.edge_normal[pedges]  # (ncp, 3, 2)
        dots = np.einsum("ckd,ckd->ck", outward, glob)
        self.up_cell_signs = np.where(dots > 0, 1.0, -1.0)

        # interface orientation: fluid side fixes n_f, tau = rot_left(n_f)
        pairs = mesh.edge_cells[self.iface_edges]
        is_fluid0 = mesh.cell_subdomain[pairs[:, 0]] == FLUID
        self.iface_fluid_cell = np.where(is_fluid0, pairs[:, 0], pairs[:, 1])
        self.iface_porous_cell = np.where(is_fluid0, pairs[:, 1], pairs[:, 0])
        nf = np.empty((len(self.iface_edges), 2))
        for k, e in enumerate(self.iface_edges):
            c = self.iface_fluid_cell[k]
            nf[k] = mesh._cell_normals[c, _local_edge(mesh, c, e)]
        self.iface_normal_f = nf
        self.iface_tangent = np.column_stack([-nf[:, 1], nf[:, 0]])

        # constraints --------------------------------------------------------
        free = {f: np.ones(self.n_field[f], dtype=bool) for f in FIELD_ORDER}

        gf_edges = np.where(mesh.edge_tag == GAMMA_F)[0]
        gf_verts = np.unique(mesh.edges[gf_edges].ravel())
        for v in gf_verts:
            loc = self.fluid_vert_loc[v]
            free["uf"][2 * loc] = free["uf"][2 * loc + 1] = False
        for e in gf_edges:
            node = nfv + self.fluid_edge_loc[e]
            free["uf"][2 * node] = free["uf"][2 * node + 1] = False

        gp_edges = np.where(
            (mesh.edge_tag == GAMMA_PD) | (mesh.edge_tag == GAMMA_PN)
        )[0]
        gp_verts = np.unique(mesh.edges[gp_edges].ravel())
        for v in gp_verts:
            loc = self.porous_vert_loc[v]
            free["eta"][2 * loc] = free["eta"][2 * loc + 1] = False

        gpn_edges = np.where(mesh.edge_tag == GAMMA_PN)[0]
        free["up"][self.porous_edge_loc[gpn_edges]] = False

        self.free = free
        self.sys = {}
        offset = 0
        self.block_slice = {}
        for f in FIELD_ORDER:
            idx = np.full(self.n_field[f], -1, dtype=np.int64)
            nfree = int(free[f].sum())
            idx[free[f]] = offset + np.arange(nfree)
            self.sys[f] = idx
            self.block_slice[f] = slice(offset, offset + nfree)
            offset += nfree
        self.n_sys = offset

        # monolithic layout over ALL entity dofs (free and constrained);
        # the reduced system keeps rows/cols listed in full_free
        self.full_offset = {}
        off = 0
        for f in FIELD_ORDER:
            self.full_offset[f] = off
            off += self.n_field[f]
        self.n_full = off
        self.full_free = np.concatenate(
            [self.full_offset[f] + np.where(self.free[f])[0] for f in FIELD_ORDER]
        )

        # node coordinates for interpolation
        mids = 0.5 * (
            mesh.vertices[mesh.edges[self.fluid_edges, 0]]
            + mesh.vertices[mesh.edges[self.fluid_edges, 1]]
        )
        self.uf_node_xy = np.vstack([mesh.vertices[self.fluid_verts], mids])
        self.pf_node_xy = mesh.vertices[self.fluid_verts]
        self.eta_node_xy = mesh.vertices[self.porous_verts]

    def dof_counts(self):
        out = dict(self.n_field)
        out["free"] = {f: int(self.free[f].sum()) for f in FIELD_ORDER}
        out["n_sys"] = self.n_sys
        return out

    def full_slice(self, field):
        off = self.full_offset[field]
        return slice(off, off + self.n_field[field])


def _loc_array(n, ids):
    loc = np.full(n, -1, dtype=np.int64)
    loc[ids] = np.arange(len(ids))
    return loc


def _local_edge(mesh, cell, edge):
    return int(np.where(mesh.cell_edges[cell] == edge)[0][0])


def build_dof_map(mesh):
    return DofMap(mesh)


# re-export the quadrature entry points under the spaces namespace, since the
# rules are part of the discretization contract
triangle_rule = quadrature.triangle_rule
edge_rule = quadrature.edge_rule
QuadratureRule = quadrature.QuadratureRule
