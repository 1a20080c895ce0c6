"""Conforming triangle meshes of a rectangle split into a free-flow region
stacked on a porous region, with newest-vertex bisection refinement.

Storage conventions
-------------------
Cells are triples of vertex indices, counterclockwise.  Local edge k of a cell
is the edge opposite local vertex k.  The refinement edge of every cell is its
local edge 0 (the edge between local vertices 1 and 2), so the first stored
vertex is the newest-vertex "peak".  Bisection inserts the midpoint m of the
refinement edge and produces children (m, v0, v1) and (m, v2, v0), both again
counterclockwise with peak m.

Edges are stored once, as sorted vertex pairs.  Interior edges are tagged by
the subdomain they sit in; edges whose two incident cells lie in different
subdomains form the interface.  Exterior edges must carry a boundary tag
supplied at construction (the structured builder and the mesh readers do
this); a missing tag is treated as a conformity defect and rejected.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FLUID",
    "POROUS",
    "INTERIOR_FLUID",
    "INTERIOR_POROUS",
    "GAMMA_F",
    "GAMMA_PD",
    "GAMMA_PN",
    "GAMMA_FP",
    "BOUNDARY_TAGS",
    "InvalidGeometryError",
    "Mesh",
    "CellGeometry",
    "split_rectangle_mesh",
    "refine",
    "refine_uniform",
]

FLUID = 0
POROUS = 1

INTERIOR_FLUID = 0
INTERIOR_POROUS = 1
GAMMA_F = 2
GAMMA_PD = 3
GAMMA_PN = 4
GAMMA_FP = 5

BOUNDARY_TAGS = (GAMMA_F, GAMMA_PD, GAMMA_PN)

TAG_NAMES = {
    INTERIOR_FLUID: "interior_fluid",
    INTERIOR_POROUS: "interior_porous",
    GAMMA_F: "gamma_f",
    GAMMA_PD: "gamma_pd",
    GAMMA_PN: "gamma_pn",
    GAMMA_FP: "gamma_fp",
}


class InvalidGeometryError(Exception):
    """Raised for degenerate, non-conforming, or inconsistently tagged input."""


def _edge_key(a, b):
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CellGeometry:
    """Geometric record of one triangle.

    `normals[k]` is the outward unit normal of local edge k (the edge opposite
    local vertex k); `tangents[k]` is the unit tangent along that edge, with
    normals[k] = rot_right(tangents[k]).  `rho` is the inscribed-circle
    diameter 4*area/perimeter.
    """

    h: float
    area: float
    rho: float
    edge_lengths: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray


class Mesh:
    """Immutable conforming triangulation of the split rectangle."""

    def __init__(self, vertices, cells, cell_subdomain, boundary_tags):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        self.cell_subdomain = np.ascontiguousarray(cell_subdomain, dtype=np.int8)
        self.boundary_tags = {
            _edge_key(*k): int(t) for k, t in boundary_tags.items()
        }
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise InvalidGeometryError("vertices must be an (n, 2) array")
        if self.cells.ndim != 2 or self.cells.shape[1] != 3:
            raise InvalidGeometryError("cells must be an (n, 3) array")
        if self.cell_subdomain.shape != (self.cells.shape[0],):
            raise InvalidGeometryError("one subdomain label per cell required")
        if not np.isfinite(self.vertices).all():
            raise InvalidGeometryError("non-finite vertex coordinates")
        if self.cells.size and (
            self.cells.min() < 0 or self.cells.max() >= len(self.vertices)
        ):
            raise InvalidGeometryError("cell refers to a missing vertex")
        if not np.isin(self.cell_subdomain, (FLUID, POROUS)).all():
            raise InvalidGeometryError("unknown subdomain label")
        self._build_geometry()
        self._build_topology()
        self.validate()

    # -- construction ------------------------------------------------------

    def _build_geometry(self):
        v = self.vertices[self.cells]  # (nc, 3, 2)
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if (area2 <= 0).any():
            bad = int(np.argmax(area2 <= 0))
            raise InvalidGeometryError(
                f"cell {bad} is degenerate or clockwise (doubled area {area2[bad]:g})"
            )
        self.cell_area = 0.5 * area2
        # local edge k runs from vertex k+1 to vertex k+2 (mod 3)
        tvec = v[:, [2, 0, 1], :] - v[:, [1, 2, 0], :]  # (nc, 3, 2)
        self.cell_edge_length = np.linalg.norm(tvec, axis=2)
        self.cell_h = self.cell_edge_length.max(axis=1)
        self.cell_rho = 4.0 * self.cell_area / self.cell_edge_length.sum(axis=1)
        tang = tvec / self.cell_edge_length[:, :, None]
        self._cell_tangents = tang
        self._cell_normals = np.stack([tang[:, :, 1], -tang[:, :, 0]], axis=2)

    def _build_topology(self):
        nc = len(self.cells)
        raw = self.cells[:, [[1, 2], [0, 2], [0, 1]]].reshape(-1, 2)
        raw.sort(axis=1)
        edges, inv = np.unique(raw, axis=0, return_inverse=True)
        self.edges = edges
        self.cell_edges = inv.reshape(nc, 3)
        counts = np.bincount(inv, minlength=len(edges))
        if counts.max(initial=0) > 2:
            raise InvalidGeometryError("an edge is shared by more than two cells")
        edge_cells = np.full((len(edges), 2), -1, dtype=np.int64)
        order = np.argsort(inv, kind="stable")
        pos = np.zeros(len(edges), dtype=np.int64)
        for f in order:
            e = inv[f]
            edge_cells[e, pos[e]] = f // 3
            pos[e] += 1
        self.edge_cells = edge_cells
        self.edge_length = np.linalg.norm(
            self.vertices[edges[:, 1]] - self.vertices[edges[:, 0]], axis=1
        )

        tag = np.empty(len(edges), dtype=np.int8)
        interior = edge_cells[:, 1] >= 0
        sub0 = self.cell_subdomain[edge_cells[:, 0]]
        sub1 = np.where(interior, self.cell_subdomain[edge_cells[:, 1]], sub0)
        same = sub0 == sub1
        tag[interior & same & (sub0 == FLUID)] = INTERIOR_FLUID
        tag[interior & same & (sub0 == POROUS)] = INTERIOR_POROUS
        tag[interior & ~same] = GAMMA_FP
        for e in np.where(~interior)[0]:
            key = (int(edges[e, 0]), int(edges[e, 1]))
            if key not in self.boundary_tags:
                raise InvalidGeometryError(
                    f"boundary edge {key} has no tag (hanging node or missing data)"
                )
            tag[e] = self.boundary_tags[key]
        self.edge_tag = tag
        self._edge_index = {
            (int(a), int(b)): e for e, (a, b) in enumerate(edges)
        }

    def validate(self):
        """Audit conformity and tag consistency; raise on any defect."""
        interior = self.edge_cells[:, 1] >= 0
        for key in self.boundary_tags:
            e = self._edge_index.get(key)
            if e is None:
                raise InvalidGeometryError(f"tag refers to a missing edge {key}")
            if interior[e]:
                raise InvalidGeometryError(f"tag on interior edge {key}")
            if self.boundary_tags[key] not in BOUNDARY_TAGS:
                raise InvalidGeometryError(f"unknown boundary tag on {key}")
        sub0 = self.cell_subdomain[self.edge_cells[:, 0]]
        for e in np.where(~interior)[0]:
            t = self.edge_tag[e]
            if t == GAMMA_F and sub0[e] != FLUID:
                raise InvalidGeometryError("gamma_f edge on a porous cell")
            if t in (GAMMA_PD, GAMMA_PN) and sub0[e] != POROUS:
                raise InvalidGeometryError("porous boundary edge on a fluid cell")
        iface = np.where(self.edge_tag == GAMMA_FP)[0]
        for e in iface:
            c0, c1 = self.edge_cells[e]
            if c1 < 0:
                raise InvalidGeometryError("interface edge with a single cell")
            if {int(self.cell_subdomain[c0]), int(self.cell_subdomain[c1])} != {
                FLUID,
                POROUS,
            }:
                raise InvalidGeometryError("interface edge without mixed subdomains")

    # -- simple queries ----------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def h_max(self):
        return float(self.cell_h.max())

    @property
    def refinement_edge(self):
        """Global edge index of each cell's refinement edge (local edge 0)."""
        return self.cell_edges[:, 0]

    @property
    def interface_edges(self):
        return np.where(self.edge_tag == GAMMA_FP)[0]

    def cells_where(self, subdomain):
        return np.where(self.cell_subdomain == subdomain)[0]

    def edge_index(self, a, b):
        return self._edge_index[_edge_key(int(a), int(b))]

    def local_edge(self, cell, edge):
        """Local index (0..2) of global `edge` within `cell`."""
        loc = np.where(self.cell_edges[cell] == edge)[0]
        if len(loc) != 1:
            raise KeyError(f"edge {edge} not on cell {cell}")
        return int(loc[0])

    def cell_geometry(self, cell):
        c = int(cell)
        return CellGeometry(
            h=float(self.cell_h[c]),
            area=float(self.cell_area[c]),
            rho=float(self.cell_rho[c]),
            edge_lengths=self.cell_edge_length[c].copy(),
            normals=self._cell_normals[c].copy(),
            tangents=self._cell_tangents[c].copy(),
        )

    def outward_normal(self, cell, edge):
        return self._cell_normals[cell, self.local_edge(cell, edge)]

    def affine_maps(self):
        """Jacobians J, inverses, and origin vertices of the affine reference
        maps x = x0 + J (xi, eta), one per cell."""
        v = self.vertices[self.cells]
        J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
        det = 2.0 * self.cell_area
        Jinv = np.empty_like(J)
        Jinv[:, 0, 0] = J[:, 1, 1] / det
        Jinv[:, 0, 1] = -J[:, 0, 1] / det
        Jinv[:, 1, 0] = -J[:, 1, 0] / det
        Jinv[:, 1, 1] = J[:, 0, 0] / det
        return J, Jinv, v[:, 0]


def split_rectangle_mesh(
    nx,
    ny,
    x0=0.0,
    x1=1.0,
    y0=0.0,
    y1=1.0,
    y_interface=0.5,
    porous_side_tag=GAMMA_PN,
    porous_bottom_tag=GAMMA_PD,
):
    """Structured mesh of [x0,x1] x [y0,y1] with the fluid region above the
    horizontal interface y = y_interface and the porous region below it.

    The y grid is the uniform ny-interval grid with the interface line forced
    in, so the interface is always resolved by mesh edges; each grid quad is
    split along its (i,j)->(i+1,j+1) diagonal into two right triangles whose
    refinement edge is that diagonal (two bisection sweeps then reproduce
    uniform quartering).  Exterior fluid edges are tagged gamma_f; the porous
    bottom and sides get the given tags (pressure boundary at the bottom,
    no-flow sides by default, keeping the pressure boundary away from the
    interface).
    """
    if not (nx >= 1 and ny >= 1):
        raise InvalidGeometryError("nx and ny must be at least 1")
    if not (x0 < x1 and y0 < y1):
        raise InvalidGeometryError("empty rectangle")
    if not (y0 < y_interface < y1):
        raise InvalidGeometryError("interface must lie strictly inside [y0, y1]")
    if porous_side_tag not in (GAMMA_PD, GAMMA_PN) or porous_bottom_tag not in (
        GAMMA_PD,
        GAMMA_PN,
    ):
        raise InvalidGeometryError("porous boundary tags must be gamma_pd/gamma_pn")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    tol = 1e-12 * (y1 - y0)
    if np.abs(ys - y_interface).min() > tol:
        ys = np.sort(np.append(ys, y_interface))
    nrow = len(ys) - 1
    ncol = nx

    vid = lambda i, j: j * (ncol + 1) + i
    xv, yv = np.meshgrid(xs, ys)
    vertices = np.column_stack([xv.ravel(), yv.ravel()])

    cells = []
    subdomain = []
    for j in range(nrow):
        row_sub = FLUID if ys[j] >= y_interface - tol else POROUS
        for i in range(ncol):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            # peak-first ordering puts the diagonal (b, d) as the refinement
            # edge of both triangles
            cells.append((b, c, a))
            cells.append((d, a, c))
            subdomain += [row_sub, row_sub]
    cells = np.array(cells, dtype=np.int64)

    tags = {}
    for i in range(ncol):
        tags[_edge_key(vid(i, 0), vid(i + 1, 0))] = porous_bottom_tag
        tags[_edge_key(vid(i, nrow), vid(i + 1, nrow))] = GAMMA_F
    for j in range(nrow):
        side = GAMMA_F if ys[j] >= y_interface - tol else porous_side_tag
        tags[_edge_key(vid(0, j), vid(0, j + 1))] = side
        tags[_edge_key(vid(ncol, j), vid(ncol, j + 1))] = side

    return Mesh(vertices, cells, subdomain, tags)


def refine(mesh, marked):
    """Bisect the marked cells (newest-vertex rule) plus the closure needed
    for conformity.  Returns (refined mesh, parent) with parent[i] the index
    in `mesh` of the cell that child i came from; marked cells are bisected at
    least once and every cell is bisected at most twice per call.
    """
    marked = np.asarray(marked)
    if marked.dtype == bool:
        if marked.shape != (mesh.n_cells,):
            raise ValueError("boolean mark array has wrong length")
        marked = np.where(marked)[0]
    if marked.size == 0:
        return mesh, np.arange(mesh.n_cells)
    if marked.min() < 0 or marked.max() >= mesh.n_cells:
        raise ValueError("marked cell index out of range")

    ref_edge = mesh.cell_edges[:, 0]
    split = np.zeros(mesh.n_edges, dtype=bool)
    split[ref_edge[marked]] = True
    while True:
        need = split[mesh.cell_edges].any(axis=1) & ~split[ref_edge]
        if not need.any():
            break
        split[ref_edge[need]] = True

    split_ids = np.where(split)[0]
    mid_of = np.full(mesh.n_edges, -1, dtype=np.int64)
    mid_of[split_ids] = mesh.n_vertices + np.arange(len(split_ids))
    midpoints = 0.5 * (
        mesh.vertices[mesh.edges[split_ids, 0]]
        + mesh.vertices[mesh.edges[split_ids, 1]]
    )
    vertices = np.vstack([mesh.vertices, midpoints])

    new_cells = []
    new_sub = []
    parent = []

    def emit(tri, sub, par):
        new_cells.append(tri)
        new_sub.append(sub)
        parent.append(par)

    for c in range(mesh.n_cells):
        v0, v1, v2 = (int(v) for v in mesh.cells[c])
        e0, e1, e2 = mesh.cell_edges[c]
        sub = mesh.cell_subdomain[c]
        if not split[e0]:
            emit((v0, v1, v2), sub, c)
            continue
        m = int(mid_of[e0])
        # children keep the midpoint as peak; their refinement edges are the
        # parent's remaining edges e2 = (v0,v1) and e1 = (v2,v0)
        for child, echild in (((m, v0, v1), e2), ((m, v2, v0), e1)):
            if split[echild]:
                m2 = int(mid_of[echild])
                p, a, b = child
                emit((m2, p, a), sub, c)
                emit((m2, b, p), sub, c)
            else:
                emit(child, sub, c)

    tags = {}
    for (va, vb), t in mesh.boundary_tags.items():
        e = mesh.edge_index(va, vb)
        if split[e]:
            m = int(mid_of[e])
            tags[_edge_key(va, m)] = t
            tags[_edge_key(m, vb)] = t
        else:
            tags[(va, vb)] = t

    refined = Mesh(vertices, np.array(new_cells), np.array(new_sub), tags)
    return refined, np.array(parent)


def refine_uniform(mesh, sweeps=2):
    """Bisect every cell `sweeps` times; two sweeps halve h on the structured
    meshes produced by split_rectangle_mesh."""
    for _ in range(sweeps):
        mesh, _ = refine(mesh, np.arange(mesh.n_cells))
    return mesh
