"""Reference bases, dof maps, orientation signs, and edge traces.

Dof counts on the 2x2 split mesh are checked against a hand enumeration
(listed explicitly in the test); basis derivatives are checked against
central finite differences; RT0 flux normalization is checked by edge
quadrature against the defining dof functional.
"""

import numpy as np
import pytest

from stokesbiot.mesh import (
    FLUID,
    GAMMA_F,
    GAMMA_PD,
    GAMMA_PN,
    POROUS,
    refine,
    split_rectangle_mesh,
)
from stokesbiot.quadrature import edge_rule
from stokesbiot.spaces import (
    build_dof_map,
    edge_point_bary,
    p1_grads_ref,
    p1_values,
    p2_grads_ref,
    p2_hessians_ref,
    p2_values,
    rt0_cell_basis,
    trace_on_edge,
)


def random_bary(rng, n):
    b = rng.dirichlet((1.0, 1.0, 1.0), size=n)
    return b


def test_p1_partition_of_unity_and_nodal():
    rng = np.random.default_rng(0)
    b = random_bary(rng, 20)
    v = p1_values(b)
    assert np.allclose(v.sum(axis=-1), 1.0)
    nodes = np.eye(3)
    assert np.allclose(p1_values(nodes), np.eye(3))


def test_p2_partition_of_unity_and_nodal():
    rng = np.random.default_rng(1)
    b = random_bary(rng, 20)
    v = p2_values(b)
    assert np.allclose(v.sum(axis=-1), 1.0)
    # nodes: vertices then midpoints of edges opposite each vertex
    nodes = np.array(
        [
            [1, 0, 0],
            [0, 1, 0],
            [0, 0, 1],
            [0, 0.5, 0.5],
            [0.5, 0, 0.5],
            [0.5, 0.5, 0],
        ],
        dtype=float,
    )
    assert np.allclose(p2_values(nodes), np.eye(6), atol=1e-14)


def bary_of_xy(xy):
    x, y = xy[..., 0], xy[..., 1]
    return np.stack([1.0 - x - y, x, y], axis=-1)


def test_p2_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    xy = rng.random((30, 2)) * 0.45
    h = 1e-6
    grads = p2_grads_ref(bary_of_xy(xy))
    for d, e in ((0, np.array([h, 0.0])), (1, np.array([0.0, h]))):
        fd = (p2_values(bary_of_xy(xy + e)) - p2_values(bary_of_xy(xy - e))) / (2 * h)
        assert np.allclose(grads[..., d], fd, atol=1e-8)


def test_p2_hessians_match_finite_differences():
    H = p2_hessians_ref()
    xy = np.array([[0.21, 0.33]])
    h = 1e-4
    for a in range(2):
        ea = np.zeros(2)
        ea[a] = h
        fd = (
            p2_grads_ref(bary_of_xy(xy + ea)) - p2_grads_ref(bary_of_xy(xy - ea))
        ) / (2 * h)
        assert np.allclose(fd[0, :, :], H[:, :, a], atol=1e-9)


def test_p1_grads_are_exact():
    g = p1_grads_ref()
    assert np.allclose(g, [[-1, -1], [1, 0], [0, 1]])
    assert np.allclose(g.sum(axis=0), 0.0)


# -- dof map on the 2x2 split mesh ----------------------------------------
#
# Hand enumeration.  Vertices: 3x3 grid, interface along y = 0.5.
# Fluid: 4 cells, 6 vertices (rows y=0.5, y=1), 9 edges.
# Porous: 4 cells, 6 vertices (rows y=0, y=0.5), 9 edges.
# Interface edges: 2.
# Velocity: 2*(6+9) = 30 dofs; its boundary (top + two fluid sides) touches
# 5 vertices and 4 edges -> 18 constrained -> 12 free.
# Displacement: 12 dofs; every porous vertex except (0.5, 0.5) lies on the
# exterior porous boundary -> 2 free.
# Darcy flux: 9 dofs, 2 on the Neumann sides -> 7 free.


def test_dof_counts_match_hand_enumeration():
    mesh = split_rectangle_mesh(2, 2)
    dm = build_dof_map(mesh)
    assert dm.n_field == {
        "uf": 30,
        "pf": 6,
        "up": 9,
        "pp": 4,
        "eta": 12,
        "lam": 2,
    }
    counts = dm.dof_counts()
    assert counts["free"] == {
        "uf": 12,
        "pf": 6,
        "up": 7,
        "pp": 4,
        "eta": 2,
        "lam": 2,
    }
    assert counts["n_sys"] == 12 + 6 + 7 + 4 + 2 + 2


def test_only_interior_displacement_vertex_is_free():
    mesh = split_rectangle_mesh(2, 2)
    dm = build_dof_map(mesh)
    free_vert_locs = np.unique(np.where(dm.free["eta"])[0] // 2)
    vids = dm.porous_verts[free_vert_locs]
    assert np.allclose(mesh.vertices[vids], [[0.5, 0.5]])


def test_interface_vertices_clamped_in_displacement():
    # corner interface vertices sit on the Neumann sides, so they carry
    # boundary conditions even though they also touch the interface
    mesh = split_rectangle_mesh(2, 2)
    dm = build_dof_map(mesh)
    for xy in ([0.0, 0.5], [1.0, 0.5]):
        v = int(np.where((mesh.vertices == xy).all(axis=1))[0][0])
        loc = dm.porous_vert_loc[v]
        assert not dm.free["eta"][2 * loc]
        assert not dm.free["eta"][2 * loc + 1]


def test_sys_index_is_a_bijection_on_free_dofs():
    mesh = split_rectangle_mesh(3, 4)
    dm = build_dof_map(mesh)
    all_idx = np.concatenate([dm.sys[f][dm.free[f]] for f in dm.sys])
    assert np.array_equal(np.sort(all_idx), np.arange(dm.n_sys))
    for f in dm.sys:
        assert np.all(dm.sys[f][~dm.free[f]] == -1)


def test_uf_node_coordinates():
    mesh = split_rectangle_mesh(2, 2)
    dm = build_dof_map(mesh)
    assert dm.uf_node_xy.shape == (15, 2)
    # every node is a fluid vertex or a fluid edge midpoint, so y >= 0.5
    assert np.all(dm.uf_node_xy[:, 1] >= 0.5 - 1e-14)
    assert np.all(dm.eta_node_xy[:, 1] <= 0.5 + 1e-14)


def test_rt0_flux_normalization():
    mesh = split_rectangle_mesh(2, 2)
    dm = build_dof_map(mesh)
    rule = edge_rule(2)
    for cloc, c in enumerate(dm.porous_cells):
        cv = mesh.vertices[mesh.cells[c]]
        for k in range(3):
            e = mesh.cell_edges[c, k]
            a, b = mesh.edges[e]
            xy = (1 - rule.points)[:, None] * mesh.vertices[a] + rule.points[
                :, None
            ] * mesh.vertices[b]
            vals, divs = rt0_cell_basis(
                xy, cv, mesh.cell_area[c], dm.up_cell_signs[cloc]
            )
            L = mesh.edge_length[e]
            nglob = dm.edge_normal[e]
            for j in range(3):
                flux = L * np.einsum(
                    "q,qd,d->", rule.weights, vals[:, j, :], nglob
                )
                want = 1.0 if j == k else 0.0
                assert flux == pytest.approx(want, abs=1e-13), (c, j, k)
            assert np.allclose(
                divs, dm.up_cell_signs[cloc] / mesh.cell_area[c]
            )


def test_rt0_signs_opposite_across_interior_edges():
    mesh = split_rectangle_mesh(3, 2)
    dm = build_dof_map(mesh)
    ne = mesh.n_edges
    acc = np.zeros(ne)
    cnt = np.zeros(ne, dtype=int)
    for cloc, c in enumerate(dm.porous_cells):
        for k in range(3):
            e = mesh.cell_edges[c, k]
            acc[e] += dm.up_cell_signs[cloc, k]
            cnt[e] += 1
    shared = cnt == 2
    assert np.all(acc[shared] == 0)
    assert np.all(np.abs(acc[cnt == 1]) == 1)


def test_rt0_normal_trace_continuous():
    # a normal-flux dof shared by two cells produces the same normal
    # component from either side
    mesh = split_rectangle_mesh(2, 2)
    dm = build_dof_map(mesh)
    rng = np.random.default_rng(3)
    coeffs = rng.standard_normal(dm.n_field["up"])
    rule = edge_rule(3)
    for e in range(mesh.n_edges):
        cs = mesh.edge_cells[e]
        if cs[1] < 0:
            continue
        if not all(mesh.cell_subdomain[c] == POROUS for c in cs):
            continue
        tr0 = trace_on_edge(mesh, dm, "up", coeffs, e, cs[0], rule.points)
        tr1 = trace_on_edge(mesh, dm, "up", coeffs, e, cs[1], rule.points)
        n = dm.edge_normal[e]
        assert np.allclose(tr0 @ n, tr1 @ n, atol=1e-12)


def test_p2_trace_continuous_across_fluid_edges():
    mesh = split_rectangle_mesh(2, 2)
    dm = build_dof_map(mesh)
    rng = np.random.default_rng(4)
    coeffs = rng.standard_normal(dm.n_field["uf"])
    rule = edge_rule(4)
    for e in range(mesh.n_edges):
        cs = mesh.edge_cells[e]
        if cs[1] < 0:
            continue
        if not all(mesh.cell_subdomain[c] == FLUID for c in cs):
            continue
        tr0 = trace_on_edge(mesh, dm, "uf", coeffs, e, cs[0], rule.points)
        tr1 = trace_on_edge(mesh, dm, "uf", coeffs, e, cs[1], rule.points)
        assert np.allclose(tr0, tr1, atol=1e-12)


def test_edge_point_bary_consistent_between_cells():
    mesh = split_rectangle_mesh(2, 2)
    t = np.array([0.0, 0.3, 1.0])
    for e in range(mesh.n_edges):
        cs = mesh.edge_cells[e]
        if cs[1] < 0:
            continue
        xys = []
        for c in cs:
            b = edge_point_bary(mesh, c, e, t)
            xys.append(np.einsum("qk,kd->qd", b, mesh.vertices[mesh.cells[c]]))
        assert np.allclose(xys[0], xys[1])
        a, bv = mesh.edges[e]
        assert np.allclose(xys[0][0], mesh.vertices[a])
        assert np.allclose(xys[0][-1], mesh.vertices[bv])


def test_interface_orientation():
    mesh = split_rectangle_mesh(3, 2)
    dm = build_dof_map(mesh)
    # fluid occupies the upper half, so its outward normal on the interface
    # points down and the tangent is its quarter-turn counterclockwise
    assert np.allclose(dm.iface_normal_f, [0.0, -1.0])
    assert np.allclose(dm.iface_tangent, [1.0, 0.0])
    assert np.all(mesh.cell_subdomain[dm.iface_fluid_cell] == FLUID)
    assert np.all(mesh.cell_subdomain[dm.iface_porous_cell] == POROUS)


def test_dof_map_survives_refinement():
    mesh = split_rectangle_mesh(2, 2)
    mesh, _ = refine(mesh, np.array([1, 4]))
    mesh.validate()
    dm = build_dof_map(mesh)
    counts = dm.dof_counts()
    assert counts["n_sys"] > 0
    assert dm.n_field["uf"] == 2 * (len(dm.fluid_verts) + len(dm.fluid_edges))
    assert dm.n_field["lam"] == len(mesh.interface_edges)


def test_lam_trace_lookup():
    mesh = split_rectangle_mesh(2, 2)
    dm = build_dof_map(mesh)
    coeffs = np.array([3.0, 7.0])
    e = dm.iface_edges[1]
    c = dm.iface_fluid_cell[1]
    tr = trace_on_edge(mesh, dm, "lam", coeffs, e, c, np.array([0.25, 0.75]))
    assert np.allclose(tr, 7.0)
