"""Round trips and error handling for the text mesh formats."""

import numpy as np
import pytest

from stokesbiot.mesh import GAMMA_F, GAMMA_FP, GAMMA_PD, GAMMA_PN, split_rectangle_mesh
from stokesbiot.mesh_io import MeshFormatError, read_gmsh, read_mesh, write_mesh

TAG_WORD = {GAMMA_F: "gamma_f", GAMMA_PD: "gamma_pd", GAMMA_PN: "gamma_pn"}


def test_roundtrip_exact(tmp_path):
    mesh = split_rectangle_mesh(3, 2, x0=-0.25, x1=1.75, y0=0.0, y1=1.0, y_interface=0.5)
    path = tmp_path / "m.sbmesh"
    write_mesh(mesh, path)
    back = read_mesh(path)
    # %.17g round-trips float64 exactly
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.cells, mesh.cells)
    assert np.array_equal(back.cell_subdomain, mesh.cell_subdomain)
    assert np.array_equal(back.edge_tag, mesh.edge_tag)
    back.validate()


def test_roundtrip_after_refinement(tmp_path):
    mesh = split_rectangle_mesh(2, 2)
    from stokesbiot.mesh import refine

    mesh, _ = refine(mesh, np.array([0, 3, 5]))
    path = tmp_path / "r.sbmesh"
    write_mesh(mesh, path)
    back = read_mesh(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.edge_tag, mesh.edge_tag)


def test_comments_and_blank_lines_ignored(tmp_path):
    mesh = split_rectangle_mesh(1, 2)
    path = tmp_path / "m.sbmesh"
    write_mesh(mesh, path)
    text = path.read_text()
    spiced = "# leading comment\n\n" + text.replace(
        "cells", "# about to list cells\ncells", 1
    )
    path2 = tmp_path / "m2.sbmesh"
    path2.write_text(spiced)
    back = read_mesh(path2)
    assert np.array_equal(back.cells, mesh.cells)


@pytest.mark.parametrize(
    "mangle,needle",
    [
        (lambda t: t.replace("sbmesh 1", "sbmesh 9", 1), "header"),
        (lambda t: t.replace("fluid", "liquid", 1), "fluid|porous"),
        (lambda t: t.replace("gamma_f", "gamma_x", 1), "gamma"),
        (lambda t: "\n".join(t.splitlines()[:-2]) + "\n", ""),
    ],
)
def test_malformed_files_rejected(tmp_path, mangle, needle):
    mesh = split_rectangle_mesh(1, 2)
    path = tmp_path / "m.sbmesh"
    write_mesh(mesh, path)
    bad = tmp_path / "bad.sbmesh"
    bad.write_text(mangle(path.read_text()))
    with pytest.raises(MeshFormatError) as exc:
        read_mesh(bad)
    if needle:
        assert needle in str(exc.value).lower()


def as_gmsh(mesh, flip_cells=(), with_interface_lines=True, interface_override=None):
    """Serialize a mesh to Gmsh MSH 2.2 ASCII by hand."""
    names = {1: "fluid", 2: "porous", 3: "gamma_f", 4: "gamma_pd", 5: "gamma_pn", 6: "gamma_fp"}
    lines = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$PhysicalNames", str(len(names))]
    for pid, nm in names.items():
        dim = 2 if nm in ("fluid", "porous") else 1
        lines.append(f'{dim} {pid} "{nm}"')
    lines.append("$EndPhysicalNames")
    lines.append("$Nodes")
    lines.append(str(mesh.n_vertices))
    for i, (x, y) in enumerate(mesh.vertices, start=1):
        lines.append(f"{i} {float(x)!r} {float(y)!r} 0")
    lines.append("$EndNodes")
    elems = []
    eid = 1
    for e in range(mesh.n_edges):
        tag = mesh.edge_tag[e]
        if tag in TAG_WORD:
            pid = {GAMMA_F: 3, GAMMA_PD: 4, GAMMA_PN: 5}[tag]
            a, b = mesh.edges[e] + 1
            elems.append(f"{eid} 1 2 {pid} 0 {a} {b}")
            eid += 1
        elif tag == GAMMA_FP and with_interface_lines:
            a, b = (mesh.edges[e] + 1) if interface_override is None else interface_override
            elems.append(f"{eid} 1 2 6 0 {a} {b}")
            eid += 1
    for c in range(mesh.n_cells):
        pid = 1 if mesh.cell_subdomain[c] == 0 else 2
        tri = mesh.cells[c] + 1
        if c in flip_cells:
            tri = tri[[0, 2, 1]]
        elems.append(f"{eid} 2 2 {pid} 0 {tri[0]} {tri[1]} {tri[2]}")
        eid += 1
    lines += ["$Elements", str(len(elems))] + elems + ["$EndElements", ""]
    return "\n".join(lines)


def test_gmsh_roundtrip(tmp_path):
    mesh = split_rectangle_mesh(2, 2)
    path = tmp_path / "m.msh"
    path.write_text(as_gmsh(mesh))
    back = read_gmsh(path)
    back.validate()
    assert back.n_cells == mesh.n_cells
    assert back.cell_area.sum() == pytest.approx(mesh.cell_area.sum())
    assert np.array_equal(np.sort(back.edge_tag), np.sort(mesh.edge_tag))
    assert len(back.interface_edges) == len(mesh.interface_edges)


def test_gmsh_clockwise_cells_reoriented(tmp_path):
    mesh = split_rectangle_mesh(2, 2)
    path = tmp_path / "m.msh"
    path.write_text(as_gmsh(mesh, flip_cells=(0, 5)))
    back = read_gmsh(path)
    assert np.all(back.cell_area > 0)


def test_gmsh_interface_lines_optional(tmp_path):
    mesh = split_rectangle_mesh(2, 2)
    path = tmp_path / "m.msh"
    path.write_text(as_gmsh(mesh, with_interface_lines=False))
    back = read_gmsh(path)
    assert len(back.interface_edges) == len(mesh.interface_edges)


def test_gmsh_wrong_interface_line_rejected(tmp_path):
    mesh = split_rectangle_mesh(2, 2)
    path = tmp_path / "m.msh"
    # claim a bottom edge is the interface
    bottom = [
        e
        for e in range(mesh.n_edges)
        if mesh.edge_tag[e] == GAMMA_PD
    ][0]
    path.write_text(
        as_gmsh(mesh, interface_override=tuple(mesh.edges[bottom] + 1))
    )
    with pytest.raises(MeshFormatError):
        read_gmsh(path)


def test_gmsh_bad_version_rejected(tmp_path):
    path = tmp_path / "m.msh"
    path.write_text("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n")
    with pytest.raises(MeshFormatError):
        read_gmsh(path)
