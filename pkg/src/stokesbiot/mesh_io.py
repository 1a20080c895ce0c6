"""Mesh file formats: the native `sbmesh` text format and a Gmsh 2.2 reader.

The native format is line oriented::

    sbmesh 1
    vertices <n>
    <x> <y>                 (n lines)
    cells <m>
    <v0> <v1> <v2> <fluid|porous>
    boundary_edges <k>
    <v0> <v1> <gamma_f|gamma_pd|gamma_pn>

Vertex indices are zero based; cell vertex order is significant (it encodes
orientation and the refinement edge).  Gmsh meshes must be ASCII MSH 2.2 with
physical names fluid/porous on surfaces and gamma_f/gamma_pd/gamma_pn (and
optionally gamma_fp on the interface, which is checked against the derived
interface) on lines.
"""

import numpy as np

from .mesh import (
    FLUID,
    POROUS,
    GAMMA_F,
    GAMMA_PD,
    GAMMA_PN,
    GAMMA_FP,
    InvalidGeometryError,
    Mesh,
)

__all__ = ["MeshFormatError", "read_mesh", "write_mesh", "read_gmsh"]

_SUB_NAMES = {"fluid": FLUID, "porous": POROUS}
_SUB_BACK = {FLUID: "fluid", POROUS: "porous"}
_BTAG_NAMES = {"gamma_f": GAMMA_F, "gamma_pd": GAMMA_PD, "gamma_pn": GAMMA_PN}
_BTAG_BACK = {v: k for k, v in _BTAG_NAMES.items()}


class MeshFormatError(Exception):
    """Raised when a mesh file cannot be parsed."""


def write_mesh(mesh, path):
    lines = ["sbmesh 1"]
    lines.append(f"vertices {mesh.n_vertices}")
    for x, y in mesh.vertices:
        lines.append("%.17g %.17g" % (x, y))
    lines.append(f"cells {mesh.n_cells}")
    for (a, b, c), sub in zip(mesh.cells, mesh.cell_subdomain):
        lines.append(f"{a} {b} {c} {_SUB_BACK[int(sub)]}")
    items = sorted(mesh.boundary_tags.items())
    lines.append(f"boundary_edges {len(items)}")
    for (a, b), tag in items:
        lines.append(f"{a} {b} {_BTAG_BACK[tag]}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _tokens(path):
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if line:
                yield ln, line


def read_mesh(path):
    """Read a native sbmesh file; validation happens in the Mesh constructor."""
    it = _tokens(path)

    def next_line(what):
        try:
            return next(it)
        except StopIteration:
            raise MeshFormatError(f"unexpected end of file, expected {what}")

    ln, header = next_line("header")
    if header.split() != ["sbmesh", "1"]:
        raise MeshFormatError(f"line {ln}: bad header {header!r}")

    def block(name):
        ln, line = next_line(f"'{name} <count>'")
        parts = line.split()
        if len(parts) != 2 or parts[0] != name:
            raise MeshFormatError(f"line {ln}: expected '{name} <count>'")
        try:
            return int(parts[1])
        except ValueError:
            raise MeshFormatError(f"line {ln}: bad count {parts[1]!r}")

    nv = block("vertices")
    verts = np.empty((nv, 2))
    for i in range(nv):
        ln, line = next_line("vertex")
        parts = line.split()
        if len(parts) != 2:
            raise MeshFormatError(f"line {ln}: vertex needs two coordinates")
        try:
            verts[i] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshFormatError(f"line {ln}: bad coordinate")

    ncl = block("cells")
    cells = np.empty((ncl, 3), dtype=np.int64)
    sub = np.empty(ncl, dtype=np.int8)
    for i in range(ncl):
        ln, line = next_line("cell")
        parts = line.split()
        if len(parts) != 4 or parts[3] not in _SUB_NAMES:
            raise MeshFormatError(f"line {ln}: expected 'v0 v1 v2 fluid|porous'")
        try:
            cells[i] = [int(p) for p in parts[:3]]
        except ValueError:
            raise MeshFormatError(f"line {ln}: bad vertex index")
        sub[i] = _SUB_NAMES[parts[3]]

    nb = block("boundary_edges")
    tags = {}
    for i in range(nb):
        ln, line = next_line("boundary edge")
        parts = line.split()
        if len(parts) != 3 or parts[2] not in _BTAG_NAMES:
            raise MeshFormatError(
                f"line {ln}: expected 'v0 v1 gamma_f|gamma_pd|gamma_pn'"
            )
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise MeshFormatError(f"line {ln}: bad vertex index")
        tags[(a, b)] = _BTAG_NAMES[parts[2]]

    try:
        return Mesh(verts, cells, sub, tags)
    except InvalidGeometryError as exc:
        raise MeshFormatError(f"{path}: {exc}") from exc


def read_gmsh(path):
    """Read an ASCII Gmsh MSH 2.2 file with the expected physical names."""
    sections = {}
    name = None
    body = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("$End"):
                sections[name] = body
                name, body = None, []
            elif line.startswith("$"):
                name = line[1:]
                body = []
            elif name is not None:
                body.append(line)

    if "MeshFormat" not in sections:
        raise MeshFormatError("missing $MeshFormat section")
    fmt = sections["MeshFormat"][0].split()
    if not fmt or not fmt[0].startswith("2.2"):
        raise MeshFormatError(f"unsupported MSH version {fmt[:1]}; need 2.2 ASCII")
    if len(fmt) > 1 and fmt[1] != "0":
        raise MeshFormatError("binary MSH files are not supported")

    if "PhysicalNames" not in sections:
        raise MeshFormatError("missing $PhysicalNames section")
    phys = {}
    for line in sections["PhysicalNames"][1:]:
        parts = line.split(None, 2)
        if len(parts) != 3:
            raise MeshFormatError(f"bad physical name line {line!r}")
        dim, pid, pname = int(parts[0]), int(parts[1]), parts[2].strip().strip('"')
        phys[pid] = (dim, pname)

    if "Nodes" not in sections:
        raise MeshFormatError("missing $Nodes section")
    nodes = {}
    for line in sections["Nodes"][1:]:
        parts = line.split()
        if len(parts) < 4:
            raise MeshFormatError(f"bad node line {line!r}")
        try:
            nodes[int(parts[0])] = (float(parts[1]), float(parts[2]))
        except ValueError as err:
            raise MeshFormatError(f"bad node line {line!r}: {err}") from None
    renumber = {nid: k for k, nid in enumerate(sorted(nodes))}
    verts = np.array([nodes[nid] for nid in sorted(nodes)])

    if "Elements" not in sections:
        raise MeshFormatError("missing $Elements section")
    cells, sub, lines_tagged = [], [], []
    for line in sections["Elements"][1:]:
        parts = [int(p) for p in line.split()]
        if len(parts) < 3:
            raise MeshFormatError(f"bad element line {line!r}")
        etype, ntags = parts[1], parts[2]
        tags = parts[3 : 3 + ntags]
        conn = parts[3 + ntags :]
        pid = tags[0] if tags else None
        if pid not in phys:
            raise MeshFormatError(f"element with unknown physical id {pid}")
        _, pname = phys[pid]
        if etype == 2:
            if len(conn) != 3:
                raise MeshFormatError("triangle with wrong node count")
            if pname not in _SUB_NAMES:
                raise MeshFormatError(f"surface physical name {pname!r} unknown")
            tri = [renumber[n] for n in conn]
            # enforce counterclockwise orientation on import
            a, b, c = (verts[v] for v in tri)
            if (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) < 0:
                tri = [tri[0], tri[2], tri[1]]
            cells.append(tri)
            sub.append(_SUB_NAMES[pname])
        elif etype == 1:
            if len(conn) != 2:
                raise MeshFormatError("line element with wrong node count")
            if pname not in _BTAG_NAMES and pname != "gamma_fp":
                raise MeshFormatError(f"line physical name {pname!r} unknown")
            lines_tagged.append((renumber[conn[0]], renumber[conn[1]], pname))
        # other element types (points etc.) are ignored

    if not cells:
        raise MeshFormatError("no triangles in mesh")
    btags = {}
    iface_declared = set()
    for a, b, pname in lines_tagged:
        key = (a, b) if a < b else (b, a)
        if pname == "gamma_fp":
            iface_declared.add(key)
        else:
            btags[key] = _BTAG_NAMES[pname]

    try:
        mesh = Mesh(verts, np.array(cells), np.array(sub), btags)
    except InvalidGeometryError as exc:
        raise MeshFormatError(f"{path}: {exc}") from exc

    if iface_declared:
        derived = {
            (int(a), int(b))
            for a, b in mesh.edges[mesh.edge_tag == GAMMA_FP]
        }
        if iface_declared != derived:
            raise MeshFormatError(
                "declared gamma_fp lines disagree with the derived interface"
            )
    return mesh
