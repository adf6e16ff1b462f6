"""Simplicial meshes for the reactor test domains.

Structured generators for the unit square, the L-shaped domain, the unit
cube and the unit disk, plus a reader and writer for a small subset of
the MSH 2.2 ASCII format used to ship the reactor geometry with region
and boundary tags.

All generators return a validated :class:`Mesh`: cells are oriented to
positive signed volume, conformity is checked (every interior facet is
shared by exactly two cells) and the boundary facet list is recomputed
from the cells so it is exactly the set of one-cell facets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mesh",
    "MeshFormatError",
    "generate_unit_square",
    "generate_lshape",
    "generate_unit_cube",
    "generate_disk",
    "read_gmsh",
    "write_msh",
    "mesh_size",
    "cell_volumes",
]


class MeshFormatError(ValueError):
    """Raised for malformed or unsupported mesh files, with a line number."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}" if loc else message)


def _all_facets(cells):
    """Every (d-1)-facet of every cell, vertex-sorted, stacked by dropped column."""
    nloc = cells.shape[1]
    parts = []
    for drop in range(nloc):
        keep = [i for i in range(nloc) if i != drop]
        parts.append(cells[:, keep])
    fac = np.vstack(parts)
    fac = np.sort(fac, axis=1)
    return fac


def _signed_volumes(vertices, cells):
    dim = vertices.shape[1]
    v0 = vertices[cells[:, 0]]
    edges = np.stack([vertices[cells[:, j]] - v0 for j in range(1, dim + 1)], axis=-1)
    if dim == 2:
        det = edges[:, 0, 0] * edges[:, 1, 1] - edges[:, 0, 1] * edges[:, 1, 0]
        return det / 2.0
    det = np.linalg.det(edges)
    return det / 6.0


@dataclass(frozen=True)
class Mesh:
    """Immutable simplicial mesh with per-cell region tags and tagged boundary.

    Parameters
    ----------
    dim : int
        Ambient (and topological) dimension, 2 or 3.
    vertices : (nv, dim) float array
    cells : (nc, dim+1) int array
        Simplices; reoriented to positive signed volume on construction.
    region_tags : (nc,) int array
        Material region per cell; tags must form a contiguous set {1..R}.
    boundary_facets : (nb, dim) int array or None
        Tagged boundary facets. If None the true boundary of the cell
        complex is extracted and tagged 1. If given, every listed facet
        must actually lie on the boundary; boundary facets not listed
        default to tag 1.
    boundary_tags : (nb,) int array or None
    resolution_hint : int or None
        The generator's N, when the mesh came from a generator.
    """

    dim: int
    vertices: np.ndarray
    cells: np.ndarray
    region_tags: np.ndarray
    boundary_facets: np.ndarray | None = None
    boundary_tags: np.ndarray | None = None
    resolution_hint: int | None = field(default=None, compare=False)

    def __post_init__(self):
        dim = self.dim
        if dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {dim}")
        verts = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        cells = np.ascontiguousarray(np.asarray(self.cells, dtype=np.int64))
        rtags = np.ascontiguousarray(np.asarray(self.region_tags, dtype=np.int64))
        if verts.ndim != 2 or verts.shape[1] != dim:
            raise ValueError(f"vertices must be (nv, {dim}), got {verts.shape}")
        if cells.ndim != 2 or cells.shape[1] != dim + 1:
            raise ValueError(f"cells must be (nc, {dim + 1}), got {cells.shape}")
        if rtags.shape != (cells.shape[0],):
            raise ValueError("region_tags length must match cell count")
        if cells.size and (cells.min() < 0 or cells.max() >= len(verts)):
            raise ValueError("cell vertex index out of range")

        # orient: swap the last two vertices of any negatively oriented cell
        vol = _signed_volumes(verts, cells)
        flip = vol < 0
        if np.any(flip):
            cells = cells.copy()
            cells[flip, -2], cells[flip, -1] = (
                cells[flip, -1].copy(),
                cells[flip, -2].copy(),
            )
            vol = np.abs(vol)
        scale = float(np.max(np.abs(vol))) if len(vol) else 0.0
        if len(vol) == 0 or np.any(vol <= 1e-14 * max(scale, 1e-300)):
            raise ValueError("mesh contains a degenerate (zero volume) simplex")

        tagset = np.unique(rtags)
        if not np.array_equal(tagset, np.arange(1, len(tagset) + 1)):
            raise ValueError(
                f"region tags must be contiguous starting at 1, got {tagset.tolist()}"
            )

        # conformity + true boundary: facets shared by exactly one cell
        fac = _all_facets(cells)
        uniq, counts = np.unique(fac, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise ValueError("non-conforming mesh: a facet is shared by >2 cells")
        true_bnd = uniq[counts == 1]

        if self.boundary_facets is None:
            bfac = true_bnd
            btags = np.ones(len(bfac), dtype=np.int64)
        else:
            given = np.sort(np.asarray(self.boundary_facets, dtype=np.int64), axis=1)
            gtags = np.asarray(self.boundary_tags, dtype=np.int64)
            if gtags.shape != (len(given),):
                raise ValueError("boundary_tags length must match boundary_facets")
            tagmap = {tuple(f): int(t) for f, t in zip(given, gtags)}
            if len(tagmap) != len(given):
                raise ValueError("duplicate boundary facet listed")
            true_keys = {tuple(f) for f in true_bnd}
            for key in tagmap:
                if key not in true_keys:
                    raise ValueError(
                        f"listed facet {key} is not a boundary facet of the cell complex"
                    )
            bfac = true_bnd
            btags = np.array([tagmap.get(tuple(f), 1) for f in true_bnd], dtype=np.int64)

        verts.flags.writeable = False
        cells.flags.writeable = False
        rtags.flags.writeable = False
        bfac.flags.writeable = False
        btags.flags.writeable = False
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "region_tags", rtags)
        object.__setattr__(self, "boundary_facets", bfac)
        object.__setattr__(self, "boundary_tags", btags)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]

    def region_ids(self):
        """Sorted array of distinct region tags."""
        return np.unique(self.region_tags)

    def boundary_ids(self):
        return np.unique(self.boundary_tags)


def cell_volumes(mesh):
    """Unsigned cell volumes (areas in 2D)."""
    return np.abs(_signed_volumes(mesh.vertices, mesh.cells))


def mesh_size(mesh):
    """h = max over cells of the cell diameter (largest vertex pair distance)."""
    h2 = 0.0
    verts, cells = mesh.vertices, mesh.cells
    nloc = cells.shape[1]
    for i, j in itertools.combinations(range(nloc), 2):
        d = verts[cells[:, i]] - verts[cells[:, j]]
        h2 = max(h2, float(np.max(np.einsum("ij,ij->i", d, d))))
    return float(np.sqrt(h2))


def generate_unit_square(N):
    """Uniform triangulation of (0,1)^2: N x N squares, each split SW-NE.

    (N+1)^2 vertices and 2 N^2 triangles; every grid square is split along
    the diagonal from its south-west to its north-east corner. Single
    region tag 1, all boundary facets tagged 1.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    xs = np.linspace(0.0, 1.0, N + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (N + 1) + i

    tris = []
    for j in range(N):
        for i in range(N):
            sw, se = vid(i, j), vid(i + 1, j)
            nw, ne = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((sw, se, ne))
            tris.append((sw, ne, nw))
    cells = np.array(tris, dtype=np.int64)
    return Mesh(2, verts, cells, np.ones(len(cells), dtype=np.int64),
                resolution_hint=N)


def generate_lshape(N):
    """L-shaped domain (0,1)^2 minus [1/2,1)x[1/2,1), N x N grid, N even.

    Same SW-NE split as the square; the (N/2)^2 squares in the upper-right
    quadrant are dropped, leaving (3/2) N^2 triangles. The re-entrant
    corner sits at (1/2, 1/2).
    """
    if N < 2 or N % 2 != 0:
        raise ValueError("N must be even and >= 2 for the L-shape")
    xs = np.linspace(0.0, 1.0, N + 1)
    half = N // 2

    def vid(i, j):
        return j * (N + 1) + i

    tris = []
    for j in range(N):
        for i in range(N):
            if i >= half and j >= half:
                continue
            sw, se = vid(i, j), vid(i + 1, j)
            nw, ne = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((sw, se, ne))
            tris.append((sw, ne, nw))
    cells = np.array(tris, dtype=np.int64)

    # drop unused grid vertices and renumber
    used = np.unique(cells)
    remap = -np.ones((N + 1) * (N + 1), dtype=np.int64)
    remap[used] = np.arange(len(used))
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])[used]
    cells = remap[cells]
    return Mesh(2, verts, cells, np.ones(len(cells), dtype=np.int64),
                resolution_hint=N)


# vertex offsets visited on the path from a cube's origin corner to the
# opposite corner, one permutation of the axes per tetrahedron
_KUHN_PERMS = list(itertools.permutations(range(3)))


def generate_unit_cube(N):
    """Kuhn (Freudenthal) tetrahedralization of (0,1)^3: 6 N^3 tetrahedra.

    Each grid cube is cut into 6 tetrahedra along the main diagonal from
    its origin corner (i,j,k) to (i+1,j+1,k+1): for every permutation
    (p0,p1,p2) of the axes, the tetrahedron spans the corner path
    c, c+e_p0, c+e_p0+e_p1, c+e_p0+e_p1+e_p2. Identical in every cube, so
    the triangulation is conforming.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    xs = np.linspace(0.0, 1.0, N + 1)
    stride_j = N + 1
    stride_k = (N + 1) ** 2

    def vid(i, j, k):
        return k * stride_k + j * stride_j + i

    grid = np.stack(np.meshgrid(xs, xs, xs, indexing="ij"), axis=-1)
    # vid(i,j,k) ordering: i fastest
    verts = np.empty(((N + 1) ** 3, 3))
    for k in range(N + 1):
        for j in range(N + 1):
            for i in range(N + 1):
                verts[vid(i, j, k)] = grid[i, j, k]

    tets = []
    for k in range(N):
        for j in range(N):
            for i in range(N):
                base = np.array([i, j, k])
                for perm in _KUHN_PERMS:
                    corner = base.copy()
                    tet = [vid(*corner)]
                    for axis in perm:
                        corner[axis] += 1
                        tet.append(vid(*corner))
                    tets.append(tet)
    cells = np.array(tets, dtype=np.int64)
    return Mesh(3, verts, cells, np.ones(len(cells), dtype=np.int64),
                resolution_hint=N)


def generate_disk(N):
    """Concentric-ring triangulation of the unit disk, 8 N^2 triangles.

    Ring j (j = 1..N) carries 8j vertices at radius j/N, so boundary
    vertices lie exactly on the unit circle. Between rings j-1 and j each
    of the 8 sectors of 45 degrees is filled with a strip of 2j-1
    triangles whose radial sector edges are shared with the neighbouring
    sector, keeping the mesh conforming. Total vertex count 1 + 4N(N+1).
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    verts = [(0.0, 0.0)]
    ring_start = [None]  # index of first vertex of ring j
    for j in range(1, N + 1):
        ring_start.append(len(verts))
        r = j / N
        m = 8 * j
        ang = 2.0 * np.pi * np.arange(m) / m
        verts.extend(zip(r * np.cos(ang), r * np.sin(ang)))
    verts = np.array(verts)

    def ring_vid(j, t):
        if j == 0:
            return 0
        return ring_start[j] + (t % (8 * j))

    tris = []
    for j in range(1, N + 1):
        for s in range(8):
            outer = [ring_vid(j, s * j + t) for t in range(j + 1)]
            inner = [ring_vid(j - 1, s * (j - 1) + t) for t in range(j)]
            if j == 1:
                inner = [0]
                tris.append((outer[0], outer[1], 0))
                continue
            for t in range(j):
                tris.append((outer[t], outer[t + 1], inner[t]))
            for t in range(j - 1):
                tris.append((outer[t + 1], inner[t + 1], inner[t]))
    cells = np.array(tris, dtype=np.int64)
    return Mesh(2, verts, cells, np.ones(len(cells), dtype=np.int64),
                resolution_hint=N)


# ---------------------------------------------------------------------------
# MSH 2.2 ASCII subset: $MeshFormat / $Nodes / $Elements, element types
# 1 (2-node line), 2 (3-node triangle), 4 (4-node tetrahedron).
# ---------------------------------------------------------------------------

_MSH_NODES_PER_TYPE = {1: 2, 2: 3, 4: 4}


def read_gmsh(path):
    """Read an MSH 2.2 ASCII file into a :class:`Mesh`.

    Cells take their region tag and boundary facets their boundary tag
    from the first (physical) element tag; elements with no tags default
    to tag 1. The mesh dimension is 3 when tetrahedra are present, else 2.
    Malformed sections and unsupported element types raise
    :class:`MeshFormatError` with the offending line number.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()

    def err(msg, ln):
        raise MeshFormatError(msg, path=str(path), line=ln)

    sections = {}
    i = 0
    while i < len(lines):
        name = lines[i].strip()
        if not name:
            i += 1
            continue
        if not name.startswith("$") or name.startswith("$End"):
            err(f"expected section header, got {name!r}", i + 1)
        end = f"$End{name[1:]}"
        try:
            j = lines.index(end, i + 1)
        except ValueError:
            err(f"section {name} not closed by {end}", i + 1)
        sections[name] = (i + 1, lines[i + 1 : j])
        i = j + 1

    if "$MeshFormat" not in sections:
        raise MeshFormatError("missing $MeshFormat section", path=str(path), line=1)
    ln0, body = sections["$MeshFormat"]
    if not body or body[0].split()[:2] != ["2.2", "0"]:
        err("unsupported mesh format, need '2.2 0 8'", ln0 + 1)

    if "$Nodes" not in sections:
        raise MeshFormatError("missing $Nodes section", path=str(path), line=1)
    ln0, body = sections["$Nodes"]
    try:
        nnodes = int(body[0])
    except (IndexError, ValueError):
        err("bad node count", ln0 + 1)
    if len(body) - 1 != nnodes:
        err(f"expected {nnodes} node lines, found {len(body) - 1}", ln0 + 1)
    ids = np.empty(nnodes, dtype=np.int64)
    xyz = np.empty((nnodes, 3))
    for r, line in enumerate(body[1:]):
        parts = line.split()
        if len(parts) != 4:
            err(f"bad node line {line!r}", ln0 + 2 + r)
        ids[r] = int(parts[0])
        xyz[r] = [float(p) for p in parts[1:]]
    id2idx = {int(v): k for k, v in enumerate(ids)}
    if len(id2idx) != nnodes:
        err("duplicate node id", ln0 + 1)

    if "$Elements" not in sections:
        raise MeshFormatError("missing $Elements section", path=str(path), line=1)
    ln0, body = sections["$Elements"]
    try:
        nelem = int(body[0])
    except (IndexError, ValueError):
        err("bad element count", ln0 + 1)
    if len(body) - 1 != nelem:
        err(f"expected {nelem} element lines, found {len(body) - 1}", ln0 + 1)

    by_type = {1: ([], []), 2: ([], []), 4: ([], [])}
    for r, line in enumerate(body[1:]):
        ln = ln0 + 2 + r
        parts = line.split()
        if len(parts) < 3:
            err(f"bad element line {line!r}", ln)
        etype = int(parts[1])
        if etype not in _MSH_NODES_PER_TYPE:
            err(f"unsupported element type {etype}", ln)
        ntags = int(parts[2])
        nv = _MSH_NODES_PER_TYPE[etype]
        if len(parts) != 3 + ntags + nv:
            err(f"element line has wrong field count", ln)
        tag = int(parts[3]) if ntags >= 1 else 1
        try:
            conn = [id2idx[int(p)] for p in parts[3 + ntags :]]
        except KeyError as e:
            err(f"element references unknown node {e.args[0]}", ln)
        by_type[etype][0].append(conn)
        by_type[etype][1].append(tag)

    if by_type[4][0]:
        dim = 3
        cells, rtags = by_type[4]
        bfac, btags = by_type[2]
        if by_type[1][0]:
            err("line elements are unsupported in a tetrahedral mesh", ln0 + 1)
    elif by_type[2][0]:
        dim = 2
        cells, rtags = by_type[2]
        bfac, btags = by_type[1]
    else:
        err("file contains no triangles or tetrahedra", ln0 + 1)

    coords = xyz[:, :dim]
    if dim == 2 and np.any(np.abs(xyz[:, 2]) > 1e-12):
        raise MeshFormatError("2D mesh has nonzero z coordinates", path=str(path))
    return Mesh(
        dim,
        coords,
        np.array(cells, dtype=np.int64),
        np.array(rtags, dtype=np.int64),
        boundary_facets=np.array(bfac, dtype=np.int64) if bfac else None,
        boundary_tags=np.array(btags, dtype=np.int64) if bfac else None,
    )


def write_msh(mesh, path):
    """Write the MSH 2.2 ASCII subset read by :func:`read_gmsh`.

    Coordinates use repr-exact formatting so a write/read round trip
    reproduces them bit for bit.
    """
    facet_type = 1 if mesh.dim == 2 else 2
    cell_type = 2 if mesh.dim == 2 else 4
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.num_vertices)]
    for k, v in enumerate(mesh.vertices):
        x, y = float(v[0]), float(v[1])
        z = float(v[2]) if mesh.dim == 3 else 0.0
        out.append(f"{k + 1} {x!r} {y!r} {z!r}")
    out.append("$EndNodes")
    out.append("$Elements")
    nb, nc = len(mesh.boundary_facets), mesh.num_cells
    out.append(str(nb + nc))
    eid = 1
    for f, t in zip(mesh.boundary_facets, mesh.boundary_tags):
        conn = " ".join(str(v + 1) for v in f)
        out.append(f"{eid} {facet_type} 2 {t} {t} {conn}")
        eid += 1
    for c, t in zip(mesh.cells, mesh.region_tags):
        conn = " ".join(str(v + 1) for v in c)
        out.append(f"{eid} {cell_type} 2 {t} {t} {conn}")
        eid += 1
    out.append("$EndElements")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(out) + "\n")
