"""Lagrange reference elements, simplex quadrature and global DOF maps.

Continuous scalar Lagrange spaces of degree k in {1,2,3} on triangles and
tetrahedra. Basis functions are represented by their coefficients over
the monomial basis (obtained from the inverse node Vandermonde matrix),
which is well conditioned for the low degrees supported here.

Quadrature uses conical-product Gauss-Jacobi rules built from
scipy.special.roots_jacobi: all weights are positive at every degree
(unlike tabulated tetrahedron rules, which go negative beyond degree 2)
and the one-point rule degenerates to the centroid rule.

Global DOF identity: a Lagrange node is identified by the multiset of
(global vertex id, integer lattice weight) pairs of the entity carrying
it. Two cells sharing an entity derive identical keys for its nodes, so
no edge or face orientation bookkeeping is needed. Sorting keys by
(entity dimension, vertex ids, weights) makes vertex DOFs come first in
vertex order, then edge DOFs, then face/interior DOFs, deterministically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

__all__ = [
    "ReferenceElement",
    "QuadratureRule",
    "DofMap",
    "build_reference",
    "quadrature",
    "build_dofmap",
]


def _monomial_powers(dim, degree):
    """All exponent tuples with total degree <= degree, graded lexicographic."""
    pows = [
        p
        for p in itertools.product(range(degree + 1), repeat=dim)
        if sum(p) <= degree
    ]
    pows.sort(key=lambda p: (sum(p), p))
    return np.array(pows, dtype=np.int64)


def _lattice_nodes(dim, degree):
    """Principal lattice in entity order: vertices, edges, faces, interior.

    Returns the integer barycentric coordinates (dim+1 entries summing to
    degree) of each node.
    """
    k = degree
    nodes = []
    nv = dim + 1
    for v in range(nv):
        lat = [0] * nv
        lat[v] = k
        nodes.append(tuple(lat))
    for a, b in itertools.combinations(range(nv), 2):
        for p in range(1, k):
            lat = [0] * nv
            lat[a], lat[b] = k - p, p
            nodes.append(tuple(lat))
    if nv >= 3:
        for tri in itertools.combinations(range(nv), 3):
            interior = [
                c
                for c in itertools.product(range(1, k), repeat=3)
                if sum(c) == k
            ]
            interior.sort()
            for c in interior:
                lat = [0] * nv
                for v, w in zip(tri, c):
                    lat[v] = w
                nodes.append(tuple(lat))
    if nv == 4:
        interior = [
            c for c in itertools.product(range(1, k), repeat=4) if sum(c) == k
        ]
        interior.sort()
        for c in interior:
            nodes.append(tuple(c))
    return np.array(nodes, dtype=np.int64)


@dataclass(frozen=True)
class ReferenceElement:
    """Degree-k Lagrange element on the reference simplex.

    nodes_lattice holds integer barycentric coordinates (summing to k);
    nodes_ref the corresponding reference coordinates. coeffs[m, i] is the
    coefficient of monomial m in basis function i.
    """

    dim: int
    degree: int
    nodes_lattice: np.ndarray
    nodes_ref: np.ndarray
    powers: np.ndarray
    coeffs: np.ndarray

    @property
    def num_nodes(self):
        return self.nodes_ref.shape[0]

    def _monomials(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        # pts**p with 0**0 = 1
        P = np.ones((pts.shape[0], self.powers.shape[0]))
        for d in range(self.dim):
            p = self.powers[:, d]
            P *= np.where(p == 0, 1.0, pts[:, d : d + 1] ** p)
        return P

    def tabulate(self, points):
        """Values and gradients of every basis function at reference points.

        Returns (vals, grads) with shapes (num_nodes, npts) and
        (num_nodes, npts, dim).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        vals = (self._monomials(pts) @ self.coeffs).T
        npts = pts.shape[0]
        grads = np.zeros((self.num_nodes, npts, self.dim))
        for d in range(self.dim):
            dpow = self.powers.copy()
            fac = dpow[:, d].astype(np.float64)
            dpow[:, d] = np.maximum(dpow[:, d] - 1, 0)
            P = np.ones((npts, self.powers.shape[0]))
            for e in range(self.dim):
                p = dpow[:, e]
                P *= np.where(p == 0, 1.0, pts[:, e : e + 1] ** p)
            grads[:, :, d] = ((P * fac) @ self.coeffs).T
        return vals, grads


def _build_reference_any(dim, degree):
    lattice = _lattice_nodes(dim, degree)
    nodes_ref = lattice[:, 1:].astype(np.float64) / degree
    powers = _monomial_powers(dim, degree)
    if powers.shape[0] != lattice.shape[0]:
        raise AssertionError("monomial count mismatch")
    # Vandermonde in the monomial basis, inverted for nodal coefficients
    V = np.ones((lattice.shape[0], powers.shape[0]))
    for d in range(dim):
        p = powers[:, d]
        V *= np.where(p == 0, 1.0, nodes_ref[:, d : d + 1] ** p)
    coeffs = np.linalg.inv(V)
    return ReferenceElement(dim, degree, lattice, nodes_ref, powers, coeffs)


def build_reference(dim, k):
    """Reference Lagrange element, dim in {2,3}, k in {1,2,3}."""
    if dim not in (2, 3) or k not in (1, 2, 3):
        raise ValueError(f"unsupported reference element (dim={dim}, k={k})")
    return _build_reference_any(dim, k)


@dataclass(frozen=True)
class QuadratureRule:
    """Positive-weight rule on the reference simplex.

    points are barycentric (npts, dim+1); weights sum to the reference
    volume (1/2 for the triangle, 1/6 for the tetrahedron, 1 for the
    segment); exact for total polynomial degree <= degree.
    """

    dim: int
    degree: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def points_ref(self):
        """Reference coordinates: barycentric with the first entry dropped."""
        return self.points[:, 1:]


def _gauss01(n):
    t, w = roots_legendre(n)
    return (t + 1.0) / 2.0, w / 2.0


def _jacobi01(n, alpha):
    # nodes/weights for integral over [0,1] with weight (1-x)^alpha
    t, w = roots_jacobi(n, alpha, 0.0)
    return (t + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


def _simplex_rule(dim, exactness):
    n = max(1, (int(exactness) + 2) // 2)  # 2n-1 >= exactness
    if dim == 1:
        x, w = _gauss01(n)
        pts = x[:, None]
        wts = w
    elif dim == 2:
        # Duffy collapse x = xi (1 - eta), y = eta, Jacobian (1 - eta)
        xi, wx = _gauss01(n)
        eta, we = _jacobi01(n, 1.0)
        XI, ETA = np.meshgrid(xi, eta, indexing="ij")
        pts = np.column_stack([(XI * (1.0 - ETA)).ravel(), ETA.ravel()])
        wts = np.outer(wx, we).ravel()
    elif dim == 3:
        xi, wx = _gauss01(n)
        eta, we = _jacobi01(n, 1.0)
        zeta, wz = _jacobi01(n, 2.0)
        XI, ETA, ZETA = np.meshgrid(xi, eta, zeta, indexing="ij")
        x = XI * (1.0 - ETA) * (1.0 - ZETA)
        y = ETA * (1.0 - ZETA)
        pts = np.column_stack([x.ravel(), y.ravel(), ZETA.ravel()])
        wts = (wx[:, None, None] * we[None, :, None] * wz[None, None, :]).ravel()
    else:
        raise ValueError(f"no simplex rule for dim={dim}")
    bary = np.column_stack([1.0 - pts.sum(axis=1), pts])
    return QuadratureRule(dim, 2 * n - 1, bary, wts)


def quadrature(dim, exactness_degree):
    """Simplex rule exact to the requested total degree, dim in {2,3}.

    Degrees above 6 are not part of the supported contract (degree 6
    covers the k=3 mass terms).
    """
    if dim not in (2, 3):
        raise ValueError(f"unsupported quadrature dimension {dim}")
    if not 0 <= exactness_degree <= 6:
        raise ValueError(f"unsupported quadrature degree {exactness_degree}")
    return _simplex_rule(dim, exactness_degree)


def _facet_lattice_count(dim, k):
    # lattice points on a (dim-1)-simplex facet
    return _lattice_nodes(dim - 1, k).shape[0]


@dataclass(frozen=True)
class DofMap:
    """Global numbering of the scalar degree-k Lagrange space on a mesh.

    cell_dofs[c, i] is the global index of local node i of cell c; n is
    the total scalar DOF count; boundary_dofs maps each boundary tag to
    the sorted indices of all DOFs whose nodes lie on facets of that tag.
    Vertex DOFs occupy indices 0..num_vertices-1 in vertex order.
    """

    dim: int
    degree: int
    n: int
    cell_dofs: np.ndarray
    boundary_dofs: dict
    _key2dof: dict = field(repr=False)

    def facet_dofs(self, facet_vertices, facet_lattice):
        """Global DOFs of the nodes a facet element places on this facet.

        facet_vertices are global vertex ids in the facet element's local
        vertex order; facet_lattice is that element's nodes_lattice.
        """
        out = np.empty(facet_lattice.shape[0], dtype=np.int64)
        for i, lat in enumerate(facet_lattice):
            key = tuple(
                sorted((int(facet_vertices[j]), int(w)) for j, w in enumerate(lat) if w)
            )
            out[i] = self._key2dof[key]
        return out


def build_dofmap(mesh, k):
    """Build the global DOF map for degree k on a conforming mesh."""
    ref = build_reference(mesh.dim, k)
    lattice = ref.nodes_lattice
    ncells, nloc = mesh.num_cells, ref.num_nodes

    keys_per_cell = []
    allkeys = set()
    cells = mesh.cells
    for c in range(ncells):
        g = cells[c]
        ck = []
        for lat in lattice:
            key = tuple(sorted((int(g[j]), int(w)) for j, w in enumerate(lat) if w))
            ck.append(key)
        keys_per_cell.append(ck)
        allkeys.update(ck)

    # entity dimension first, then vertex ids, then lattice weights
    def order(key):
        return (len(key), tuple(p[0] for p in key), tuple(p[1] for p in key))

    key2dof = {key: i for i, key in enumerate(sorted(allkeys, key=order))}

    cell_dofs = np.empty((ncells, nloc), dtype=np.int64)
    for c in range(ncells):
        cell_dofs[c] = [key2dof[key] for key in keys_per_cell[c]]

    facet_ref = _build_reference_any(mesh.dim - 1, k)
    flat = facet_ref.nodes_lattice
    bd = {}
    for f, t in zip(mesh.boundary_facets, mesh.boundary_tags):
        dofs = []
        for lat in flat:
            key = tuple(sorted((int(f[j]), int(w)) for j, w in enumerate(lat) if w))
            dofs.append(key2dof[key])
        bd.setdefault(int(t), set()).update(dofs)
    boundary_dofs = {t: np.array(sorted(s), dtype=np.int64) for t, s in bd.items()}

    cell_dofs.flags.writeable = False
    return DofMap(mesh.dim, k, len(key2dof), cell_dofs, boundary_dofs, key2dof)
