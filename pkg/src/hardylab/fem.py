"""P1 finite elements for the quadratic forms int |grad u|^2 and int V u^2.

Element loops are vectorized over all triangles; contributions are summed
into coordinate-format matrices, which scipy reduces deterministically.
Dirichlet vertices are eliminated by deleting their rows and columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from logging import getLogger
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import CutoffError, DegenerateVectorError, MeshError, PotentialSignError
from .geometry import Mesh, PotentialSpec

logger = getLogger(__name__)

# interior 3-point rule, exact for quadratics
QUAD3_POINTS = np.array(
    [[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]
)
QUAD3_WEIGHTS = np.full(3, 1 / 3)

# 6-point rule, exact for quartics
_A, _B = 0.445948490915965, 0.091576213509771
QUAD6_POINTS = np.array(
    [
        [_A, _A, 1 - 2 * _A],
        [_A, 1 - 2 * _A, _A],
        [1 - 2 * _A, _A, _A],
        [_B, _B, 1 - 2 * _B],
        [_B, 1 - 2 * _B, _B],
        [1 - 2 * _B, _B, _B],
    ]
)
QUAD6_WEIGHTS = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)

DEGENERATE_AREA = 1e-14
DEGENERATE_DENOMINATOR = 1e-300


@dataclass(frozen=True, eq=False)
class SparseSym:
    """Symmetric sparse matrix in CSR layout."""

    matrix: sp.csr_matrix

    @classmethod
    def from_coo(cls, rows, cols, vals, n: int) -> SparseSym:
        a = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        a.sum_duplicates()
        return cls(((a + a.T) * 0.5).tocsr())

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, u):
        return self.matrix @ u

    def quad(self, u: np.ndarray) -> float:
        return float(u @ (self.matrix @ u))

    def restrict(self, free: np.ndarray) -> SparseSym:
        return SparseSym(self.matrix[free][:, free].tocsr())


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """Stiffness K and weighted mass M_V on the free degrees of freedom."""

    K: SparseSym
    M_V: SparseSym
    free: np.ndarray
    n_total: int
    quadrature_order: int = 2
    mesh: Mesh | None = None

    @property
    def n(self) -> int:
        return self.K.n

    def to_full(self, u: np.ndarray) -> np.ndarray:
        full = np.zeros(self.n_total)
        full[self.free] = u
        return full

    def to_free(self, u_full: np.ndarray) -> np.ndarray:
        return np.asarray(u_full, dtype=float)[self.free]

    @classmethod
    def from_matrices(cls, K, M) -> AssembledSystem:
        """Wrap a pair of symmetric matrices with no eliminated DOFs."""
        K = sp.csr_matrix(K)
        M = sp.csr_matrix(M)
        n = K.shape[0]
        return cls(SparseSym(K), SparseSym(M), np.arange(n), n)


class CutoffSplit(NamedTuple):
    lhs: float
    rhs_terms: tuple[float, float, float]


@dataclass(frozen=True, eq=False)
class CutoffField:
    """Vertex values of a cutoff chi: one on the bulge, zero beyond a collar."""

    values: np.ndarray
    collar: float = 0.0


def element_gradients(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Areas (m,) and barycentric gradients (m, 3, 2) of every triangle."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    edges2 = np.maximum.reduce([b[:, k] ** 2 + c[:, k] ** 2 for k in range(3)])
    bad = area <= DEGENERATE_AREA * edges2
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise MeshError(f"degenerate triangle {k} (area {area[k]:.3e})")
    grads = np.stack([b, c], axis=2) / (2.0 * area)[:, None, None]
    return area, grads


def _scatter(mesh: Mesh, local: np.ndarray) -> SparseSym:
    t = mesh.triangles
    rows = np.repeat(t[:, :, None], 3, axis=2)
    cols = np.repeat(t[:, None, :], 3, axis=1)
    return SparseSym.from_coo(rows.ravel(), cols.ravel(), local.ravel(), mesh.n_vertices)


def element_stiffness(mesh: Mesh) -> np.ndarray:
    area, grads = element_gradients(mesh)
    return area[:, None, None] * np.einsum("mik,mjk->mij", grads, grads)


def assemble_stiffness(mesh: Mesh, eliminate: bool = True) -> SparseSym:
    """P1 stiffness matrix, Dirichlet rows and columns removed if requested."""
    K = _scatter(mesh, element_stiffness(mesh))
    return K.restrict(mesh.free) if eliminate else K


def quadrature_weights(mesh: Mesh, pot: PotentialSpec) -> tuple[np.ndarray, np.ndarray]:
    """V at the interior 3-point nodes of each triangle, sign-checked."""
    p = mesh.vertices[mesh.triangles]
    points = np.einsum("qi,mik->mqk", QUAD3_POINTS, p)
    v = pot.evaluate(points)
    if np.any(v < 0.0):
        m, q = np.unravel_index(int(np.argmin(v)), v.shape)
        raise PotentialSignError(points[m, q], v[m, q])
    return points, v


def element_weighted_mass(mesh: Mesh, pot: PotentialSpec) -> np.ndarray:
    area, _ = element_gradients(mesh)
    _, v = quadrature_weights(mesh, pot)
    phi = QUAD3_POINTS
    return area[:, None, None] * np.einsum("q,mq,qi,qj->mij", QUAD3_WEIGHTS, v, phi, phi)


def assemble_weighted_mass(mesh: Mesh, pot: PotentialSpec, eliminate: bool = True) -> SparseSym:
    """P1 matrix of int V u v with V sampled at interior quadrature nodes."""
    M = _scatter(mesh, element_weighted_mass(mesh, pot))
    return M.restrict(mesh.free) if eliminate else M


def assemble_system(mesh: Mesh, pot: PotentialSpec) -> AssembledSystem:
    K = assemble_stiffness(mesh)
    M = assemble_weighted_mass(mesh, pot)
    if not M.matrix.diagonal().sum() > 0.0:
        raise DegenerateVectorError("V vanishes on every free degree of freedom")
    logger.debug(f"Assembled system with {K.n} free DOFs ({mesh.n_triangles} triangles)")
    return AssembledSystem(K, M, mesh.free, mesh.n_vertices, quadrature_order=2, mesh=mesh)


def element_vmass(mesh: Mesh, pot: PotentialSpec, u_full: np.ndarray) -> np.ndarray:
    """Per-triangle int V u^2, consistent with the assembled M_V."""
    local = element_weighted_mass(mesh, pot)
    ue = u_full[mesh.triangles]
    return np.einsum("mi,mij,mj->m", ue, local, ue)


def rayleigh_quotient(sys: AssembledSystem, u: np.ndarray) -> float:
    """Return u^T K u / u^T M_V u for a vector on the free DOFs."""
    den = sys.M_V.quad(u)
    if den <= DEGENERATE_DENOMINATOR:
        raise DegenerateVectorError(f"V-degenerate vector (u^T M_V u = {den:.3e})")
    return sys.K.quad(u) / den


def interpolate(mesh: Mesh, fn) -> np.ndarray:
    """Nodal values of ``fn(r, phi)`` on all vertices."""
    return np.asarray(fn(mesh.polar[:, 0], mesh.polar[:, 1]), dtype=float)


def cutoff_field(mesh: Mesh, collar: float) -> CutoffField:
    """Cutoff equal to one on bulge triangles, decaying linearly in (log r, phi)
    distance to zero at ``collar``."""
    bulge = mesh.bulge_vertices()
    if not bulge.any():
        return CutoffField(np.zeros(mesh.n_vertices), collar)
    dist = _bulge_distance(mesh, bulge)
    chi = np.clip(1.0 - dist / collar, 0.0, 1.0) if collar > 0.0 else np.zeros(mesh.n_vertices)
    chi[bulge] = 1.0
    return CutoffField(chi, collar)


def _bulge_distance(mesh: Mesh, bulge: np.ndarray) -> np.ndarray:
    """(log r, phi) distance of every vertex to the nearest bulge vertex."""
    coords = np.column_stack([np.log(mesh.polar[:, 0]), mesh.polar[:, 1]])
    dist, _ = cKDTree(coords[bulge]).query(coords)
    return dist


def _check_cutoff(mesh: Mesh, chi: CutoffField) -> None:
    values = chi.values
    if values.shape != (mesh.n_vertices,):
        raise CutoffError("cutoff must be given at every vertex")
    if values.min() < 0.0 or values.max() > 1.0:
        raise CutoffError("cutoff values must lie in [0, 1]")
    bulge = mesh.bulge_vertices()
    if not bulge.any():
        if values.any():
            raise CutoffError("cutoff must vanish on a domain without bulges")
        return
    if not np.all(values[bulge] == 1.0):
        raise CutoffError("cutoff must equal one on every bulge triangle")
    outside = _bulge_distance(mesh, bulge) >= chi.collar * (1.0 + 1e-12)
    if np.any(values[outside & ~bulge] != 0.0):
        bad = int(np.flatnonzero(outside & ~bulge & (values != 0.0))[0])
        raise CutoffError(f"cutoff must vanish outside the collar (vertex {bad})")


def cutoff_split_terms(mesh: Mesh, u: np.ndarray, chi: CutoffField) -> CutoffSplit:
    """Energy split of u against (1 - chi) u, evaluated with a degree-4 rule.

    lhs = int |grad u|^2 - int |grad((1 - chi) u)|^2, and the three terms
    -int |grad chi|^2 u^2, 2 int (1 - chi) u grad chi . grad u and
    int chi (2 - chi) |grad u|^2 which sum to lhs pointwise.
    """
    area, grads = element_gradients(mesh)
    ue, ce = u[mesh.triangles], chi.values[mesh.triangles]
    gu = np.einsum("mi,mik->mk", ue, grads)
    gc = np.einsum("mi,mik->mk", ce, grads)
    uq = ue @ QUAD6_POINTS.T
    cq = ce @ QUAD6_POINTS.T

    gu2 = np.einsum("mk,mk->m", gu, gu)[:, None]
    gc2 = np.einsum("mk,mk->m", gc, gc)[:, None]
    guc = np.einsum("mk,mk->m", gu, gc)[:, None]
    gw = (1.0 - cq)[..., None] * gu[:, None, :] - uq[..., None] * gc[:, None, :]

    def integrate(f):
        return float(np.sum(area * (f @ QUAD6_WEIGHTS)))

    lhs = integrate(gu2 - np.einsum("mqk,mqk->mq", gw, gw))
    t1 = integrate(-gc2 * uq**2)
    t2 = integrate(2.0 * (1.0 - cq) * uq * guc)
    t3 = integrate(cq * (2.0 - cq) * gu2)
    return CutoffSplit(lhs, (t1, t2, t3))


def restrict_outside_cutoff(mesh: Mesh, u: np.ndarray, chi: CutoffField) -> np.ndarray:
    """Vertexwise (1 - chi) u, which vanishes on every bulge vertex and hence
    lies in the P1 space of the unperturbed cone."""
    _check_cutoff(mesh, chi)
    return (1.0 - chi.values) * u


def write_coo(matrix: SparseSym, path: str | Path) -> Path:
    """Dump a matrix as ``row col value`` lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    coo = matrix.matrix.tocoo()
    np.savetxt(path, np.column_stack([coo.row, coo.col, coo.data]), fmt=["%d", "%d", "%.17g"])
    return path
