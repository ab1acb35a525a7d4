"""Planar cone domains, angular-bulge perturbations and graded polar meshes.

The unperturbed cone is the sector 0 < phi < theta, truncated to
r_min < r < r_max.  Perturbations B are angular bulges attached along the
lateral edge phi = theta: over r_a < r < r_b the opening widens to
theta + extra_angle, which must stay inside the ambient cone of opening
theta_X.

Meshes are tensor grids in (s = log r, phi), so radial layers form a
geometric progression, split into triangles with straight (chord) edges in
the physical plane.  Cone vertices are numbered first, row by row, so a
perturbed mesh contains the cone mesh of equal resolution as a sub-complex
with identical vertex indices.
"""

from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass, replace
from logging import getLogger
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .errors import DomainError, MeshError

logger = getLogger(__name__)

CONE, BULGE = 0, 1
REGION_NAMES = {CONE: "cone", BULGE: "bulge"}


class Bulge(BaseModel):
    """Angular widening of the cone over the radial band (r_a, r_b)."""

    r_a: float = Field(gt=0.0)
    r_b: float = Field(gt=0.0)
    extra_angle: float = Field(gt=0.0, description="Added opening (radians)")

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check_band(self):
        if not self.r_a < self.r_b:
            raise DomainError(f"bulge band needs r_a < r_b, got ({self.r_a}, {self.r_b})")
        return self


class DomainSpec(BaseModel):
    """Truncated planar sector plus bulges inside an ambient cone X."""

    theta: float = Field(gt=0.0, description="Cone opening (radians)")
    theta_X: float = Field(default=math.pi, gt=0.0, le=2.0 * math.pi)
    bulges: list[Bulge] = Field(default_factory=list)
    r_min: float = Field(default=1e-3, gt=0.0)
    r_max: float = Field(default=1e3, gt=0.0)
    N: int = Field(default=2, description="Finite elements are planar")

    model_config = {"frozen": True}

    @property
    def L(self) -> float:
        return math.log(self.r_max / self.r_min)

    @property
    def is_pure_cone(self) -> bool:
        return not self.bulges

    def with_truncation(self, r_min: float, r_max: float) -> DomainSpec:
        return build_domain(self.model_copy(update={"r_min": r_min, "r_max": r_max}))

    def truncated(self, window: TruncationWindow) -> DomainSpec:
        return self.with_truncation(window.r_min, window.r_max)

    def without_bulges(self) -> DomainSpec:
        return self.model_copy(update={"bulges": []})

    def with_bulges(self, bulges: list[Bulge]) -> DomainSpec:
        return build_domain(self.model_copy(update={"bulges": list(bulges)}))


def _merge_bulges(bulges: list[Bulge]) -> list[Bulge]:
    merged: list[Bulge] = []
    for b in sorted(bulges, key=lambda b: (b.r_a, b.r_b)):
        if merged and b.r_a <= merged[-1].r_b:
            last = merged.pop()
            b = Bulge(
                r_a=last.r_a,
                r_b=max(last.r_b, b.r_b),
                extra_angle=max(last.extra_angle, b.extra_angle),
            )
            logger.debug(f"Merged overlapping bulges into {b}")
        merged.append(b)
    return merged


def build_domain(spec: DomainSpec) -> DomainSpec:
    """Validate a domain spec and normalize its bulge list.

    Bulges attach along phi = theta, so C u B is connected by construction.
    Overlapping bulges are merged into their hull with the largest extra angle.
    """
    if spec.N != 2:
        raise DomainError("finite-element domains are planar (N = 2)")
    if not spec.r_min < spec.r_max:
        raise DomainError(f"truncation needs r_min < r_max, got ({spec.r_min}, {spec.r_max})")
    if spec.theta > spec.theta_X:
        raise DomainError("cone opening exceeds the ambient opening theta_X")
    for b in spec.bulges:
        if spec.theta + b.extra_angle > spec.theta_X + 1e-12:
            raise DomainError(
                f"bulge exits ambient cone: theta + extra_angle = "
                f"{spec.theta + b.extra_angle:.6f} > theta_X = {spec.theta_X:.6f}"
            )
        if not spec.r_min < b.r_a < b.r_b < spec.r_max:
            raise DomainError(
                f"bulge band ({b.r_a}, {b.r_b}) outside truncation band "
                f"({spec.r_min}, {spec.r_max})"
            )
    return spec.model_copy(update={"bulges": _merge_bulges(spec.bulges)})


class TruncationWindow(BaseModel):
    """Radial band r_min < r < r_max of one sweep point."""

    r_min: float = Field(gt=0.0)
    r_max: float = Field(gt=0.0)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check_order(self):
        if not self.r_min < self.r_max:
            raise DomainError(f"truncation needs r_min < r_max, got ({self.r_min}, {self.r_max})")
        return self

    @property
    def L(self) -> float:
        return math.log(self.r_max / self.r_min)

    @property
    def decades(self) -> float:
        return math.log10(self.r_max / self.r_min)

    @classmethod
    def symmetric(cls, decades: float, center: float = 1.0) -> TruncationWindow:
        """Window spanning ``decades`` decades, geometrically centred."""
        half = 10.0 ** (0.5 * decades)
        return cls(r_min=center / half, r_max=center * half)


@dataclass(frozen=True)
class Grading:
    n_radial: int
    n_angular: int
    ratio: float
    level: int = 0


@dataclass(frozen=True)
class Band:
    """Bulge band as realized on the grid: layer indices and columns."""

    i_a: int
    i_b: int
    columns: int
    extra_angle: float


@dataclass(frozen=True, eq=False)
class Mesh:
    """P1 triangle mesh with polar coordinates and boundary flags."""

    vertices: np.ndarray
    polar: np.ndarray
    triangles: np.ndarray
    dirichlet: np.ndarray
    region: np.ndarray
    grading: Grading
    theta: float
    n_cone_vertices: int
    bands: tuple[Band, ...] = ()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique undirected edges and, per triangle, the index of each edge.

        Edge k of a triangle joins local vertices k and (k+1) % 3.
        """
        t = self.triangles
        pairs = np.stack([t, np.roll(t, -1, axis=1)], axis=2).reshape(-1, 2)
        pairs = np.sort(pairs, axis=1)
        unique, inverse = np.unique(pairs, axis=0, return_inverse=True)
        return unique, inverse.reshape(-1, 3)

    def boundary_vertices(self) -> np.ndarray:
        unique, inverse = self.edges()
        counts = np.bincount(inverse.ravel(), minlength=len(unique))
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[unique[counts == 1].ravel()] = True
        return mask

    def bulge_vertices(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.triangles[self.region == BULGE].ravel()] = True
        return mask


def _radial_index(domain: DomainSpec, n_radial: int, r: float) -> int:
    ds = domain.L / n_radial
    return int(round(math.log(r / domain.r_min) / ds))


def _bands(domain: DomainSpec, n_radial: int, dphi: float) -> list[Band]:
    bands: list[Band] = []
    for b in domain.bulges:
        i_a = max(0, _radial_index(domain, n_radial, b.r_a))
        i_b = min(n_radial, _radial_index(domain, n_radial, b.r_b))
        if i_b <= i_a:
            i_b = min(n_radial, i_a + 1)
            i_a = i_b - 1
        columns = max(1, int(round(b.extra_angle / dphi)))
        band = Band(i_a, i_b, columns, b.extra_angle)
        if bands and band.i_a <= bands[-1].i_b:
            last = bands.pop()
            extra = max(last.extra_angle, band.extra_angle)
            band = Band(
                last.i_a,
                max(last.i_b, band.i_b),
                max(1, int(round(extra / dphi))),
                extra,
            )
            logger.warning(f"Bulges touch after snapping to the grid, merged into layers {band.i_a}..{band.i_b}")
        bands.append(band)
    return bands


def generate_mesh(domain: DomainSpec, n_radial: int, n_angular: int) -> Mesh:
    """Structured graded triangulation of the truncated (perturbed) sector.

    Radial layers are uniform in s = log r.  Each bulge band is snapped to
    the nearest layers and receives ``round(extra_angle / dphi)`` extra
    angular columns of equal width that exactly span its extra angle.
    """
    if n_radial < 2 or n_angular < 2:
        raise MeshError(f"degenerate resolution: n_radial={n_radial}, n_angular={n_angular}")
    domain = build_domain(domain)
    dphi = domain.theta / n_angular
    if dphi >= math.pi:
        raise MeshError("angular step must be below pi")

    s = np.linspace(math.log(domain.r_min), math.log(domain.r_max), n_radial + 1)
    radii = np.exp(s)
    radii[0], radii[-1] = domain.r_min, domain.r_max

    ii, jj = np.meshgrid(np.arange(n_radial + 1), np.arange(n_angular + 1), indexing="ij")
    r_list = [radii[ii.ravel()]]
    phi_list = [jj.ravel() * dphi]
    n_cols = n_angular + 1

    def cone_id(i, j):
        return i * n_cols + j

    tris, tags = [], []
    for i in range(n_radial):
        for j in range(n_angular):
            a, b = cone_id(i, j), cone_id(i + 1, j)
            c, d = cone_id(i + 1, j + 1), cone_id(i, j + 1)
            tris += [(a, b, c), (a, c, d)]
            tags += [CONE, CONE]

    next_id = (n_radial + 1) * n_cols
    bands = _bands(domain, n_radial, dphi)
    for band in bands:
        width = band.extra_angle / band.columns
        layers = np.arange(band.i_a, band.i_b + 1)
        ids = {}
        for i in layers:
            ids[(i, 0)] = cone_id(i, n_angular)
            for k in range(1, band.columns + 1):
                ids[(i, k)] = next_id
                next_id += 1
                r_list.append(np.array([radii[i]]))
                phi_list.append(np.array([domain.theta + k * width]))
        for i in layers[:-1]:
            for k in range(band.columns):
                a, b = ids[(i, k)], ids[(i + 1, k)]
                c, d = ids[(i + 1, k + 1)], ids[(i, k + 1)]
                tris += [(a, b, c), (a, c, d)]
                tags += [BULGE, BULGE]

    r = np.concatenate(r_list)
    phi = np.concatenate(phi_list)
    vertices = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    mesh = Mesh(
        vertices=vertices,
        polar=np.column_stack([r, phi]),
        triangles=np.asarray(tris, dtype=np.int64),
        dirichlet=np.zeros(len(r), dtype=bool),
        region=np.asarray(tags, dtype=np.int8),
        grading=Grading(n_radial, n_angular, float(radii[1] / radii[0])),
        theta=domain.theta,
        n_cone_vertices=(n_radial + 1) * n_cols,
        bands=tuple(bands),
    )
    mesh = replace(mesh, dirichlet=mesh.boundary_vertices())
    _check_areas(mesh)
    logger.debug(
        f"Generated mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, "
        f"{len(bands)} bulge band(s)"
    )
    return mesh


def _check_areas(mesh: Mesh) -> None:
    areas = mesh.signed_areas()
    if areas.min() <= 0.0:
        raise MeshError(f"mesh has a non-positive triangle area ({areas.min():.3e})")


def refine_mesh(mesh: Mesh) -> Mesh:
    """Split every triangle into four through its edge midpoints.

    Parent vertices keep their indices and coordinates, so the refined P1
    space contains the parent space.  Midpoints lie on the parent chords.
    """
    unique, tri_edges = mesh.edges()
    n = mesh.n_vertices
    p0, p1 = mesh.vertices[unique[:, 0]], mesh.vertices[unique[:, 1]]
    mid = 0.5 * (p0 + p1)

    # polar angle measured from the first endpoint, robust across phi = 0
    phi0 = mesh.polar[unique[:, 0], 1]
    cross = p0[:, 0] * mid[:, 1] - p0[:, 1] * mid[:, 0]
    dot = p0[:, 0] * mid[:, 0] + p0[:, 1] * mid[:, 1]
    phi_mid = phi0 + np.arctan2(cross, dot)
    polar_mid = np.column_stack([np.hypot(mid[:, 0], mid[:, 1]), phi_mid])

    t = mesh.triangles
    m = n + tri_edges  # m[:, k] is the midpoint of edge (k, k+1)
    children = np.concatenate(
        [
            np.column_stack([t[:, 0], m[:, 0], m[:, 2]]),
            np.column_stack([t[:, 1], m[:, 1], m[:, 0]]),
            np.column_stack([t[:, 2], m[:, 2], m[:, 1]]),
            np.column_stack([m[:, 0], m[:, 1], m[:, 2]]),
        ]
    )
    refined = Mesh(
        vertices=np.vstack([mesh.vertices, mid]),
        polar=np.vstack([mesh.polar, polar_mid]),
        triangles=children,
        dirichlet=np.zeros(n + len(unique), dtype=bool),
        region=np.tile(mesh.region, 4),
        grading=replace(mesh.grading, level=mesh.grading.level + 1),
        theta=mesh.theta,
        n_cone_vertices=mesh.n_cone_vertices,
        bands=mesh.bands,
    )
    refined = replace(refined, dirichlet=refined.boundary_vertices())
    _check_areas(refined)
    return refined


def mesh_lines(mesh: Mesh) -> Iterator[str]:
    """Plain-text mesh dump.

    Header ``n_vertices n_triangles``, then ``x y r phi dirichlet`` per
    vertex and ``i j k tag`` per triangle.
    """
    yield f"{mesh.n_vertices} {mesh.n_triangles}\n"
    for (x, y), (r, phi), bc in zip(mesh.vertices, mesh.polar, mesh.dirichlet):
        yield f"{x:.17g} {y:.17g} {r:.17g} {phi:.17g} {int(bc)}\n"
    for (i, j, k), tag in zip(mesh.triangles, mesh.region):
        yield f"{i} {j} {k} {REGION_NAMES[int(tag)]}\n"


def write_mesh(mesh: Mesh, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.writelines(mesh_lines(mesh))
    return path


class WBump(BaseModel):
    """Smooth nonnegative bump subtracted from the Hardy weight.

    Its profile is ``w0 cos^2`` in both log r and phi, supported in
    r_c < r < r_d and phi1 < phi < phi2.
    """

    amplitude: float = Field(ge=0.0, description="Peak value w0")
    r_c: float = Field(gt=0.0)
    r_d: float = Field(gt=0.0)
    phi1: float = Field(gt=0.0)
    phi2: float = Field(gt=0.0)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check_window(self):
        if not self.r_c < self.r_d:
            raise DomainError("bump needs r_c < r_d")
        if not self.phi1 < self.phi2:
            raise DomainError("bump needs phi1 < phi2")
        return self

    def evaluate(self, r: np.ndarray, phi: np.ndarray) -> np.ndarray:
        s = np.log(r)
        s_c = 0.5 * (math.log(self.r_c) + math.log(self.r_d))
        h_s = 0.5 * (math.log(self.r_d) - math.log(self.r_c))
        phi_c = 0.5 * (self.phi1 + self.phi2)
        h_phi = 0.5 * (self.phi2 - self.phi1)
        return self.amplitude * _cos2_window((s - s_c) / h_s) * _cos2_window((phi - phi_c) / h_phi)


def _cos2_window(t: np.ndarray) -> np.ndarray:
    return np.where(np.abs(t) < 1.0, np.cos(0.5 * np.pi * np.clip(t, -1.0, 1.0)) ** 2, 0.0)


class PotentialSpec(BaseModel):
    """Weight V = 1/|x|^2 - sum W (or 1 - sum W without the Hardy term)."""

    hardy: bool = Field(default=True, description="Use the Hardy weight 1/|x|^2")
    w_bumps: list[WBump] = Field(default_factory=list)

    model_config = {"frozen": True}

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        x, y = points[..., 0], points[..., 1]
        r2 = x * x + y * y
        v = 1.0 / r2 if self.hardy else np.ones_like(r2)
        if self.w_bumps:
            r = np.sqrt(r2)
            phi = np.mod(np.arctan2(y, x), 2.0 * np.pi)
            for bump in self.w_bumps:
                v = v - bump.evaluate(r, phi)
        return v

    def check_support(self, domain: DomainSpec) -> None:
        """Every bump must sit strictly inside the unperturbed cone."""
        for bump in self.w_bumps:
            if not (0.0 < bump.phi1 and bump.phi2 < domain.theta):
                raise DomainError(
                    f"W bump angular window ({bump.phi1}, {bump.phi2}) leaves the cone "
                    f"(0, {domain.theta})"
                )
            if not (domain.r_min < bump.r_c and bump.r_d < domain.r_max):
                raise DomainError(
                    f"W bump radial window ({bump.r_c}, {bump.r_d}) leaves the truncation band"
                )

    def with_amplitude(self, amplitude: float) -> PotentialSpec:
        bumps = [b.model_copy(update={"amplitude": amplitude}) for b in self.w_bumps]
        return self.model_copy(update={"w_bumps": bumps})
