"""Polytopal hybrid meshes of the unit square/cube.

A mesh is the pair (cells, faces) with explicit face-to-cell adjacency.
Supported families:

* Cartesian grids of the square (d=2) and cube (d=3), optionally scaled by
  ``extent`` so scaling experiments can rebuild the same topology on a
  dilated domain;
* perturbed-quad meshes of the square (d=2): a Cartesian grid whose interior
  vertices are jittered, giving genuinely polytopal (non-affine-equivalent)
  convex quadrilaterals while boundary faces stay on the square's sides.

Centroids are vertex barycenters; for the convex entities used here the
barycenter satisfies the inscribed-ball condition, which ``validate`` checks.
All lengths/measures are computed exactly from vertices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from tracelab.rng import STREAM_MESH_JITTER, make_rng

MESH_FORMAT = "tracelab-mesh/1"


@dataclass
class Cell:
    vertices: np.ndarray  # (nv, d) coordinates, CCW for d=2
    centroid: np.ndarray
    diameter: float
    measure: float
    inscribed_radius: float


@dataclass
class Face:
    vertices: np.ndarray  # (nv, d) coordinates
    centroid: np.ndarray
    diameter: float
    measure: float
    inscribed_radius: float
    normal: np.ndarray  # unit; outward for boundary faces
    boundary: bool


@dataclass
class MeshStats:
    h: float  # max cell diameter
    rho_qu: float  # max_t h / h_t
    varpi: float  # min over cells and faces of inscribed_radius / diameter


@dataclass
class PolytopalMesh:
    dim: int
    extent: float  # domain is [0, extent]^dim
    vertices: np.ndarray  # (nv, dim)
    cells: list[Cell]
    faces: list[Face]
    cell_vertex_ids: list[list[int]]
    face_vertex_ids: list[list[int]]
    face_owner: list[tuple[int, int | None]]
    cell_faces: list[list[int]]
    boundary_faces: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    interior_faces: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def scaled(self, mu: float) -> "PolytopalMesh":
        """Same topology on the domain dilated by ``mu`` about the origin."""
        if mu <= 0:
            raise ValueError("scaling factor must be positive")
        return _from_topology(
            self.dim, self.extent * mu, self.vertices * mu,
            self.cell_vertex_ids, self.face_vertex_ids, self.face_owner,
        )

    def with_face_order(self, perm: np.ndarray) -> "PolytopalMesh":
        """Renumber faces so new face ``k`` is old face ``perm[k]``."""
        perm = np.asarray(perm, dtype=int)
        if sorted(perm.tolist()) != list(range(self.n_faces)):
            raise ValueError("perm must be a permutation of the face indices")
        face_vertex_ids = [self.face_vertex_ids[p] for p in perm]
        face_owner = [self.face_owner[p] for p in perm]
        return _from_topology(
            self.dim, self.extent, self.vertices,
            self.cell_vertex_ids, face_vertex_ids, face_owner,
        )

    def to_json(self) -> str:
        doc = {
            "format": MESH_FORMAT,
            "dim": self.dim,
            "extent": self.extent,
            "vertices": self.vertices.tolist(),
            "cells": self.cell_vertex_ids,
            "faces": [
                {"vertices": fv, "owners": [o for o in own if o is not None]}
                for fv, own in zip(self.face_vertex_ids, self.face_owner)
            ],
        }
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> "PolytopalMesh":
        doc = json.loads(text)
        if doc.get("format") != MESH_FORMAT:
            raise ValueError(f"unsupported mesh format: {doc.get('format')!r}")
        face_vertex_ids = [list(f["vertices"]) for f in doc["faces"]]
        face_owner = [
            (f["owners"][0], f["owners"][1] if len(f["owners"]) > 1 else None)
            for f in doc["faces"]
        ]
        return _from_topology(
            int(doc["dim"]), float(doc["extent"]),
            np.asarray(doc["vertices"], dtype=float),
            [list(c) for c in doc["cells"]], face_vertex_ids, face_owner,
        )


# ---------------------------------------------------------------------------
# geometry helpers

def _diameter(pts: np.ndarray) -> float:
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d * d).sum(axis=2)).max())


def shoelace_area(pts: np.ndarray) -> float:
    """Signed area of a polygon given CCW (positive) vertex order."""
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _polygon_inradius(pts: np.ndarray, center: np.ndarray) -> float:
    """Distance from ``center`` to the nearest edge line (convex polygon)."""
    r = np.inf
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        e = b - a
        ln = np.hypot(e[0], e[1])
        r = min(r, abs(e[0] * (center[1] - a[1]) - e[1] * (center[0] - a[0])) / ln)
    return float(r)


def is_convex_ccw(pts: np.ndarray, tol: float = 0.0) -> bool:
    """Strict convexity of a CCW polygon (all corner cross products > tol)."""
    n = len(pts)
    for i in range(n):
        a, b, c = pts[i - 1], pts[i], pts[(i + 1) % n]
        u, v = b - a, c - b
        if u[0] * v[1] - u[1] * v[0] <= tol:
            return False
    return True


def _cell_geometry(dim: int, pts: np.ndarray) -> Cell:
    centroid = pts.mean(axis=0)
    diam = _diameter(pts)
    if dim == 2:
        measure = abs(shoelace_area(pts))
        inradius = _polygon_inradius(pts, centroid)
    else:
        # axis-aligned box: measure and inradius from the extents
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        ext = hi - lo
        measure = float(np.prod(ext))
        inradius = float(ext.min() / 2.0)
    return Cell(pts, centroid, diam, measure, inradius)


def _face_geometry(dim: int, pts: np.ndarray) -> tuple[np.ndarray, float, float, float, np.ndarray]:
    centroid = pts.mean(axis=0)
    diam = _diameter(pts)
    if dim == 2:
        measure = float(np.linalg.norm(pts[1] - pts[0]))
        inradius = measure / 2.0
        e = pts[1] - pts[0]
        normal = np.array([e[1], -e[0]]) / np.linalg.norm(e)
    else:
        # axis-aligned rectangle in 3D
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        ext = hi - lo
        axis = int(np.argmin(ext))
        in_plane = np.delete(ext, axis)
        measure = float(np.prod(in_plane))
        inradius = float(in_plane.min() / 2.0)
        normal = np.zeros(3)
        normal[axis] = 1.0
    return centroid, diam, measure, inradius, normal


def _from_topology(dim, extent, vertices, cell_vertex_ids, face_vertex_ids, face_owner):
    cells = [_cell_geometry(dim, vertices[ids]) for ids in cell_vertex_ids]
    faces = []
    cell_faces: list[list[int]] = [[] for _ in cells]
    boundary, interior = [], []
    for k, (ids, owners) in enumerate(zip(face_vertex_ids, face_owner)):
        pts = vertices[ids]
        centroid, diam, measure, inradius, normal = _face_geometry(dim, pts)
        is_bd = owners[1] is None
        if is_bd:
            # orient outward from the single owner
            if np.dot(normal, centroid - cells[owners[0]].centroid) < 0:
                normal = -normal
            boundary.append(k)
        else:
            if np.dot(normal, cells[owners[1]].centroid - cells[owners[0]].centroid) < 0:
                normal = -normal
            interior.append(k)
        faces.append(Face(pts, centroid, diam, measure, inradius, normal, is_bd))
        for o in owners:
            if o is not None:
                cell_faces[o].append(k)
    return PolytopalMesh(
        dim=dim, extent=extent, vertices=np.asarray(vertices, dtype=float),
        cells=cells, faces=faces,
        cell_vertex_ids=[list(c) for c in cell_vertex_ids],
        face_vertex_ids=[list(f) for f in face_vertex_ids],
        face_owner=list(face_owner), cell_faces=cell_faces,
        boundary_faces=np.array(boundary, dtype=int),
        interior_faces=np.array(interior, dtype=int),
    )


def _collect_faces(n_cells: int, cell_face_vertex_lists):
    """Dedupe faces by sorted vertex key, in first-encounter order."""
    face_vertex_ids: list[list[int]] = []
    face_owner: list[tuple[int, int | None]] = []
    index: dict[tuple[int, ...], int] = {}
    for t in range(n_cells):
        for ids in cell_face_vertex_lists(t):
            key = tuple(sorted(ids))
            k = index.get(key)
            if k is None:
                index[key] = len(face_vertex_ids)
                face_vertex_ids.append(list(ids))
                face_owner.append((t, None))
            else:
                if face_owner[k][1] is not None:
                    raise ValueError(f"face {k}: more than 2 owner cells")
                face_owner[k] = (face_owner[k][0], t)
    return face_vertex_ids, face_owner


# ---------------------------------------------------------------------------
# constructors

def build_cartesian(dim: int, n: int, extent: float = 1.0) -> PolytopalMesh:
    """Uniform Cartesian mesh of [0, extent]^dim with n cells per side."""
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    if n < 1:
        raise ValueError("n must be >= 1")
    axis = np.linspace(0.0, extent, n + 1)
    if dim == 2:
        vid = lambda i, j: j * (n + 1) + i
        vertices = np.array([[axis[i], axis[j]] for j in range(n + 1) for i in range(n + 1)])
        cell_vertex_ids = [
            [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
            for j in range(n) for i in range(n)
        ]

        def cell_face_lists(t):
            ids = cell_vertex_ids[t]
            return [[ids[i], ids[(i + 1) % 4]] for i in range(4)]

    else:
        vid = lambda i, j, k: (k * (n + 1) + j) * (n + 1) + i
        vertices = np.array([
            [axis[i], axis[j], axis[k]]
            for k in range(n + 1) for j in range(n + 1) for i in range(n + 1)
        ])
        cell_vertex_ids = []
        for k in range(n):
            for j in range(n):
                for i in range(n):
                    cell_vertex_ids.append([
                        vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k),
                        vid(i, j, k + 1), vid(i + 1, j, k + 1), vid(i + 1, j + 1, k + 1), vid(i, j + 1, k + 1),
                    ])

        # local corner numbering: 0..3 bottom (z=k), 4..7 top (z=k+1)
        box_faces = [
            [0, 1, 2, 3], [4, 5, 6, 7],  # z-min, z-max
            [0, 1, 5, 4], [3, 2, 6, 7],  # y-min, y-max
            [0, 3, 7, 4], [1, 2, 6, 5],  # x-min, x-max
        ]

        def cell_face_lists(t):
            ids = cell_vertex_ids[t]
            return [[ids[c] for c in corners] for corners in box_faces]

    face_vertex_ids, face_owner = _collect_faces(len(cell_vertex_ids), cell_face_lists)
    return _from_topology(dim, extent, vertices, cell_vertex_ids, face_vertex_ids, face_owner)


def build_perturbed_quads(n: int, amplitude: float, seed: int) -> PolytopalMesh:
    """Cartesian grid of the unit square with jittered interior vertices.

    Each interior vertex moves by a uniform offset in
    [-amplitude/n, amplitude/n]^2; boundary vertices stay put, so boundary
    faces coincide with the Cartesian ones.  Deterministic for fixed seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= amplitude <= 0.3:
        raise ValueError("amplitude must lie in [0, 0.3]")
    base = build_cartesian(2, n)
    vertices = base.vertices.copy()
    rng = make_rng(seed, STREAM_MESH_JITTER)
    for j in range(1, n):
        for i in range(1, n):
            vertices[j * (n + 1) + i] += rng.uniform(-amplitude / n, amplitude / n, size=2)
    mesh = _from_topology(2, 1.0, vertices, base.cell_vertex_ids,
                          base.face_vertex_ids, base.face_owner)
    for t, ids in enumerate(mesh.cell_vertex_ids):
        if not is_convex_ccw(vertices[ids]):
            raise ValueError(f"cell {t} is non-convex after perturbation")
    return mesh


# ---------------------------------------------------------------------------
# statistics and validation

def mesh_stats(mesh: PolytopalMesh) -> MeshStats:
    h = max(c.diameter for c in mesh.cells)
    rho = max(h / c.diameter for c in mesh.cells)
    varpi = min(
        min(c.inscribed_radius / c.diameter for c in mesh.cells),
        min(f.inscribed_radius / f.diameter for f in mesh.faces),
    )
    return MeshStats(h=h, rho_qu=rho, varpi=varpi)


def validate(mesh: PolytopalMesh, rel_tol: float = 1e-12) -> list[str]:
    """Invariant diagnostics; an empty list means the mesh is consistent."""
    out: list[str] = []
    n_owned = np.zeros(mesh.n_faces, dtype=int)
    for t, fl in enumerate(mesh.cell_faces):
        for k in fl:
            n_owned[k] += 1
    for k, owners in enumerate(mesh.face_owner):
        n = sum(1 for o in owners if o is not None)
        if n_owned[k] != n:
            out.append(f"face {k}: owner list and cell_faces disagree")
        if n not in (1, 2):
            out.append(f"face {k}: {n} owners")
        if n == 1 and k not in set(mesh.boundary_faces.tolist()):
            out.append(f"face {k}: single owner but not flagged boundary")
        if n == 2 and k not in set(mesh.interior_faces.tolist()):
            out.append(f"face {k}: two owners but not flagged interior")
    if sorted(mesh.boundary_faces.tolist() + mesh.interior_faces.tolist()) != list(range(mesh.n_faces)):
        out.append("boundary/interior face sets do not partition the face list")

    vol = sum(c.measure for c in mesh.cells)
    vol_ref = mesh.extent ** mesh.dim
    if abs(vol - vol_ref) > rel_tol * vol_ref:
        out.append(f"volume mismatch: cells sum to {vol!r}, domain has {vol_ref!r}")
    area = sum(mesh.faces[k].measure for k in mesh.boundary_faces)
    area_ref = 2 * mesh.dim * mesh.extent ** (mesh.dim - 1)
    if abs(area - area_ref) > rel_tol * area_ref:
        out.append(f"boundary measure mismatch: faces sum to {area!r}, expected {area_ref!r}")

    handshake = sum(
        sum(1 for k in fl if mesh.face_owner[k][1] is not None) for fl in mesh.cell_faces
    )
    if handshake != 2 * len(mesh.interior_faces):
        out.append("interior-face handshake violated")

    for t, c in enumerate(mesh.cells):
        if not c.inscribed_radius > 0:
            out.append(f"cell {t}: centroid has no positive inscribed radius")
    center = np.full(mesh.dim, mesh.extent / 2.0)
    for k in mesh.boundary_faces:
        f = mesh.faces[k]
        nrm = f.normal
        if np.sum(np.abs(np.abs(nrm) - 1.0) < 1e-12) != 1 or np.sum(np.abs(nrm) < 1e-12) != mesh.dim - 1:
            out.append(f"boundary face {k}: normal not axis-aligned")
        elif np.dot(nrm, f.centroid - center) <= 0:
            out.append(f"boundary face {k}: normal not outward")
    return out
