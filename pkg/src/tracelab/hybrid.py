"""Hybrid polynomial spaces on a polytopal mesh.

The hybrid space attaches one polynomial block to every cell (degree ``l``)
and one to every face (degree ``r``).  Bases are scaled monomials centered at
the entity centroid and scaled by its diameter; face bases live in a fixed
local frame so coefficient layouts are reproducible bit-for-bit:

* segments (d=2): coordinate s along the unit vector from the
  lexicographically smallest vertex to the largest;
* axis-aligned rectangles (d=3): the two ambient coordinate axes spanning the
  face, in ascending axis order.

Basis ordering is graded: total degree ascending, and within one total degree
the powers follow ``itertools.combinations_with_replacement`` of the axes
(x-powers descending first).  Index 0 is always the constant function 1.

Global DoF layout: all cell blocks (cell index ascending), then interior-face
blocks (face index ascending), then boundary-face blocks (face index
ascending, local basis index ascending).  Boundary DoFs therefore occupy the
trailing contiguous range.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from tracelab.mesh import PolytopalMesh, shoelace_area

VECTOR_FORMAT = "tracelab-hybrid-vector/1"
TRACE_FORMAT = "tracelab-boundary-trace/1"


def poly_dim(degree: int, dim: int) -> int:
    """dim P_degree(R^dim)."""
    num = 1
    for i in range(1, dim + 1):
        num = num * (degree + i) // i
    return num


def multi_indices(dim: int, degree: int) -> list[tuple[int, ...]]:
    out = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), total):
            alpha = [0] * dim
            for axis in combo:
                alpha[axis] += 1
            out.append(tuple(alpha))
    return out


@dataclass
class DegreeConfig:
    """Cell/face polynomial degrees; mixed degrees embed into k = max(l, r)."""

    cell_degree: int
    face_degree: int

    def __post_init__(self):
        if not (0 <= self.cell_degree <= 3 and 0 <= self.face_degree <= 3):
            raise ValueError("degrees must lie in 0..3")

    @property
    def k(self) -> int:
        return max(self.cell_degree, self.face_degree)

    @staticmethod
    def uniform(k: int) -> "DegreeConfig":
        return DegreeConfig(k, k)


class Basis:
    """Scaled monomials on one entity, evaluated at ambient points."""

    def __init__(self, center: np.ndarray, diameter: float, degree: int,
                 frame: np.ndarray | None = None):
        if degree < 0:
            raise ValueError("degree must be >= 0")
        self.center = np.asarray(center, dtype=float)
        self.diameter = float(diameter)
        self.degree = degree
        # frame rows are the local axes; None means the ambient axes
        self.frame = None if frame is None else np.asarray(frame, dtype=float)
        dim = len(self.center) if frame is None else self.frame.shape[0]
        self.exponents = np.array(multi_indices(dim, degree), dtype=int)
        self.size = len(self.exponents)

    def _local(self, points: np.ndarray) -> np.ndarray:
        rel = np.atleast_2d(points) - self.center
        if self.frame is not None:
            rel = rel @ self.frame.T
        return rel / self.diameter

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Values, shape (npoints, size)."""
        z = self._local(points)
        return np.prod(z[:, None, :] ** self.exponents[None, :, :], axis=2)

    def grad(self, points: np.ndarray) -> np.ndarray:
        """Ambient gradients, shape (npoints, size, ambient_dim).

        Only meaningful for cell bases (frame is None).
        """
        if self.frame is not None:
            raise ValueError("gradients are only provided for cell bases")
        z = self._local(points)
        npts, dim = z.shape
        out = np.zeros((npts, self.size, dim))
        for a, alpha in enumerate(self.exponents):
            for axis in range(dim):
                e = alpha[axis]
                if e == 0:
                    continue
                lowered = alpha.copy()
                lowered[axis] -= 1
                out[:, a, axis] = e * np.prod(z ** lowered[None, :], axis=1) / self.diameter
        return out


def scaled_monomial_basis(mesh: PolytopalMesh, entity: tuple[str, int], degree: int) -> Basis:
    """Basis of P_degree on a mesh cell or face."""
    kind, idx = entity
    if kind == "cell":
        c = mesh.cells[idx]
        return Basis(c.centroid, c.diameter, degree)
    if kind == "face":
        f = mesh.faces[idx]
        return Basis(f.centroid, f.diameter, degree, frame=_face_frame(mesh.dim, f.vertices))
    raise ValueError(f"unknown entity kind {kind!r}")


def _face_frame(dim: int, verts: np.ndarray) -> np.ndarray:
    if dim == 2:
        order = np.lexsort(verts.T[::-1])  # lexicographic by (x, y)
        u = verts[order[-1]] - verts[order[0]]
        return (u / np.linalg.norm(u))[None, :]
    ext = verts.max(axis=0) - verts.min(axis=0)
    normal_axis = int(np.argmin(ext))
    axes = [a for a in range(3) if a != normal_axis]
    frame = np.zeros((2, 3))
    frame[0, axes[0]] = 1.0
    frame[1, axes[1]] = 1.0
    return frame


# ---------------------------------------------------------------------------
# quadrature

def _gauss_1d(exactness: int) -> tuple[np.ndarray, np.ndarray]:
    npts = exactness // 2 + 1
    x, w = np.polynomial.legendre.leggauss(npts)
    return x, w


def _segment_rule(a, b, exactness):
    x, w = _gauss_1d(exactness)
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    mid, half = (a + b) / 2.0, (b - a) / 2.0
    pts = mid[None, :] + np.outer(x, half)
    return pts, w * np.linalg.norm(half)


def _tensor_rule(lo, hi, exactness):
    x, w = _gauss_1d(exactness)
    dim = len(lo)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.ones(len(pts))
    for axis in range(dim):
        half = (hi[axis] - lo[axis]) / 2.0
        mid = (hi[axis] + lo[axis]) / 2.0
        pts[:, axis] = mid + half * pts[:, axis]
        wk = np.meshgrid(*([w] * dim), indexing="ij")[axis].ravel()
        wts *= wk * half
    return pts, wts


def _triangle_rule(a, b, c, exactness):
    # collapsed (Duffy) tensor rule: exact for polynomials up to `exactness`
    xu, wu = np.polynomial.legendre.leggauss((exactness + 2) // 2 + 1)
    xv, wv = np.polynomial.legendre.leggauss((exactness + 1) // 2 + 1)
    u = (xu + 1.0) / 2.0
    v = (xv + 1.0) / 2.0
    wu, wv = wu / 2.0, wv / 2.0
    area2 = abs((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]))
    U, V = np.meshgrid(u, v, indexing="ij")
    WU, WV = np.meshgrid(wu, wv, indexing="ij")
    pts = (a[None, :]
           + U.ravel()[:, None] * (b - a)[None, :]
           + (U * V).ravel()[:, None] * (c - b)[None, :])
    wts = (WU * WV * U).ravel() * area2
    return pts, wts


def _is_axis_aligned_rect(verts: np.ndarray) -> bool:
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    corners = {tuple(p) for p in itertools.product(*zip(lo, hi))}
    return len(verts) == 4 and {tuple(p) for p in verts} == corners


def quadrature(mesh: PolytopalMesh, entity: tuple[str, int], exactness: int):
    """Points (ambient coordinates) and weights, exact to ``exactness``."""
    kind, idx = entity
    if kind == "face":
        verts = mesh.faces[idx].vertices
        if mesh.dim == 2:
            return _segment_rule(verts[0], verts[1], exactness)
        ext = verts.max(axis=0) - verts.min(axis=0)
        normal_axis = int(np.argmin(ext))
        lo, hi = verts.min(axis=0), verts.max(axis=0)
        axes = [a for a in range(3) if a != normal_axis]
        pts2, wts = _tensor_rule(lo[axes], hi[axes], exactness)
        pts = np.empty((len(pts2), 3))
        pts[:, axes] = pts2
        pts[:, normal_axis] = lo[normal_axis]
        return pts, wts
    if kind == "cell":
        verts = mesh.cells[idx].vertices
        if mesh.dim == 3:
            return _tensor_rule(verts.min(axis=0), verts.max(axis=0), exactness)
        if _is_axis_aligned_rect(verts):
            return _tensor_rule(verts.min(axis=0), verts.max(axis=0), exactness)
        if shoelace_area(verts) <= 0:
            raise ValueError(f"cell {idx}: vertices not in CCW order")
        # fan sub-triangulation of the convex polygon from its centroid
        center = mesh.cells[idx].centroid
        pts_list, wts_list = [], []
        nv = len(verts)
        for i in range(nv):
            p, w = _triangle_rule(verts[i], verts[(i + 1) % nv], center, exactness)
            pts_list.append(p)
            wts_list.append(w)
        return np.vstack(pts_list), np.concatenate(wts_list)
    raise ValueError(f"unknown entity kind {kind!r}")


# ---------------------------------------------------------------------------
# degrees of freedom

@dataclass
class DofMap:
    dim: int
    cell_degree: int
    face_degree: int
    n_cells: int
    boundary_faces: np.ndarray  # ascending face indices
    interior_faces: np.ndarray
    cell_block: int  # dim P_l(cell)
    face_block: int  # dim P_r(face)
    cell_offsets: np.ndarray
    face_offsets: np.ndarray  # global offset per face index
    bd_positions: dict[int, int]  # face index -> slot in the boundary range
    n_cell_dofs: int
    n_int_dofs: int
    n_bd_dofs: int

    @property
    def n_total(self) -> int:
        return self.n_cell_dofs + self.n_int_dofs + self.n_bd_dofs

    @property
    def n_interior(self) -> int:
        """DoFs eliminated by the boundary Schur complement."""
        return self.n_cell_dofs + self.n_int_dofs

    def cell_slice(self, t: int) -> slice:
        return slice(self.cell_offsets[t], self.cell_offsets[t] + self.cell_block)

    def face_slice(self, k: int) -> slice:
        return slice(self.face_offsets[k], self.face_offsets[k] + self.face_block)

    def bd_slice(self, k: int) -> slice:
        """Slot of boundary face ``k`` within the boundary-DoF range."""
        p = self.bd_positions[k] * self.face_block
        return slice(p, p + self.face_block)


def build_dofmap(mesh: PolytopalMesh, degrees: DegreeConfig) -> DofMap:
    cell_block = poly_dim(degrees.cell_degree, mesh.dim)
    face_block = poly_dim(degrees.face_degree, mesh.dim - 1)
    n_cells = mesh.n_cells
    interior = np.sort(mesh.interior_faces)
    boundary = np.sort(mesh.boundary_faces)
    cell_offsets = np.arange(n_cells) * cell_block
    n_cell_dofs = n_cells * cell_block
    face_offsets = np.full(mesh.n_faces, -1, dtype=int)
    off = n_cell_dofs
    for k in interior:
        face_offsets[k] = off
        off += face_block
    n_int_dofs = off - n_cell_dofs
    for k in boundary:
        face_offsets[k] = off
        off += face_block
    bd_positions = {int(k): i for i, k in enumerate(boundary)}
    return DofMap(
        dim=mesh.dim, cell_degree=degrees.cell_degree, face_degree=degrees.face_degree,
        n_cells=n_cells, boundary_faces=boundary, interior_faces=interior,
        cell_block=cell_block, face_block=face_block,
        cell_offsets=cell_offsets, face_offsets=face_offsets,
        bd_positions=bd_positions, n_cell_dofs=n_cell_dofs,
        n_int_dofs=n_int_dofs, n_bd_dofs=len(boundary) * face_block,
    )


class HybridVector:
    """Element of the hybrid space: one block per cell and per face."""

    def __init__(self, dofmap: DofMap, data: np.ndarray | None = None):
        self.dofmap = dofmap
        if data is None:
            data = np.zeros(dofmap.n_total)
        if len(data) != dofmap.n_total:
            raise ValueError("coefficient array does not match the DoF map")
        self.data = np.asarray(data, dtype=float)

    def cell_block(self, t: int) -> np.ndarray:
        return self.data[self.dofmap.cell_slice(t)]

    def face_block(self, k: int) -> np.ndarray:
        return self.data[self.dofmap.face_slice(k)]

    def copy(self) -> "HybridVector":
        return HybridVector(self.dofmap, self.data.copy())

    def boundary_part(self) -> np.ndarray:
        return self.data[self.dofmap.n_interior:]

    def to_json(self) -> str:
        dm = self.dofmap
        return json.dumps({
            "format": VECTOR_FORMAT, "dim": dm.dim,
            "cell_degree": dm.cell_degree, "face_degree": dm.face_degree,
            "n_total": dm.n_total, "data": self.data.tolist(),
        })


class BoundaryTrace:
    """Element of the boundary hybrid space: one block per boundary face."""

    def __init__(self, dofmap: DofMap, data: np.ndarray | None = None):
        self.dofmap = dofmap
        if data is None:
            data = np.zeros(dofmap.n_bd_dofs)
        if len(data) != dofmap.n_bd_dofs:
            raise ValueError("coefficient array does not match the boundary DoFs")
        self.data = np.asarray(data, dtype=float)

    def block(self, k: int) -> np.ndarray:
        return self.data[self.dofmap.bd_slice(k)]

    def copy(self) -> "BoundaryTrace":
        return BoundaryTrace(self.dofmap, self.data.copy())

    def to_json(self) -> str:
        dm = self.dofmap
        return json.dumps({
            "format": TRACE_FORMAT, "dim": dm.dim,
            "cell_degree": dm.cell_degree, "face_degree": dm.face_degree,
            "n_bd": dm.n_bd_dofs, "data": self.data.tolist(),
        })


class HybridSpace:
    """Mesh + degrees + cached bases, quadratures and face moments."""

    def __init__(self, mesh: PolytopalMesh, degrees: DegreeConfig):
        self.mesh = mesh
        self.degrees = degrees
        self.dofmap = build_dofmap(mesh, degrees)
        self.exactness = 2 * degrees.k + 1
        self._cell_basis = [scaled_monomial_basis(mesh, ("cell", t), degrees.cell_degree)
                            for t in range(mesh.n_cells)]
        self._face_basis = [scaled_monomial_basis(mesh, ("face", k), degrees.face_degree)
                            for k in range(mesh.n_faces)]
        self._cell_quad: dict[int, tuple] = {}
        self._face_quad: dict[int, tuple] = {}
        self._cell_tab: dict[int, tuple] = {}
        self._face_tab: dict[int, np.ndarray] = {}
        self._cell_on_face: dict[tuple[int, int], np.ndarray] = {}

    def cell_basis(self, t: int) -> Basis:
        return self._cell_basis[t]

    def face_basis(self, k: int) -> Basis:
        return self._face_basis[k]

    def cell_quad(self, t: int):
        if t not in self._cell_quad:
            self._cell_quad[t] = quadrature(self.mesh, ("cell", t), self.exactness)
        return self._cell_quad[t]

    def face_quad(self, k: int):
        if k not in self._face_quad:
            self._face_quad[k] = quadrature(self.mesh, ("face", k), self.exactness)
        return self._face_quad[k]

    def cell_tab(self, t: int):
        """(values, gradients) of the cell basis at its quadrature points."""
        if t not in self._cell_tab:
            pts, _ = self.cell_quad(t)
            basis = self.cell_basis(t)
            self._cell_tab[t] = (basis.eval(pts), basis.grad(pts))
        return self._cell_tab[t]

    def face_tab(self, k: int) -> np.ndarray:
        """Values of the face basis at the face quadrature points."""
        if k not in self._face_tab:
            pts, _ = self.face_quad(k)
            self._face_tab[k] = self.face_basis(k).eval(pts)
        return self._face_tab[k]

    def cell_on_face(self, t: int, k: int) -> np.ndarray:
        """Values of cell t's basis at face k's quadrature points."""
        if (t, k) not in self._cell_on_face:
            pts, _ = self.face_quad(k)
            self._cell_on_face[t, k] = self.cell_basis(t).eval(pts)
        return self._cell_on_face[t, k]

    def face_moment(self, k: int) -> np.ndarray:
        """Vector of integrals of the face basis over face k."""
        _, wts = self.face_quad(k)
        return wts @ self.face_tab(k)

    def face_mass(self, k: int) -> np.ndarray:
        _, wts = self.face_quad(k)
        vals = self.face_tab(k)
        return vals.T @ (vals * wts[:, None])

    def face_average(self, k: int, coeffs: np.ndarray) -> float:
        """Mean over face k of the polynomial with the given coefficients."""
        return float(self.face_moment(k) @ coeffs) / self.mesh.faces[k].measure


def project_p0(space: HybridSpace, entity: tuple[str, int], data) -> float:
    """L2-orthogonal projection onto constants: the mean over the entity.

    ``data`` is either a callable on ambient points or a coefficient block of
    the entity's own basis.
    """
    kind, idx = entity
    measure = (space.mesh.cells[idx].measure if kind == "cell"
               else space.mesh.faces[idx].measure)
    if measure <= 0:
        raise ValueError(f"{kind} {idx} has zero measure")
    pts, wts = space.cell_quad(idx) if kind == "cell" else space.face_quad(idx)
    if callable(data):
        vals = np.asarray(data(pts), dtype=float)
    else:
        basis = space.cell_basis(idx) if kind == "cell" else space.face_basis(idx)
        vals = basis.eval(pts) @ np.asarray(data, dtype=float)
    return float(wts @ vals) / measure


def trace(space: HybridSpace, v: HybridVector) -> BoundaryTrace:
    """Restriction to boundary-face blocks (cell/interior data dropped)."""
    w = BoundaryTrace(space.dofmap)
    w.data[:] = v.data[space.dofmap.n_interior:]
    return w


def constant_vector(space: HybridSpace, c: float) -> HybridVector:
    """Hybrid vector representing the constant function c on every block."""
    v = HybridVector(space.dofmap)
    for t in range(space.mesh.n_cells):
        v.cell_block(t)[0] = c
    for k in range(space.mesh.n_faces):
        v.face_block(k)[0] = c
    return v


def constant_trace(space: HybridSpace, c: float) -> BoundaryTrace:
    w = BoundaryTrace(space.dofmap)
    for k in space.dofmap.boundary_faces:
        w.block(int(k))[0] = c
    return w
