"""Explicit boundary liftings: flat-side, glued, and discrete harmonic.

Flat-side mode treats one side of the square/cube as the boundary.  Cell
values of the lift are weighted averages of boundary face means,

    v_t = sum_f mean(w_f) * rho_t(f),      rho_t(f) = |f| / |A_t| if f in A_t,

where A_t collects the side faces within in-side distance delta_t of the
vertical projection p(x_t); interior faces take the mean of their two
neighbouring cell values and the selected-side faces copy w verbatim.
Non-selected boundary sides inherit the adjacent cell value, which keeps the
result a well-defined hybrid vector (the glued mode overwrites them).

Glued mode lifts a trace prescribed on the whole boundary of the unit
square: subtract the boundary mean, run one flat lift per side, scale each by
the lowest-order projections of a partition of unity subordinate to four
side charts, sum, and add the mean back.  Boundary blocks are copied from w,
so the trace identity holds coefficientwise.

The partition of unity is built from C^1 cubic ramps in the side arclength:
each eta_i equals 1 on the middle 60% of its side and descends to 0 across a
ramp of width 0.4 centered at each corner, so adjacent charts overlap and
sum exactly to 1 on the boundary.  Into the domain, eta_i is extended along
the corner diagonals (arguments tau - nu) and cut off at distance 0.4 from
its side.  Each eta_i vanishes within margin 0.1 of its chart boundary,
which plays the role of the overlap parameter h0 = 1/10.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from tracelab.hybrid import (
    BoundaryTrace,
    HybridSpace,
    HybridVector,
    quadrature,
)
from tracelab.mesh import PolytopalMesh

SIDE_NAMES_2D = {"bottom": (1, 0), "right": (0, 1), "top": (1, 1), "left": (0, 0)}
POU_EXACTNESS = 7  # quadrature degree for projecting the partition of unity
H0_MARGIN = 0.1  # each eta vanishes within this distance of its chart boundary


@dataclass(frozen=True)
class FlatSide:
    axis: int
    end: int  # 0: coordinate 0, 1: coordinate `extent`

    @staticmethod
    def named(name: str, dim: int = 2) -> "FlatSide":
        if dim == 2 and name in SIDE_NAMES_2D:
            return FlatSide(*SIDE_NAMES_2D[name])
        if len(name) == 2 and name[0] in "xyz" and name[1] in "01":
            return FlatSide("xyz".index(name[0]), int(name[1]))
        raise ValueError(f"unknown side {name!r}")


@dataclass
class LiftContext:
    """Per-side geometry: projections, distances, face sets and weights."""

    mesh: PolytopalMesh
    side: FlatSide
    side_coord: float
    side_faces: np.ndarray  # ascending global face indices on the side
    delta_cells: np.ndarray  # (n_cells,)
    delta_int_faces: dict[int, float]
    rho: np.ndarray  # (n_cells, n_side_faces) weights, rows sum to 1
    in_at: np.ndarray  # boolean membership f in A_t
    face_of_int: dict[int, int]  # interior face -> selected side face (global)
    faces_above: dict[int, list[int]]  # side face -> interior faces mapped to it

    def project(self, points: np.ndarray) -> np.ndarray:
        out = np.array(points, dtype=float, copy=True)
        out[..., self.side.axis] = self.side_coord
        return out

    @property
    def inward_normal(self) -> np.ndarray:
        n = np.zeros(self.mesh.dim)
        n[self.side.axis] = 1.0 if self.side.end == 0 else -1.0
        return n


def _side_face_box(mesh: PolytopalMesh, k: int, axis: int):
    """(lo, hi) of the face in the side plane, with the normal axis dropped."""
    verts = np.delete(mesh.faces[k].vertices, axis, axis=1)
    return verts.min(axis=0), verts.max(axis=0)


def _dist_to_box(p: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    d = np.maximum(np.maximum(lo - p, 0.0), p - hi)
    return float(np.sqrt((d * d).sum()))


def build_lift_context(mesh: PolytopalMesh, side: FlatSide | str) -> LiftContext:
    if isinstance(side, str):
        side = FlatSide.named(side, mesh.dim)
    coord = 0.0 if side.end == 0 else mesh.extent
    eps = 1e-12 * mesh.extent

    side_faces = np.array(sorted(
        int(k) for k in mesh.boundary_faces
        if abs(mesh.faces[k].centroid[side.axis] - coord) <= eps
    ))
    if len(side_faces) == 0:
        raise ValueError("selected side carries no boundary faces")
    boxes = [_side_face_box(mesh, int(k), side.axis) for k in side_faces]
    measures = np.array([mesh.faces[int(k)].measure for k in side_faces])

    n_cells = mesh.n_cells
    delta_cells = np.array([abs(c.centroid[side.axis] - coord) for c in mesh.cells])
    in_at = np.zeros((n_cells, len(side_faces)), dtype=bool)
    for t in range(n_cells):
        p = np.delete(mesh.cells[t].centroid, side.axis)
        for j, (lo, hi) in enumerate(boxes):
            in_at[t, j] = _dist_to_box(p, lo, hi) <= delta_cells[t] + eps
    area = in_at @ measures
    if np.any(area <= 0):
        raise ValueError("a cell has an empty face set A_t")
    rho = np.where(in_at, measures[None, :], 0.0) / area[:, None]

    delta_int = {}
    face_of_int = {}
    faces_above: dict[int, list[int]] = {int(k): [] for k in side_faces}
    for g in mesh.interior_faces:
        g = int(g)
        x_g = mesh.faces[g].centroid
        delta_int[g] = abs(x_g[side.axis] - coord)
        p = np.delete(x_g, side.axis)
        # the face whose closure contains p(x_g); ties -> smallest global index
        chosen = None
        for j, (lo, hi) in enumerate(boxes):
            if _dist_to_box(p, lo, hi) <= eps:
                chosen = int(side_faces[j])
                break
        if chosen is None:  # fall back to the nearest face (robustness)
            j = int(np.argmin([_dist_to_box(p, lo, hi) for lo, hi in boxes]))
            chosen = int(side_faces[j])
        face_of_int[g] = chosen
        faces_above[chosen].append(g)

    return LiftContext(
        mesh=mesh, side=side, side_coord=coord, side_faces=side_faces,
        delta_cells=delta_cells, delta_int_faces=delta_int,
        rho=rho, in_at=in_at, face_of_int=face_of_int, faces_above=faces_above,
    )


def _side_face_means(space: HybridSpace, ctx: LiftContext, w: BoundaryTrace) -> np.ndarray:
    return np.array([space.face_average(int(k), w.block(int(k))) for k in ctx.side_faces])


def lift_flat(space: HybridSpace, ctx: LiftContext, w: BoundaryTrace) -> HybridVector:
    """Flat-side lift: only the blocks of w on the selected side are used."""
    if space.mesh is not ctx.mesh:
        raise ValueError("lift context was built for a different mesh")
    mesh = space.mesh
    v = HybridVector(space.dofmap)
    cell_vals = ctx.rho @ _side_face_means(space, ctx, w)
    for t in range(mesh.n_cells):
        v.cell_block(t)[0] = cell_vals[t]
    side = set(int(k) for k in ctx.side_faces)
    for g in mesh.interior_faces:
        g = int(g)
        t, tp = mesh.face_owner[g]
        v.face_block(g)[0] = (cell_vals[t] + cell_vals[tp]) / 2.0
    for k in mesh.boundary_faces:
        k = int(k)
        if k in side:
            v.face_block(k)[:] = w.block(k)
        else:
            v.face_block(k)[0] = cell_vals[mesh.face_owner[k][0]]
    return v


def dump_weights(ctx: LiftContext, path: str) -> None:
    """CSV of (cell, face, rho_t(f)) triples for the nonzero weights."""
    with open(path, "w") as fh:
        fh.write("cell,face,rho\n")
        for t in range(ctx.mesh.n_cells):
            for j, k in enumerate(ctx.side_faces):
                if ctx.in_at[t, j]:
                    fh.write(f"{t},{int(k)},{float(ctx.rho[t, j])!r}\n")


# ---------------------------------------------------------------------------
# partition of unity on the unit square boundary

def _smoothstep(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _ramp(u: np.ndarray) -> np.ndarray:
    """0 at u <= -0.2, 1/2 at 0, 1 at u >= 0.2 (C^1 cubic)."""
    return _smoothstep((u + 0.2) / 0.4)


def _vertical_cutoff(s: np.ndarray) -> np.ndarray:
    """1 up to 0.2 from the side, 0 beyond 0.4."""
    return 1.0 - _smoothstep((s - 0.2) / 0.2)


class PartitionOfUnity:
    """Four C^1 chart weights on the unit square, one per side.

    On the boundary the weights sum to 1 exactly: the descent of one chart
    across a corner is the complementary cubic ramp of its neighbour's rise.
    """

    #: charts in arclength order with (axis, end): bottom, right, top, left
    CHARTS = [(1, 0), (0, 1), (1, 1), (0, 0)]

    def __init__(self, extent: float = 1.0):
        self.extent = extent
        self.n_charts = 4

    def _tau_nu(self, i: int, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        E = self.extent
        x, y = pts[:, 0], pts[:, 1]
        if i == 0:  # bottom
            return x, y
        if i == 1:  # right
            return y, E - x
        if i == 2:  # top
            return E - x, E - y
        return E - y, x  # left

    def eval(self, i: int, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        tau, nu = self._tau_nu(i, pts)
        E = self.extent
        return (_ramp((tau - nu) / E)
                * _ramp(((E - tau) - nu) / E)
                * _vertical_cutoff(nu / E))

    def eval_all(self, pts: np.ndarray) -> np.ndarray:
        return np.stack([self.eval(i, pts) for i in range(self.n_charts)])

    def side_for_chart(self, i: int) -> FlatSide:
        return FlatSide(*self.CHARTS[i])


class GluedLifter:
    """Lifting of traces on the whole boundary of the unit square."""

    def __init__(self, space: HybridSpace, pou: PartitionOfUnity | None = None):
        mesh = space.mesh
        if mesh.dim != 2:
            raise ValueError("the glued lifting is built on the unit square (d=2)")
        self.space = space
        self.pou = pou if pou is not None else PartitionOfUnity(mesh.extent)
        self.contexts = [
            build_lift_context(mesh, self.pou.side_for_chart(i))
            for i in range(self.pou.n_charts)
        ]
        # lowest-order projections of each chart weight on cells and
        # interior faces, with a fixed quadrature independent of the space
        self.pi0_cells = np.empty((self.pou.n_charts, mesh.n_cells))
        self.pi0_int = {int(g): np.empty(self.pou.n_charts) for g in mesh.interior_faces}
        for t in range(mesh.n_cells):
            pts, wts = quadrature(mesh, ("cell", t), POU_EXACTNESS)
            vals = self.pou.eval_all(pts) @ wts
            self.pi0_cells[:, t] = vals / mesh.cells[t].measure
        for g in mesh.interior_faces:
            g = int(g)
            pts, wts = quadrature(mesh, ("face", g), POU_EXACTNESS)
            self.pi0_int[g] = (self.pou.eval_all(pts) @ wts) / mesh.faces[g].measure
        self.perimeter = sum(mesh.faces[int(k)].measure for k in mesh.boundary_faces)

    def boundary_mean(self, w: BoundaryTrace) -> float:
        total = 0.0
        for k in self.space.dofmap.boundary_faces:
            k = int(k)
            total += float(self.space.face_moment(k) @ w.block(k))
        return total / self.perimeter

    def apply(self, w: BoundaryTrace) -> HybridVector:
        space, mesh = self.space, self.space.mesh
        mean = self.boundary_mean(w)
        w0 = w.copy()
        for k in space.dofmap.boundary_faces:
            w0.block(int(k))[0] -= mean

        # per-chart flat cell values of the mean-free trace
        tilde = np.stack([
            ctx.rho @ _side_face_means(space, ctx, w0) for ctx in self.contexts
        ])

        v = HybridVector(space.dofmap)
        cell_vals = mean + np.einsum("it,it->t", self.pi0_cells, tilde)
        for t in range(mesh.n_cells):
            v.cell_block(t)[0] = cell_vals[t]
        for g in mesh.interior_faces:
            g = int(g)
            t, tp = mesh.face_owner[g]
            mids = (tilde[:, t] + tilde[:, tp]) / 2.0
            v.face_block(g)[0] = mean + float(self.pi0_int[g] @ mids)
        for k in mesh.boundary_faces:
            k = int(k)
            v.face_block(k)[:] = w.block(k)
        return v


def glued_lift(space: HybridSpace, w: BoundaryTrace,
               pou: PartitionOfUnity | None = None) -> HybridVector:
    """Lift w from the whole boundary; trace(result) == w coefficientwise.

    The lifter (contexts + chart projections) is cached on the space.
    """
    lifter = getattr(space, "_glued_lifter", None)
    if lifter is None or pou is not None:
        lifter = GluedLifter(space, pou)
        if pou is None:
            space._glued_lifter = lifter  # type: ignore[attr-defined]
    return lifter.apply(w)


def harmonic_extension(space: HybridSpace, A: sp.spmatrix, w: BoundaryTrace,
                       solver=None) -> HybridVector:
    """Discrete harmonic extension: minimizer of v^T A v with trace w."""
    from tracelab.spectral import InteriorSolver

    if solver is None:
        solver = InteriorSolver(A, space.dofmap)
    return HybridVector(space.dofmap, solver.extend(w.data))
