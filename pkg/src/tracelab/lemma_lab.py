"""Flat-side set catalog and empirical verification of the technical lemmas.

The flat-side mode fixes one side of the unit square/cube as "the boundary":
all face pairs, layers and weights below refer to that side only.  The
catalog materializes the sets used by the trace/lifting proofs:

* W_l: ordered pairs of distinct side faces with (l-1)h <= |x_f - x_f'| < lh;
* V_f: cells intersected by the vertical ray from x_f;
* L_m: cells with mh <= delta_t < (m+1)h (distance of centroid to the side);
* I_ff': cells intersected by the horizontal segment at height |x_f - x_f'|
  joining the lifted centroids of f and f';
* C_ff's: the cells of I_ff' grouped by horizontal distance of p(x_t) to f;
* the lifting sets A_t, A_g, Delta_g and the weight differences D_g rho.

Segment-cell intersection uses convex clipping with an inclusive tolerance:
measure-zero contact counts as intersecting, which can only enlarge the sets
and therefore only strengthens the bounds being checked.

Every inequality lemma carries an unspecified constant, so each check
reports the empirical constant (the max of the scaled quantity); refinement
stability of these constants is asserted by the acceptance suite.  The only
explicit constant in the theory, the discrete Hardy bound 18, is asserted
outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tracelab.hybrid import BoundaryTrace, HybridSpace, HybridVector
from tracelab.lifting import FlatSide, LiftContext, build_lift_context, glued_lift
from tracelab.mesh import PolytopalMesh, mesh_stats
from tracelab.rng import make_rng
from tracelab.seminorms import (
    OperatorBundle,
    boundary_l2,
    hhalf_parts_direct,
)
from tracelab.spectral import InteriorSolver


def in_annulus(y: np.ndarray, x: np.ndarray, r1: float, r2: float) -> bool:
    """Membership in the annulus with radii r1 > r2 (inner closed, outer open)."""
    d = float(np.linalg.norm(np.asarray(y) - np.asarray(x)))
    return r2 <= d < r1


def in_disc(y: np.ndarray, x: np.ndarray, r: float) -> bool:
    return float(np.linalg.norm(np.asarray(y) - np.asarray(x))) <= r


def _segment_intersects_polygon(verts: np.ndarray, a: np.ndarray, b: np.ndarray,
                                eps: float) -> bool:
    """Clip [a,b] against a CCW convex polygon, inclusively (touch counts)."""
    d = b - a
    t_lo, t_hi = 0.0, 1.0
    n = len(verts)
    for i in range(n):
        p, q = verts[i], verts[(i + 1) % n]
        e = q - p
        nx, ny = e[1], -e[0]  # outward normal of a CCW polygon edge
        denom = d[0] * nx + d[1] * ny
        num = (p[0] - a[0]) * nx + (p[1] - a[1]) * ny + eps
        if abs(denom) < 1e-300:
            if num < 0:
                return False
            continue
        t = num / denom
        if denom > 0:
            t_hi = min(t_hi, t)
        else:
            t_lo = max(t_lo, t)
        if t_hi < t_lo:
            return False
    return True


def _segment_intersects_box(lo: np.ndarray, hi: np.ndarray, a: np.ndarray,
                            b: np.ndarray, eps: float) -> bool:
    d = b - a
    t_lo, t_hi = 0.0, 1.0
    for axis in range(len(lo)):
        if abs(d[axis]) < 1e-300:
            if a[axis] < lo[axis] - eps or a[axis] > hi[axis] + eps:
                return False
            continue
        t1 = (lo[axis] - eps - a[axis]) / d[axis]
        t2 = (hi[axis] + eps - a[axis]) / d[axis]
        if t1 > t2:
            t1, t2 = t2, t1
        t_lo = max(t_lo, t1)
        t_hi = min(t_hi, t2)
        if t_hi < t_lo:
            return False
    return True


def segment_intersects_cell(mesh: PolytopalMesh, t: int, a: np.ndarray,
                            b: np.ndarray, eps: float) -> bool:
    verts = mesh.cells[t].vertices
    if mesh.dim == 2:
        return _segment_intersects_polygon(verts, a, b, eps)
    return _segment_intersects_box(verts.min(axis=0), verts.max(axis=0), a, b, eps)


@dataclass
class SetCatalog:
    """All proof-level sets for one flat side of the mesh."""

    ctx: LiftContext
    h: float
    pairs: list[tuple[int, int]]  # ordered pairs of distinct side faces
    pair_band: dict[tuple[int, int], int]  # (f, f') -> l
    W: dict[int, list[tuple[int, int]]]  # l -> pairs
    V: dict[int, list[int]]  # side face -> cells at its vertical
    layers: dict[int, list[int]]  # m -> cells
    layer_of: np.ndarray  # cell -> m
    I: dict[tuple[int, int], list[int]] = field(default_factory=dict)
    C: dict[tuple[int, int], dict[int, list[int]]] = field(default_factory=dict)

    @property
    def mesh(self) -> PolytopalMesh:
        return self.ctx.mesh

    def side_index(self, f: int) -> int:
        """Position of global face f within the side-face list."""
        return int(np.searchsorted(self.ctx.side_faces, f))

    def a_masks(self, g: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(A_g, A_t & A_t', Delta_g) as masks over the side faces."""
        t, tp = self.mesh.face_owner[g]
        at, atp = self.ctx.in_at[t], self.ctx.in_at[tp]
        return at | atp, at & atp, at ^ atp

    def d_rho(self, g: int) -> np.ndarray:
        """|rho_t'(f) - rho_t(f)| over the side faces, for interior face g."""
        t, tp = self.mesh.face_owner[g]
        return np.abs(self.ctx.rho[tp] - self.ctx.rho[t])


def build_catalog(mesh: PolytopalMesh, side: FlatSide | str) -> SetCatalog:
    ctx = build_lift_context(mesh, side)
    h = mesh_stats(mesh).h
    eps = 1e-9 * h
    normal = ctx.inward_normal

    side_faces = [int(k) for k in ctx.side_faces]
    centroids = {f: mesh.faces[f].centroid for f in side_faces}

    pairs, pair_band, W = [], {}, {}
    for f in side_faces:
        for fp in side_faces:
            if fp == f:
                continue
            dist = float(np.linalg.norm(centroids[f] - centroids[fp]))
            l = int(math.floor(dist / h)) + 1
            pairs.append((f, fp))
            pair_band[(f, fp)] = l
            W.setdefault(l, []).append((f, fp))

    span = mesh.extent * (mesh.dim + 1)  # long enough to leave the domain
    V = {
        f: [t for t in range(mesh.n_cells)
            if segment_intersects_cell(mesh, t, centroids[f], centroids[f] + span * normal, eps)]
        for f in side_faces
    }

    layer_of = np.floor(ctx.delta_cells / h).astype(int)
    layers: dict[int, list[int]] = {}
    for t in range(mesh.n_cells):
        layers.setdefault(int(layer_of[t]), []).append(t)

    cat = SetCatalog(ctx=ctx, h=h, pairs=pairs, pair_band=pair_band, W=W,
                     V=V, layers=layers, layer_of=layer_of)

    # candidate cells for the horizontal segments, grouped by layer
    for (f, fp) in pairs:
        D = float(np.linalg.norm(centroids[f] - centroids[fp]))
        a = centroids[f] + D * normal
        b = centroids[fp] + D * normal
        l = pair_band[(f, fp)]
        cands = [t for m in range(max(l - 2, 0), l + 1) for t in layers.get(m, [])]
        cells = [t for t in cands if segment_intersects_cell(mesh, t, a, b, eps)]
        cat.I[(f, fp)] = cells
        groups: dict[int, list[int]] = {}
        for t in cells:
            p_t = ctx.project(mesh.cells[t].centroid)
            s = int(math.floor(float(np.linalg.norm(p_t - centroids[f])) / h)) + 1
            groups.setdefault(s, []).append(t)
        cat.C[(f, fp)] = groups
    return cat


# ---------------------------------------------------------------------------
# cardinality estimates (empirical constants)

def check_cardinalities(cat: SetCatalog) -> dict:
    mesh = cat.mesh
    d = mesh.dim
    c1 = 0
    for f, cells in cat.V.items():
        counts: dict[int, int] = {}
        for t in cells:
            counts[int(cat.layer_of[t])] = counts.get(int(cat.layer_of[t]), 0) + 1
        if counts:
            c1 = max(c1, max(counts.values()))

    c2 = 0.0
    for l, pl in cat.W.items():
        per_f: dict[int, int] = {}
        for (f, _) in pl:
            per_f[f] = per_f.get(f, 0) + 1
        c2 = max(c2, max(per_f.values()) / l ** (d - 2))

    vert_count = np.zeros(mesh.n_cells, dtype=int)
    for cells in cat.V.values():
        for t in cells:
            vert_count[t] += 1
    c3 = int(vert_count.max())

    c4 = max((len(cells) for groups in cat.C.values() for cells in groups.values()),
             default=0)

    per_tls: dict[tuple[int, int, int], int] = {}
    for (f, fp), groups in cat.C.items():
        l = cat.pair_band[(f, fp)]
        for s, cells in groups.items():
            for t in cells:
                key = (t, l, s)
                per_tls[key] = per_tls.get(key, 0) + 1
    c5 = max((cnt / l ** (d - 2) for (t, l, s), cnt in per_tls.items()), default=0.0)

    return {
        "lemma": "cardinality",
        "constants": {
            "layer_vertical": float(c1),
            "band_slice_per_l": float(c2),
            "faces_per_cell_vertical": float(c3),
            "horizontal_group": float(c4),
            "pairs_per_cell_group": float(c5),
        },
    }


# ---------------------------------------------------------------------------
# discrete Hardy inequality

HARDY_BOUND = 18.0


def hardy_ratio(r: np.ndarray) -> float:
    """(sum of squared running averages R_l) / (sum of r_l^2), R_l = (1/l) sum_{m<=l} r_m."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("sequence entries must be positive")
    csum = np.cumsum(r)
    L = len(r) - 1
    if L < 1:
        return 0.0
    l = np.arange(1, L + 1)
    R = csum[1:] / l
    return float((R @ R) / (r @ r))


def check_hardy(sequences) -> dict:
    worst = 0.0
    count = 0
    for r in sequences:
        worst = max(worst, hardy_ratio(np.asarray(r, dtype=float)))
        count += 1
    return {
        "lemma": "discrete_hardy",
        "constants": {"max_ratio": worst},
        "bound": HARDY_BOUND,
        "passed": worst <= HARDY_BOUND,
        "probes": count,
    }


def random_hardy_sequences(trials: int, max_len: int, seed: int):
    """Positive sequences with lengths in [2, max_len] and mixed magnitudes."""
    rng = make_rng(seed, 3)
    for _ in range(trials):
        length = int(rng.integers(2, max_len + 1))
        scale = 10.0 ** rng.uniform(-3, 3)
        yield scale * rng.uniform(1e-9, 1.0, size=length)


# ---------------------------------------------------------------------------
# lifting lemmas

def check_lifting_lemmas(cat: SetCatalog) -> dict:
    mesh = cat.mesh
    ctx = cat.ctx
    d = mesh.dim
    h = cat.h
    side_faces = [int(k) for k in ctx.side_faces]
    measures = np.array([mesh.faces[f].measure for f in side_faces])
    centroids = np.array([mesh.faces[f].centroid for f in side_faces])

    # prerequisite identities
    if not np.allclose(ctx.rho.sum(axis=1), 1.0, atol=1e-13):
        raise AssertionError("weight rows do not sum to 1")
    area_at = ctx.in_at @ measures

    delta_t = ctx.delta_cells
    c_h_over_delta = float((h / delta_t).max())
    c_at_measure = float((area_at / delta_t ** (d - 1)).max())

    c_delta_g = 0.0
    c_drho_core = 0.0
    c_drho_sum = 0.0
    c_cases_dist = 0.0
    support_ok = True
    for g in mesh.interior_faces:
        g = int(g)
        dg = ctx.delta_int_faces[g]
        union, inter, sym = cat.a_masks(g)
        drho = cat.d_rho(g)
        if np.any(drho[~union] != 0.0):
            support_ok = False
        c_delta_g = max(c_delta_g, float(sym @ measures) / (h * dg ** (d - 2)))
        if inter.any():
            c_drho_core = max(c_drho_core, float(drho[inter].max()) * dg ** d / h ** d)
        c_drho_sum = max(c_drho_sum, (dg / h) * float(drho.sum()))
        if union.any():
            xf_sel = mesh.faces[ctx.face_of_int[g]].centroid
            dist = np.linalg.norm(centroids[union] - xf_sel, axis=1)
            c_cases_dist = max(c_cases_dist, float(dist.max()) / dg)

    # Q_ff' = sum_{g above f'} (h^{d-1}/delta_g) D_g rho(f), scaled by the
    # long-range kernel weight of the pair
    c_q = 0.0
    q_rows: dict[int, np.ndarray] = {}
    for fp in side_faces:
        acc = np.zeros(len(side_faces))
        for g in ctx.faces_above[fp]:
            acc += (h ** (d - 1) / ctx.delta_int_faces[g]) * cat.d_rho(g)
        q_rows[fp] = acc
    for (f, fp) in cat.pairs:
        jf = cat.side_index(f)
        dist = float(np.linalg.norm(mesh.faces[f].centroid - mesh.faces[fp].centroid))
        kernel = measures[jf] * mesh.faces[fp].measure / dist ** d
        c_q = max(c_q, q_rows[fp][jf] / kernel)

    # multiplicity of {g : F(g) = f', f in Delta_g}
    c_sym_mult = 0
    for fp in side_faces:
        counts = np.zeros(len(side_faces), dtype=int)
        for g in ctx.faces_above[fp]:
            counts += cat.a_masks(g)[2]
        if len(counts):
            c_sym_mult = max(c_sym_mult, int(counts.max()))

    return {
        "lemma": "lifting",
        "identities": {
            "weights_sum_to_one": True,
            "d_rho_vanishes_outside_a_g": support_ok,
        },
        "constants": {
            "h_over_delta_t": c_h_over_delta,
            "at_measure_over_delta_pow": c_at_measure,
            "delta_g_measure": c_delta_g,
            "d_rho_core": c_drho_core,
            "d_rho_sum": c_drho_sum,
            "q_pair": c_q,
            "cases_distance": c_cases_dist,
            "sym_diff_multiplicity": float(c_sym_mult),
        },
    }


# ---------------------------------------------------------------------------
# local approximation, Poincare-Wirtinger, trace inequality

def _local_h1(space: HybridSpace, t: int, v_cell: np.ndarray,
              v_faces: dict[int, np.ndarray]) -> float:
    mesh = space.mesh
    h_t = mesh.cells[t].diameter
    _, wts = space.cell_quad(t)
    g = np.einsum("qbd,b->qd", space.cell_tab(t)[1], v_cell)
    total = float(wts @ (g * g).sum(axis=1))
    for k in mesh.cell_faces[t]:
        _, fwts = space.face_quad(k)
        vt = space.cell_on_face(t, k) @ v_cell
        vf = space.face_tab(k) @ v_faces[k]
        total += float(fwts @ (vf - vt) ** 2) / h_t
    return total


def check_local_approx(space: HybridSpace, probes: int, seed: int) -> dict:
    """Empirical constants of the cell/face lowest-order comparison bounds."""
    mesh = space.mesh
    rng = make_rng(seed, 2)
    d = mesh.dim
    worst_l2 = 0.0
    worst_pt = 0.0
    used = 0
    for _ in range(probes):
        t = int(rng.integers(mesh.n_cells))
        v_cell = rng.standard_normal(space.dofmap.cell_block)
        v_faces = {k: rng.standard_normal(space.dofmap.face_block)
                   for k in mesh.cell_faces[t]}
        semi2 = _local_h1(space, t, v_cell, v_faces)
        if semi2 <= 1e-28:
            continue
        used += 1
        h_t = mesh.cells[t].diameter
        _, wts = space.cell_quad(t)
        p0_t = float(wts @ (space.cell_tab(t)[0] @ v_cell)) / mesh.cells[t].measure
        semi = np.sqrt(semi2)
        for k in mesh.cell_faces[t]:
            p0_f = space.face_average(k, v_faces[k])
            diff = abs(p0_f - p0_t)
            mf = mesh.faces[k].measure
            worst_l2 = max(worst_l2, np.sqrt(mf) * diff / (np.sqrt(h_t) * semi))
            worst_pt = max(worst_pt, diff / (h_t ** ((2 - d) / 2) * semi))
    return {
        "lemma": "local_approximation",
        "constants": {"l2_ratio": worst_l2, "pointwise_ratio": worst_pt},
        "probes": used,
    }


def boundary_diameter(mesh: PolytopalMesh) -> float:
    return mesh.extent * np.sqrt(mesh.dim)


def check_pw(space: HybridSpace, bundle: OperatorBundle, p0_faces,
             probes: int, seed: int) -> dict:
    """L2(boundary) control by the H^{1/2} seminorm for P0-mean-free traces."""
    mesh = space.mesh
    p0_faces = [int(k) for k in p0_faces]
    p0_measure = sum(mesh.faces[k].measure for k in p0_faces)
    if p0_measure <= 0:
        raise ValueError("P0 has zero measure")
    prefactor = np.sqrt(1.0 + boundary_diameter(mesh) ** mesh.dim / p0_measure)
    rng = make_rng(seed, 4)
    worst = 0.0
    used = 0
    for _ in range(probes):
        w = BoundaryTrace(space.dofmap, rng.standard_normal(space.dofmap.n_bd_dofs))
        mean = sum(float(space.face_moment(k) @ w.block(k)) for k in p0_faces) / p0_measure
        for k in space.dofmap.boundary_faces:
            w.block(int(k))[0] -= mean
        hh = float(np.sqrt(max(w.data @ (bundle.H @ w.data), 0.0)))
        if hh <= 1e-14:
            continue
        used += 1
        worst = max(worst, boundary_l2(space, w) / (prefactor * hh))
    return {
        "lemma": "poincare_wirtinger",
        "constants": {"ratio": worst},
        "p0_measure": p0_measure,
        "probes": used,
    }


def check_trace_inequality(bundle: OperatorBundle, probes: int, seed: int,
                           include_harmonic: bool = True,
                           decompose: bool = False) -> dict:
    """Empirical constant of the trace inequality over random hybrid vectors."""
    space = bundle.space
    dm = space.dofmap
    rng = make_rng(seed, 5)
    solver = InteriorSolver(bundle.A, dm) if include_harmonic else None
    worst = 0.0
    worst_w = None
    used = 0
    for i in range(probes):
        if include_harmonic and i % 2 == 1:
            wb = rng.standard_normal(dm.n_bd_dofs)
            data = solver.extend(wb)
        else:
            data = rng.standard_normal(dm.n_total)
        v = HybridVector(dm, data)
        h1 = float(np.sqrt(max(v.data @ (bundle.A @ v.data), 0.0)))
        if h1 <= 1e-14:
            continue
        used += 1
        wdata = v.boundary_part()
        hh = float(np.sqrt(max(wdata @ (bundle.H @ wdata), 0.0)))
        ratio = hh / h1
        if ratio > worst:
            worst = ratio
            worst_w = wdata.copy()
    out = {
        "lemma": "trace_inequality",
        "constants": {"ratio": worst},
        "probes": used,
    }
    if decompose and worst_w is not None:
        local, longrange = hhalf_parts_direct(space, BoundaryTrace(dm, worst_w))
        out["worst_probe_parts"] = {"local": local, "long_range": longrange}
    return out


def check_lifting_constant(bundle: OperatorBundle, probes: int, seed: int) -> dict:
    """Empirical constant of the glued-lift bound over random traces."""
    space = bundle.space
    rng = make_rng(seed, 6)
    worst = 0.0
    used = 0
    for _ in range(probes):
        w = BoundaryTrace(space.dofmap, rng.standard_normal(space.dofmap.n_bd_dofs))
        hh = float(np.sqrt(max(w.data @ (bundle.H @ w.data), 0.0)))
        if hh <= 1e-14:
            continue
        v = glued_lift(space, w)
        h1 = float(np.sqrt(max(v.data @ (bundle.A @ v.data), 0.0)))
        used += 1
        worst = max(worst, h1 / hh)
    return {
        "lemma": "lifting_constant",
        "constants": {"ratio": worst},
        "probes": used,
    }
