"""Gram matrices of the discrete H^1 and H^{1/2} seminorms.

For a hybrid vector v = ((v_t), (v_f)) the squared H^1 seminorm is

    sum_t ( ||grad v_t||^2_{L2(t)} + sum_{f in F_t} h_t^{-1} ||v_f - v_t||^2_{L2(f)} ),

with h_t the *cell* diameter.  For a boundary trace w = (w_f) the squared
H^{1/2} seminorm is

    sum_f h_f^{-1} ||w_f - mean(w_f)||^2_{L2(f)}
    + sum_{(f,f') ordered, f != f'} |f| |f'| |mean(w_f) - mean(w_f')|^2 / |x_f - x_f'|^d,

where the long-range sum runs over ordered pairs of distinct boundary faces
(each unordered pair counts twice) and |x_f - x_f'| is the ambient Euclidean
centroid distance, also around corners of the boundary.

``assemble_*`` build the matrices; ``*_seminorm_direct`` evaluate the same
formulas per cell / per pair by quadrature without touching the matrices, and
serve as the independent oracle throughout the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from tracelab.hybrid import BoundaryTrace, HybridSpace, HybridVector, trace
from tracelab.mesh import MeshStats, mesh_stats


class SeminormValues(NamedTuple):
    h1: float | None
    hhalf: float | None


@dataclass
class OperatorBundle:
    space: HybridSpace
    A: sp.csr_matrix  # H^1 Gram matrix on all DoFs
    H: np.ndarray  # H^{1/2} Gram matrix on boundary DoFs
    S: np.ndarray  # row of boundary integrals of the shape functions
    stats: MeshStats

    @property
    def dofmap(self):
        return self.space.dofmap


def assemble_h1(space: HybridSpace) -> sp.csr_matrix:
    """Sparse Gram matrix of the discrete H^1 seminorm on all DoFs."""
    mesh = space.mesh
    dm = space.dofmap
    rows, cols, vals = [], [], []

    def add(rs: slice, cs: slice, block: np.ndarray):
        r = np.arange(rs.start, rs.stop)
        c = np.arange(cs.start, cs.stop)
        rr, cc = np.meshgrid(r, c, indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(block.ravel())

    for t in range(mesh.n_cells):
        ct = dm.cell_slice(t)
        h_t = mesh.cells[t].diameter
        _, wts = space.cell_quad(t)
        grads = space.cell_tab(t)[1]
        stiff = np.einsum("q,qid,qjd->ij", wts, grads, grads)
        acc_tt = stiff
        for k in mesh.cell_faces[t]:
            fs = dm.face_slice(k)
            _, fwts = space.face_quad(k)
            vt = space.cell_on_face(t, k)
            vf = space.face_tab(k)
            m_ff = vf.T @ (vf * fwts[:, None]) / h_t
            m_ft = vf.T @ (vt * fwts[:, None]) / h_t
            m_tt = vt.T @ (vt * fwts[:, None]) / h_t
            acc_tt = acc_tt + m_tt
            add(fs, fs, m_ff)
            add(fs, ct, -m_ft)
            add(ct, fs, -m_ft.T)
        add(ct, ct, acc_tt)

    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dm.n_total, dm.n_total),
    ).tocsr()
    return A


def assemble_hhalf(space: HybridSpace) -> np.ndarray:
    """Dense Gram matrix of the discrete H^{1/2} seminorm on boundary DoFs."""
    mesh = space.mesh
    dm = space.dofmap
    bd = dm.boundary_faces
    nb = dm.n_bd_dofs
    H = np.zeros((nb, nb))

    measures = np.array([mesh.faces[k].measure for k in bd])
    centroids = np.array([mesh.faces[k].centroid for k in bd])

    # local oscillation term, block diagonal
    P = np.zeros((len(bd), nb))  # face-average operator
    for i, k in enumerate(bd):
        k = int(k)
        sl = dm.bd_slice(k)
        q = space.face_moment(k)
        M = space.face_mass(k)
        h_f = mesh.faces[k].diameter
        H[sl, sl] += (M - np.outer(q, q) / measures[i]) / h_f
        P[i, sl.start:sl.stop] = q / measures[i]

    # long-range term over ordered pairs of distinct faces
    diff = centroids[:, None, :] - centroids[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    off = ~np.eye(len(bd), dtype=bool)
    if len(bd) > 1 and dist[off].min() < 1e-14:
        i, j = divmod(int(np.argmin(np.where(off, dist, np.inf))), len(bd))
        raise ValueError(
            f"boundary faces {int(bd[i])} and {int(bd[j])} have coincident centroids"
        )
    K = np.zeros_like(dist)
    K[off] = np.outer(measures, measures)[off] / dist[off] ** mesh.dim
    D = np.diag(K.sum(axis=1))
    H += 2.0 * P.T @ (D - K) @ P
    return H


def assemble_s(space: HybridSpace) -> np.ndarray:
    """Row vector of integrals over the boundary of the boundary shape functions."""
    dm = space.dofmap
    S = np.zeros(dm.n_bd_dofs)
    for k in dm.boundary_faces:
        k = int(k)
        S[dm.bd_slice(k)] = space.face_moment(k)
    return S


def assemble_bundle(space: HybridSpace) -> OperatorBundle:
    return OperatorBundle(
        space=space,
        A=assemble_h1(space),
        H=assemble_hhalf(space),
        S=assemble_s(space),
        stats=mesh_stats(space.mesh),
    )


def eval_seminorms(bundle: OperatorBundle,
                   v: HybridVector | None = None,
                   w: BoundaryTrace | None = None) -> SeminormValues:
    """Seminorm values from the assembled quadratic forms.

    With only ``v`` given, the boundary seminorm is taken of its trace.
    """
    if v is None and w is None:
        raise ValueError("provide a hybrid vector and/or a boundary trace")
    h1 = None
    if v is not None:
        if len(v.data) != bundle.dofmap.n_total:
            raise ValueError("hybrid vector does not match bundle DoFs")
        h1 = float(np.sqrt(max(v.data @ (bundle.A @ v.data), 0.0)))
        if w is None:
            w = trace(bundle.space, v)
    hhalf = None
    if w is not None:
        if len(w.data) != bundle.dofmap.n_bd_dofs:
            raise ValueError("boundary trace does not match bundle DoFs")
        hhalf = float(np.sqrt(max(w.data @ (bundle.H @ w.data), 0.0)))
    return SeminormValues(h1=h1, hhalf=hhalf)


# ---------------------------------------------------------------------------
# direct-formula evaluation (matrix-free oracle)

def h1_seminorm_direct(space: HybridSpace, v: HybridVector) -> float:
    mesh = space.mesh
    total = 0.0
    for t in range(mesh.n_cells):
        h_t = mesh.cells[t].diameter
        _, wts = space.cell_quad(t)
        g = np.einsum("qbd,b->qd", space.cell_tab(t)[1], v.cell_block(t))
        total += float(wts @ (g * g).sum(axis=1))
        for k in mesh.cell_faces[t]:
            _, fwts = space.face_quad(k)
            vt = space.cell_on_face(t, k) @ v.cell_block(t)
            vf = space.face_tab(k) @ v.face_block(k)
            total += float(fwts @ (vf - vt) ** 2) / h_t
    return float(np.sqrt(total))


def hhalf_parts_direct(space: HybridSpace, w: BoundaryTrace) -> tuple[float, float]:
    """(local, long-range) squared contributions, evaluated pair by pair."""
    mesh = space.mesh
    bd = [int(k) for k in space.dofmap.boundary_faces]
    local = 0.0
    means = {}
    for k in bd:
        _, fwts = space.face_quad(k)
        vals = space.face_tab(k) @ w.block(k)
        mean = float(fwts @ vals) / mesh.faces[k].measure
        means[k] = mean
        local += float(fwts @ (vals - mean) ** 2) / mesh.faces[k].diameter
    longrange = 0.0
    for k in bd:
        for kp in bd:
            if kp == k:
                continue
            dist = float(np.linalg.norm(mesh.faces[k].centroid - mesh.faces[kp].centroid))
            longrange += (mesh.faces[k].measure * mesh.faces[kp].measure
                          * (means[k] - means[kp]) ** 2 / dist ** mesh.dim)
    return local, longrange


def hhalf_seminorm_direct(space: HybridSpace, w: BoundaryTrace) -> float:
    local, longrange = hhalf_parts_direct(space, w)
    return float(np.sqrt(local + longrange))


def boundary_l2(space: HybridSpace, w: BoundaryTrace) -> float:
    """L2 norm of the trace over the whole boundary."""
    total = 0.0
    for k in space.dofmap.boundary_faces:
        k = int(k)
        _, fwts = space.face_quad(k)
        vals = space.face_tab(k) @ w.block(k)
        total += float(fwts @ vals ** 2)
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# exports

def export_coo(matrix: sp.spmatrix, path: str) -> None:
    """Coordinate text format: header line, then one `row col value` per line."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"# tracelab-coo/1 {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, x in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {float(x)!r}\n")


def export_dense_csv(matrix: np.ndarray, path: str) -> None:
    """Dense CSV: header line with the shape, then one row per line."""
    matrix = np.asarray(matrix)
    with open(path, "w") as fh:
        fh.write(f"# tracelab-dense/1 {matrix.shape[0]} {matrix.shape[1]}\n")
        for row in np.atleast_2d(matrix):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
