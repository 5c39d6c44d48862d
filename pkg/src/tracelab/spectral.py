"""Boundary Schur complement and the trace/lifting eigenvalue verification.

The H^1 Gram matrix is condensed onto the boundary DoFs,

    A_SC = A_bb - A_bi A_ii^{-1} A_ib,

so that w^T A_SC w is the squared H^1 seminorm of the discrete harmonic
extension of w.  The equivalence with the boundary seminorm is probed through
the pencil

    (A_SC + S^T S) W = (H + S^T S) W Lambda,

whose eigenvalues stay in a fixed positive band under refinement when the
trace inequality and the lifting bound hold.  The rank-one S^T S term removes
the shared constant kernel; it makes the constant vector an eigenvector with
eigenvalue exactly 1.  The pencil is solved as a symmetric-definite problem
(Cholesky of B = H + S^T S plus a standard symmetric eigensolve), never by
forming B^{-1} explicitly.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from tracelab.hybrid import DegreeConfig, DofMap, HybridSpace
from tracelab.mesh import build_cartesian, build_perturbed_quads
from tracelab.seminorms import assemble_h1, assemble_hhalf, assemble_s

SWEEP_CSV_HEADER = "dim,n,k_cell,k_face,ndof_total,ndof_bd,lambda_min,lambda_max,cond,seconds"


class InteriorSolver:
    """Factorization of the cell/interior-face block of A, reused across solves.

    The interior block is SPD: prescribing any boundary values removes the
    constant kernel of the H^1 form.  A small-pivot diagnostic guards against
    an unexpected singular block.
    """

    def __init__(self, A: sp.spmatrix, dofmap: DofMap):
        ni = dofmap.n_interior
        self.dofmap = dofmap
        A = sp.csc_matrix(A)
        self.A_ib = A[:ni, ni:].toarray()
        self.A_bb = A[ni:, ni:].toarray()
        self._lu = splu(A[:ni, :ni])
        du = np.abs(self._lu.U.diagonal())
        if du.size and du.min() <= 1e-12 * du.max():
            raise np.linalg.LinAlgError(
                f"interior block nearly singular: pivot ratio {du.min() / du.max():.3e}"
            )

    def extend(self, w_bd: np.ndarray) -> np.ndarray:
        """Full coefficient vector of the discrete harmonic extension of w."""
        out = np.empty(self.dofmap.n_total)
        out[: self.dofmap.n_interior] = -self._lu.solve(self.A_ib @ w_bd)
        out[self.dofmap.n_interior:] = w_bd
        return out

    def schur(self) -> np.ndarray:
        return self.A_bb - self.A_ib.T @ self._lu.solve(self.A_ib)


def schur_complement(A: sp.spmatrix, dofmap: DofMap) -> np.ndarray:
    """Dense Schur complement of A on the boundary DoFs (symmetrized)."""
    A_SC = InteriorSolver(A, dofmap).schur()
    return (A_SC + A_SC.T) / 2.0


def solve_gevp(A_SC: np.ndarray, H: np.ndarray, S: np.ndarray,
               vectors: bool = False):
    """Eigenvalues (ascending) of the kernel-fixed pencil; optionally vectors."""
    M = A_SC + np.outer(S, S)
    B = H + np.outer(S, S)
    ev_B = np.linalg.eigvalsh(B)
    if ev_B[0] <= 1e-12 * ev_B[-1]:
        raise np.linalg.LinAlgError(
            f"H + S^T S is not positive definite: eigenvalue range [{ev_B[0]:.3e}, {ev_B[-1]:.3e}]"
        )
    if vectors:
        lam, W = sla.eigh(M, B)
        return lam, W
    return sla.eigh(M, B, eigvals_only=True)


@dataclass
class SweepRecord:
    dim: int
    n: int
    k_cell: int
    k_face: int
    ndof_total: int
    ndof_bd: int
    lambda_min: float
    lambda_max: float
    seconds: float

    @property
    def cond(self) -> float:
        return self.lambda_max / self.lambda_min


@dataclass
class SpectralReport:
    records: list[SweepRecord] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def to_csv(self, path: str, zero_time: bool = False) -> None:
        with open(path, "w") as fh:
            fh.write(SWEEP_CSV_HEADER + "\n")
            for r in self.records:
                secs = 0.0 if zero_time else r.seconds
                fh.write(
                    f"{r.dim},{r.n},{r.k_cell},{r.k_face},{r.ndof_total},{r.ndof_bd},"
                    f"{r.lambda_min!r},{r.lambda_max!r},{r.cond!r},{secs!r}\n"
                )

    def successive_ratios(self) -> list[dict]:
        """lambda ratios between successive n within each (dim, k) group."""
        out = []
        groups: dict[tuple, list[SweepRecord]] = {}
        for r in self.records:
            groups.setdefault((r.dim, r.k_cell, r.k_face), []).append(r)
        for key, recs in sorted(groups.items()):
            recs = sorted(recs, key=lambda r: r.n)
            for a, b in zip(recs, recs[1:]):
                out.append({
                    "dim": key[0], "k_cell": key[1], "k_face": key[2],
                    "n_from": a.n, "n_to": b.n,
                    "ratio_min": b.lambda_min / a.lambda_min,
                    "ratio_max": b.lambda_max / a.lambda_max,
                })
        return out


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("TRACELAB_THREADS", "1")))
    except ValueError:
        return 1


def _sweep_one(dim: int, n: int, degrees: DegreeConfig, family: str,
               amplitude: float, seed: int) -> SweepRecord:
    t0 = time.perf_counter()
    if family == "cartesian":
        mesh = build_cartesian(dim, n)
    elif family == "perturbed":
        if dim != 2:
            raise ValueError("perturbed meshes are 2D only")
        mesh = build_perturbed_quads(n, amplitude, seed)
    else:
        raise ValueError(f"unknown mesh family {family!r}")
    space = HybridSpace(mesh, degrees)
    A = assemble_h1(space)
    H = assemble_hhalf(space)
    S = assemble_s(space)
    lam = solve_gevp(schur_complement(A, space.dofmap), H, S)
    if lam[0] <= 0:
        raise np.linalg.LinAlgError(f"nonpositive eigenvalue {lam[0]:.3e} in pencil")
    return SweepRecord(
        dim=dim, n=n, k_cell=degrees.cell_degree, k_face=degrees.face_degree,
        ndof_total=space.dofmap.n_total, ndof_bd=space.dofmap.n_bd_dofs,
        lambda_min=float(lam[0]), lambda_max=float(lam[-1]),
        seconds=time.perf_counter() - t0,
    )


def refinement_sweep(dim: int, n_list, k_list, family: str = "cartesian",
                     amplitude: float = 0.0, seed: int = 0) -> SpectralReport:
    """One GEVP record per (n, k); failures are recorded and skipped."""
    configs = [(n, DegreeConfig.uniform(k)) for k in k_list for n in n_list]
    report = SpectralReport()
    results: dict[tuple, SweepRecord | Exception] = {}

    def run(cfg):
        n, deg = cfg
        try:
            return _sweep_one(dim, n, deg, family, amplitude, seed)
        except Exception as exc:  # noqa: BLE001 - failures become report entries
            return exc

    workers = min(max_workers(), len(configs)) or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for cfg, res in zip(configs, pool.map(run, configs)):
                results[cfg[0], cfg[1].cell_degree, cfg[1].face_degree] = res
    else:
        for cfg in configs:
            results[cfg[0], cfg[1].cell_degree, cfg[1].face_degree] = run(cfg)

    for cfg in configs:
        key = (cfg[0], cfg[1].cell_degree, cfg[1].face_degree)
        res = results[key]
        if isinstance(res, Exception):
            report.errors.append(f"n={key[0]} k=({key[1]},{key[2]}): {res}")
        else:
            report.records.append(res)
    return report
