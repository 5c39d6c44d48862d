"""Batch driver: every experiment as a subcommand with reproducible outputs.

Each run writes machine-readable artifacts into the output directory:
a ``<subcommand>__<config>.run.json`` report plus any CSV/coordinate files
the subcommand produces.  All randomness is drawn from Philox streams keyed
by ``--seed``, so outputs are bit-identical across repeated runs (the evp
CSV's wall-time column is the one exception; ``--zero-time`` pins it).
``report`` merges the per-run JSON files into one summary keyed by
(subcommand, config).  Exit status is 0 iff every asserted invariant of the
run passed.  ``TRACELAB_THREADS`` caps the sweep worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from tracelab.hybrid import BoundaryTrace, DegreeConfig, HybridSpace, trace
from tracelab.lemma_lab import (
    HARDY_BOUND,
    build_catalog,
    check_cardinalities,
    check_hardy,
    check_lifting_constant,
    check_lifting_lemmas,
    check_local_approx,
    check_pw,
    check_trace_inequality,
    random_hardy_sequences,
)
from tracelab.lifting import build_lift_context, dump_weights, glued_lift
from tracelab.mesh import build_cartesian, build_perturbed_quads, mesh_stats, validate
from tracelab.rng import STREAM_PROBES, make_rng
from tracelab.seminorms import (
    assemble_bundle,
    eval_seminorms,
    export_coo,
    export_dense_csv,
)
from tracelab.spectral import refinement_sweep

RUN_SUFFIX = ".run.json"


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x != ""]


def _build_mesh(args, n: int):
    if args.family == "cartesian":
        return build_cartesian(args.dim, n)
    if args.dim != 2:
        raise SystemExit("perturbed meshes are 2D only")
    return build_perturbed_quads(n, args.amplitude, args.seed)


def _cfg_key(args, fields) -> str:
    parts = []
    for f in fields:
        val = getattr(args, f)
        if isinstance(val, list):
            val = ",".join(str(x) for x in val)
        parts.append(f"{f}={val}")
    return "-".join(parts)


def _write_run(outdir: str, subcommand: str, key: str, config: dict,
               results: dict, passed: bool) -> str:
    os.makedirs(outdir, exist_ok=True)
    doc = {
        "subcommand": subcommand,
        "config_key": key,
        "config": config,
        "results": results,
        "passed": passed,
    }
    path = os.path.join(outdir, f"{subcommand}__{key}{RUN_SUFFIX}")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _summary_line(subcommand: str, passed: bool, detail: str) -> None:
    print(f"[{subcommand}] {'ok' if passed else 'FAIL'}: {detail}")


# ---------------------------------------------------------------------------
# subcommands

def cmd_mesh(args) -> int:
    mesh = _build_mesh(args, args.n)
    diagnostics = validate(mesh) if args.validate else []
    stats = mesh_stats(mesh)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, f"mesh-dim{args.dim}-n{args.n}.json"), "w") as fh:
        fh.write(mesh.to_json())
    key = _cfg_key(args, ["dim", "n", "family", "amplitude", "seed"])
    results = {
        "n_cells": mesh.n_cells,
        "n_faces": mesh.n_faces,
        "n_boundary": len(mesh.boundary_faces),
        "h": stats.h, "rho_qu": stats.rho_qu, "varpi": stats.varpi,
        "diagnostics": diagnostics,
    }
    passed = diagnostics == []
    _write_run(args.out, "mesh", key, vars_config(args), results, passed)
    print(json.dumps(diagnostics))
    _summary_line("mesh", passed, f"{mesh.n_cells} cells, h={stats.h:.6g}")
    return 0 if passed else 1


def cmd_assemble(args) -> int:
    mesh = _build_mesh(args, args.n)
    degrees = DegreeConfig(args.k_cell, args.k_face)
    space = HybridSpace(mesh, degrees)
    bundle = assemble_bundle(space)
    os.makedirs(args.out, exist_ok=True)
    stem = f"dim{args.dim}-n{args.n}-k{args.k_cell}{args.k_face}"
    export_coo(bundle.A, os.path.join(args.out, f"A-{stem}.coo.txt"))
    export_dense_csv(bundle.H, os.path.join(args.out, f"H-{stem}.csv"))
    export_dense_csv(bundle.S[None, :], os.path.join(args.out, f"S-{stem}.csv"))
    sym_a = float(abs(bundle.A - bundle.A.T).max() / max(abs(bundle.A).max(), 1e-300))
    sym_h = float(np.abs(bundle.H - bundle.H.T).max() / max(np.abs(bundle.H).max(), 1e-300))
    passed = sym_a <= 1e-13 and sym_h <= 1e-13
    key = _cfg_key(args, ["dim", "n", "k_cell", "k_face", "family", "amplitude", "seed"])
    _write_run(args.out, "assemble", key, vars_config(args), {
        "ndof_total": space.dofmap.n_total,
        "ndof_bd": space.dofmap.n_bd_dofs,
        "symmetry_residual_A": sym_a,
        "symmetry_residual_H": sym_h,
    }, passed)
    _summary_line("assemble", passed,
                  f"N={space.dofmap.n_total}, Nbd={space.dofmap.n_bd_dofs}")
    return 0 if passed else 1


def cmd_evp_sweep(args) -> int:
    report = refinement_sweep(args.dim, args.n, args.k, family=args.family,
                              amplitude=args.amplitude, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    key = _cfg_key(args, ["dim", "n", "k", "family", "amplitude", "seed"])
    csv_path = os.path.join(args.out, f"evp-sweep__{key}.csv")
    report.to_csv(csv_path, zero_time=args.zero_time)
    passed = not report.errors and all(r.lambda_min > 0 for r in report.records)
    _write_run(args.out, "evp-sweep", key, vars_config(args), {
        "csv": os.path.basename(csv_path),
        "records": [
            {"n": r.n, "k_cell": r.k_cell, "k_face": r.k_face,
             "ndof_total": r.ndof_total, "ndof_bd": r.ndof_bd,
             "lambda_min": r.lambda_min, "lambda_max": r.lambda_max}
            for r in report.records
        ],
        "successive_ratios": report.successive_ratios(),
        "errors": report.errors,
    }, passed)
    _summary_line("evp-sweep", passed,
                  f"{len(report.records)} records, {len(report.errors)} errors -> {csv_path}")
    return 0 if passed else 1


def cmd_lift_check(args) -> int:
    rows = []
    identity_ok = True
    maxima = []
    for n in args.n:
        mesh = _build_mesh(args, n)
        space = HybridSpace(mesh, DegreeConfig.uniform(args.k))
        bundle = assemble_bundle(space)
        rng = make_rng(args.seed, STREAM_PROBES)
        worst_identity = 0.0
        worst_ratio = 0.0
        for _ in range(args.probes):
            w = BoundaryTrace(space.dofmap, rng.standard_normal(space.dofmap.n_bd_dofs))
            v = glued_lift(space, w)
            worst_identity = max(worst_identity,
                                 float(np.abs(trace(space, v).data - w.data).max()))
            h1, hh = eval_seminorms(bundle, v=v, w=w)
            worst_ratio = max(worst_ratio, h1 / hh)
        identity_ok = identity_ok and worst_identity <= 1e-13
        maxima.append(worst_ratio)
        rows.append({"n": n, "trace_identity_error": worst_identity,
                     "lifting_ratio": worst_ratio})
        if args.dump_weights:
            ctx = build_lift_context(mesh, "bottom")
            dump_weights(ctx, os.path.join(args.out, f"weights-n{n}.csv"))
    stable = all(b <= 1.25 * a for a, b in zip(maxima, maxima[1:]))
    passed = identity_ok and stable
    key = _cfg_key(args, ["dim", "n", "k", "family", "amplitude", "seed", "probes"])
    _write_run(args.out, "lift-check", key, vars_config(args),
               {"rows": rows, "stable": stable}, passed)
    _summary_line("lift-check", passed,
                  f"identity<=1e-13: {identity_ok}, ratio stability: {stable}")
    return 0 if passed else 1


def cmd_trace_check(args) -> int:
    rows = []
    maxima = []
    for n in args.n:
        mesh = _build_mesh(args, n)
        space = HybridSpace(mesh, DegreeConfig.uniform(args.k))
        bundle = assemble_bundle(space)
        rep = check_trace_inequality(bundle, probes=args.probes,
                                     seed=args.seed, decompose=True)
        maxima.append(rep["constants"]["ratio"])
        rows.append({"n": n, **rep["constants"],
                     "worst_probe_parts": rep.get("worst_probe_parts")})
    stable = all(b <= 1.25 * a for a, b in zip(maxima, maxima[1:]))
    key = _cfg_key(args, ["dim", "n", "k", "family", "amplitude", "seed", "probes"])
    _write_run(args.out, "trace-check", key, vars_config(args),
               {"rows": rows, "stable": stable}, stable)
    _summary_line("trace-check", stable, f"constants {['%.4f' % m for m in maxima]}")
    return 0 if stable else 1


def cmd_lemma_check(args) -> int:
    runs = []
    invariants_ok = True
    for n in args.n:
        mesh = _build_mesh(args, n)
        stats = mesh_stats(mesh)
        cat = build_catalog(mesh, args.side)
        partitions = _partitions_exact(cat)
        invariants_ok = invariants_ok and partitions
        card = check_cardinalities(cat)
        lemmas = check_lifting_lemmas(cat)
        invariants_ok = invariants_ok and all(lemmas["identities"].values())
        space = HybridSpace(mesh, DegreeConfig.uniform(args.k))
        bundle = assemble_bundle(space)
        local = check_local_approx(space, probes=args.probes, seed=args.seed)
        pw = check_pw(space, bundle, space.dofmap.boundary_faces,
                      probes=max(args.probes // 10, 5), seed=args.seed)
        lift = check_lifting_constant(bundle, probes=max(args.probes // 10, 5),
                                      seed=args.seed)
        trace_rep = check_trace_inequality(bundle, probes=max(args.probes // 10, 5),
                                           seed=args.seed)
        runs.append({
            "mesh": {"dim": args.dim, "n": n, "family": args.family,
                     "h": stats.h, "rho_qu": stats.rho_qu, "varpi": stats.varpi},
            "partitions_exact": partitions,
            "checks": [card, lemmas, local, pw, lift, trace_rep],
        })
    key = _cfg_key(args, ["dim", "n", "k", "side", "family", "amplitude", "seed", "probes"])
    _write_run(args.out, "lemma-check", key, vars_config(args),
               {"runs": runs}, invariants_ok)
    _summary_line("lemma-check", invariants_ok,
                  f"{len(runs)} meshes, partitions+identities: {invariants_ok}")
    return 0 if invariants_ok else 1


def _partitions_exact(cat) -> bool:
    mesh = cat.mesh
    cells = sorted(t for v in cat.layers.values() for t in v)
    if cells != list(range(mesh.n_cells)):
        return False
    if sum(len(v) for v in cat.W.values()) != len(cat.pairs):
        return False
    for p in cat.pairs:
        l = cat.pair_band[p]
        grouped = sorted(t for cs in cat.C[p].values() for t in cs)
        if grouped != sorted(cat.I[p]):
            return False
        if any(not (1 <= s <= l + 1) for s in cat.C[p]):
            return False
        if any(not (max(l - 2, 0) <= cat.layer_of[t] <= l) for t in cat.I[p]):
            return False
    mapped = sorted(g for gs in cat.ctx.faces_above.values() for g in gs)
    if mapped != sorted(int(g) for g in mesh.interior_faces):
        return False
    return True


def cmd_hardy(args) -> int:
    report = check_hardy(random_hardy_sequences(args.trials, args.max_len, args.seed))
    key = _cfg_key(args, ["trials", "max_len", "seed"])
    _write_run(args.out, "hardy", key, vars_config(args), report, report["passed"])
    _summary_line("hardy", report["passed"],
                  f"max ratio {report['constants']['max_ratio']:.6f} <= {HARDY_BOUND}")
    return 0 if report["passed"] else 1


def cmd_report(args) -> int:
    entries: dict[str, dict] = {}
    sources: dict[str, str] = {}
    if not os.path.isdir(args.out):
        raise SystemExit(f"not a directory: {args.out}")
    for name in sorted(os.listdir(args.out)):
        if not name.endswith(RUN_SUFFIX):
            continue
        path = os.path.join(args.out, name)
        try:
            with open(path) as fh:
                doc = json.load(fh)
            key = f"{doc['subcommand']}::{doc['config_key']}"
        except (json.JSONDecodeError, KeyError) as exc:
            print(f"[report] FAIL: malformed artifact file {path}: {exc}")
            return 1
        if key in entries:
            if entries[key] != doc:
                print(f"[report] FAIL: conflicting duplicate key {key!r} "
                      f"in {sources[key]} and {name}")
                return 1
            continue
        entries[key] = doc
        sources[key] = name
    summary = {"format": "tracelab-report/1", "entries": entries}
    out_path = os.path.join(args.out, "summary.json")
    with open(out_path, "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(json.dumps({"entries": len(entries), "summary": out_path}))
    return 0


def vars_config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    return cfg


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p, dim_default=2):
    p.add_argument("--dim", type=int, default=dim_default, choices=(2, 3),
                   help="spatial dimension (default %(default)s)")
    p.add_argument("--family", choices=("cartesian", "perturbed"),
                   default="cartesian", help="mesh family (default %(default)s)")
    p.add_argument("--amplitude", type=float, default=0.2,
                   help="perturbation amplitude as a fraction of 1/n (default %(default)s)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for every random stream (default %(default)s)")
    p.add_argument("--out", default="tracelab-out",
                   help="output directory (default %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracelab",
        description="Discrete trace/lifting experiments on polytopal hybrid meshes",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("mesh", help="build and validate a mesh")
    _add_common(p)
    p.add_argument("--n", type=int, default=4, help="cells per side (default %(default)s)")
    p.add_argument("--validate", action="store_true", help="run invariant diagnostics")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("assemble", help="assemble and export the Gram matrices")
    _add_common(p)
    p.add_argument("--n", type=int, default=4, help="cells per side (default %(default)s)")
    p.add_argument("--k-cell", type=int, default=1, help="cell degree (default %(default)s)")
    p.add_argument("--k-face", type=int, default=1, help="face degree (default %(default)s)")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("evp-sweep", help="eigenvalue refinement sweep")
    _add_common(p)
    p.add_argument("--n", type=_int_list, default=[4, 8, 16, 32],
                   help="comma list of cells-per-side (default %(default)s)")
    p.add_argument("--k", type=_int_list, default=[0, 1, 2, 3],
                   help="comma list of polynomial degrees (default %(default)s)")
    p.add_argument("--zero-time", action="store_true",
                   help="write 0.0 in the seconds column for bit-stable output")
    p.set_defaults(func=cmd_evp_sweep)

    p = sub.add_parser("lift-check", help="glued-lift identity and stability")
    _add_common(p)
    p.add_argument("--n", type=_int_list, default=[4, 8, 16])
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--probes", type=int, default=50)
    p.add_argument("--dump-weights", action="store_true",
                   help="emit (cell, face, rho) CSV per mesh")
    p.set_defaults(func=cmd_lift_check)

    p = sub.add_parser("trace-check", help="trace-inequality empirical constant")
    _add_common(p)
    p.add_argument("--n", type=_int_list, default=[4, 8, 16])
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--probes", type=int, default=50)
    p.set_defaults(func=cmd_trace_check)

    p = sub.add_parser("lemma-check", help="set-catalog and lemma constants")
    _add_common(p)
    p.add_argument("--n", type=_int_list, default=[4, 8])
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--side", default="bottom")
    p.add_argument("--probes", type=int, default=200)
    p.set_defaults(func=cmd_lemma_check)

    p = sub.add_parser("hardy", help="discrete Hardy inequality trials")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--max-len", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="tracelab-out")
    p.set_defaults(func=cmd_hardy)

    p = sub.add_parser("report", help="merge run artifacts into one summary")
    p.add_argument("--out", default="tracelab-out", help="directory of run artifacts")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
