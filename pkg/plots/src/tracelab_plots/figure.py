"""Two-panel eigenvalue figure from a tracelab evp-sweep CSV.

Reads the fixed sweep schema and renders the maximum and minimum pencil
eigenvalues against the hybrid-space DoF count (log x-axis), one curve per
polynomial order.  Rendering is a pure function of the CSV bytes: fixed
styling, pinned hash salt, no timestamps, so identical input gives identical
output files modulo the image-encoder version.
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SCHEMA = ["dim", "n", "k_cell", "k_face", "ndof_total", "ndof_bd",
          "lambda_min", "lambda_max", "cond", "seconds"]
INT_COLUMNS = {"dim", "n", "k_cell", "k_face", "ndof_total", "ndof_bd"}

_STYLE = {
    "figure.figsize": (5.2, 3.9),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "svg.hashsalt": "tracelab-plots",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.35,
}
_MARKERS = ["o", "s", "D", "^", "v", "p", "*", "x"]


class SchemaError(ValueError):
    """The CSV header or a row does not match the sweep schema."""


@dataclass
class SweepTable:
    """Parsed sweep rows, grouped by polynomial order."""

    rows: list[dict]

    @staticmethod
    def read(csv_path: str) -> "SweepTable":
        with open(csv_path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{csv_path}: empty file, expected header "
                                  + ",".join(SCHEMA)) from None
            if header != SCHEMA:
                missing = [c for c in SCHEMA if c not in header]
                extra = [c for c in header if c not in SCHEMA]
                raise SchemaError(
                    f"{csv_path}: header mismatch "
                    f"(missing columns: {missing or 'none'}, unexpected: {extra or 'none'}, "
                    f"order must be {','.join(SCHEMA)})"
                )
            rows = []
            for lineno, rec in enumerate(reader, start=2):
                if len(rec) != len(SCHEMA):
                    raise SchemaError(f"{csv_path}:{lineno}: expected "
                                      f"{len(SCHEMA)} fields, got {len(rec)}")
                row = {}
                for name, value in zip(SCHEMA, rec):
                    try:
                        row[name] = int(value) if name in INT_COLUMNS else float(value)
                    except ValueError:
                        raise SchemaError(
                            f"{csv_path}:{lineno}: column {name!r} has "
                            f"non-numeric value {value!r}"
                        ) from None
                rows.append(row)
        return SweepTable(rows)

    def orders(self) -> list[tuple[int, int]]:
        return sorted({(r["k_cell"], r["k_face"]) for r in self.rows})

    def series(self, order: tuple[int, int], x_col: str, y_col: str):
        rows = sorted((r for r in self.rows
                       if (r["k_cell"], r["k_face"]) == order),
                      key=lambda r: r[x_col])
        return [r[x_col] for r in rows], [r[y_col] for r in rows]


def _order_label(order: tuple[int, int]) -> str:
    k_cell, k_face = order
    return f"k = {k_cell}" if k_cell == k_face else f"k = ({k_cell},{k_face})"


def build_panels(table: SweepTable, x_col: str = "ndof_total"):
    """(max-panel figure, min-panel figure) for the parsed sweep."""
    x_label = ("hybrid-space DoFs" if x_col == "ndof_total"
               else "boundary DoFs")
    figures = []
    with plt.rc_context(_STYLE):
        for y_col, title in (("lambda_max", "maximum eigenvalue"),
                             ("lambda_min", "minimum eigenvalue")):
            fig, ax = plt.subplots()
            for i, order in enumerate(table.orders()):
                xs, ys = table.series(order, x_col, y_col)
                ax.plot(xs, ys, marker=_MARKERS[i % len(_MARKERS)],
                        label=_order_label(order))
            ax.set_xscale("log")
            ax.set_xlabel(x_label)
            ax.set_ylabel(title)
            ax.legend()
            fig.tight_layout()
            figures.append(fig)
    return figures[0], figures[1]


def render(csv_path: str, out_stem: str, x_col: str = "ndof_total") -> list[str]:
    """Write <stem>-max and <stem>-min as PNG and SVG; returns the paths."""
    if x_col not in ("ndof_total", "ndof_bd"):
        raise ValueError("x_col must be 'ndof_total' or 'ndof_bd'")
    table = SweepTable.read(csv_path)
    fig_max, fig_min = build_panels(table, x_col)
    out = []
    with plt.rc_context(_STYLE):  # hash salt must be active when saving SVG
        for fig, panel in ((fig_max, "max"), (fig_min, "min")):
            for ext in ("png", "svg"):
                path = f"{out_stem}-{panel}.{ext}"
                fig.savefig(path, metadata=_clean_metadata(ext))
                out.append(path)
            plt.close(fig)
    return out


def _clean_metadata(ext: str) -> dict:
    # strip encoder-written timestamps/tool tags so bytes are reproducible
    if ext == "png":
        return {"Software": None}
    return {"Date": None, "Creator": None}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tracelab-plots",
        description="Render eigenvalue-versus-DoFs panels from an evp-sweep CSV",
    )
    parser.add_argument("csv", help="evp-sweep CSV file")
    parser.add_argument("out", help="output stem; writes <stem>-{max,min}.{png,svg}")
    parser.add_argument("--x-axis", choices=("total", "bd"), default="total",
                        help="DoF count on the x-axis (default %(default)s)")
    args = parser.parse_args(argv)
    x_col = "ndof_total" if args.x_axis == "total" else "ndof_bd"
    try:
        paths = render(args.csv, args.out, x_col)
    except (SchemaError, OSError) as exc:
        print(f"tracelab-plots: {exc}")
        return 1
    print("\n".join(paths))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
