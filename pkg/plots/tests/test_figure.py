import os
import shutil

import pytest

from tracelab_plots.figure import SCHEMA, SchemaError, SweepTable, build_panels, render

DATA = os.path.join(os.path.dirname(__file__), "data", "reference-sweep.csv")


def test_reference_csv_parses():
    table = SweepTable.read(DATA)
    assert len(table.rows) == 16
    assert table.orders() == [(0, 0), (1, 1), (2, 2), (3, 3)]


def test_header_mismatch_names_columns(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("dim,n,k_cell,k_face,ndofs,ndof_bd,lambda_min,lambda_max,cond,seconds\n")
    with pytest.raises(SchemaError) as exc:
        SweepTable.read(str(bad))
    assert "ndof_total" in str(exc.value)
    assert "ndofs" in str(exc.value)


def test_empty_file_rejected(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(SchemaError):
        SweepTable.read(str(empty))


def test_non_numeric_value_rejected(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text(",".join(SCHEMA) + "\n2,4,0,0,56,16,abc,1.0,26.6,0.0\n")
    with pytest.raises(SchemaError) as exc:
        SweepTable.read(str(bad))
    assert "lambda_min" in str(exc.value)


def test_panels_have_one_curve_per_order():
    fig_max, fig_min = build_panels(SweepTable.read(DATA))
    for fig in (fig_max, fig_min):
        ax = fig.axes[0]
        assert len(ax.lines) == 4
        assert ax.get_xscale() == "log"
        labels = [line.get_label() for line in ax.lines]
        assert labels == ["k = 0", "k = 1", "k = 2", "k = 3"]


def test_plateau_visible_in_plotted_data():
    # each curve's last two points agree within 25%: the plateau the figure shows
    fig_max, fig_min = build_panels(SweepTable.read(DATA))
    for fig in (fig_max, fig_min):
        for line in fig.axes[0].lines:
            y = line.get_ydata()
            assert len(y) == 4
            assert 0.8 <= y[-1] / y[-2] <= 1.25
            assert min(y) > 0


def test_render_writes_four_files(tmp_path):
    paths = render(DATA, str(tmp_path / "fig"))
    assert [os.path.basename(p) for p in paths] == [
        "fig-max.png", "fig-max.svg", "fig-min.png", "fig-min.svg",
    ]
    for p in paths:
        assert os.path.getsize(p) > 0


def test_render_deterministic_bytes(tmp_path):
    first = render(DATA, str(tmp_path / "a"))
    second = render(DATA, str(tmp_path / "b"))
    for p1, p2 in zip(first, second):
        with open(p1, "rb") as f1, open(p2, "rb") as f2:
            assert f1.read() == f2.read(), (p1, p2)


def test_single_row_csv(tmp_path):
    single = tmp_path / "single.csv"
    with open(DATA) as fh:
        lines = fh.read().splitlines()
    single.write_text("\n".join(lines[:2]) + "\n")
    paths = render(str(single), str(tmp_path / "one"))
    assert len(paths) == 4
    fig_max, _ = build_panels(SweepTable.read(str(single)))
    assert len(fig_max.axes[0].lines) == 1
    assert len(fig_max.axes[0].lines[0].get_ydata()) == 1


def test_boundary_dofs_axis(tmp_path):
    fig_max, _ = build_panels(SweepTable.read(DATA), x_col="ndof_bd")
    xs = fig_max.axes[0].lines[0].get_xdata()
    assert list(xs) == [16, 32, 64, 128]
    with pytest.raises(ValueError):
        render(DATA, str(tmp_path / "x"), x_col="bogus")


def test_cli_roundtrip(tmp_path, capsys):
    from tracelab_plots.figure import main

    rc = main([DATA, str(tmp_path / "cli"), "--x-axis", "bd"])
    assert rc == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 4

    rc = main([str(tmp_path / "missing.csv"), str(tmp_path / "y")])
    assert rc == 1
