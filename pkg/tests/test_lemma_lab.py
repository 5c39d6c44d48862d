import numpy as np
import pytest

from tracelab.mesh import build_cartesian, build_perturbed_quads
from tracelab.hybrid import DegreeConfig, HybridSpace, constant_trace
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
    hardy_ratio,
    in_annulus,
    in_disc,
    random_hardy_sequences,
    segment_intersects_cell,
)
from tracelab.seminorms import assemble_bundle


@pytest.fixture(scope="module")
def cat4():
    return build_catalog(build_cartesian(2, 4), "bottom")


def test_vertical_set_is_column(cat4):
    f0 = int(cat4.ctx.side_faces[0])
    assert sorted(cat4.V[f0]) == [0, 4, 8, 12]


def test_layers_partition_cells(cat4):
    cells = sorted(t for v in cat4.layers.values() for t in v)
    assert cells == list(range(16))


def test_band_sets_partition_pairs(cat4):
    assert sum(len(v) for v in cat4.W.values()) == len(cat4.pairs) == 4 * 3
    # cross-check the band construction against the annulus helper
    h = cat4.h
    mesh = cat4.mesh
    for l, pl in cat4.W.items():
        for (f, fp) in pl:
            assert in_annulus(mesh.faces[fp].centroid, mesh.faces[f].centroid,
                              l * h, (l - 1) * h)


def test_horizontal_groups_partition_between_sets(cat4):
    for p in cat4.pairs:
        grouped = sorted(t for cells in cat4.C[p].values() for t in cells)
        assert grouped == sorted(cat4.I[p])
        l = cat4.pair_band[p]
        assert all(1 <= s <= l + 1 for s in cat4.C[p])


def test_between_sets_within_three_layers(cat4):
    for p in cat4.pairs:
        l = cat4.pair_band[p]
        for t in cat4.I[p]:
            assert max(l - 2, 0) <= cat4.layer_of[t] <= l


def test_segment_intersection_tie_break():
    mesh = build_cartesian(2, 2)
    # horizontal segment exactly on the mid mesh line touches both rows
    a = np.array([0.1, 0.5])
    b = np.array([0.9, 0.5])
    eps = 1e-9 * np.sqrt(2) / 2
    hits = [t for t in range(4) if segment_intersects_cell(mesh, t, a, b, eps)]
    assert hits == [0, 1, 2, 3]


def test_disc_helper():
    assert in_disc(np.array([0.3, 0.0]), np.array([0.0, 0.0]), 0.3)
    assert not in_disc(np.array([0.4, 0.0]), np.array([0.0, 0.0]), 0.3)


def test_cardinalities_cartesian_values(cat4):
    consts = check_cardinalities(cat4)["constants"]
    # enumerated on the 4x4 grid; C3 = 1 is exact Cartesian geometry
    assert consts["faces_per_cell_vertical"] == 1.0
    assert consts == {
        "layer_vertical": 2.0,
        "band_slice_per_l": 2.0,
        "faces_per_cell_vertical": 1.0,
        "horizontal_group": 4.0,
        "pairs_per_cell_group": 4.0,
    }


@pytest.mark.parametrize("n", [4, 8])
def test_c3_is_one_on_cartesian(n):
    cat = build_catalog(build_cartesian(2, n), "bottom")
    assert check_cardinalities(cat)["constants"]["faces_per_cell_vertical"] == 1.0


def test_catalog_deterministic():
    a = check_cardinalities(build_catalog(build_cartesian(2, 8), "left"))
    b = check_cardinalities(build_catalog(build_cartesian(2, 8), "left"))
    assert a == b


def test_catalog_on_perturbed_mesh():
    cat = build_catalog(build_perturbed_quads(4, 0.2, 7), "bottom")
    consts = check_cardinalities(cat)["constants"]
    assert all(v >= 1.0 for v in consts.values())
    for p in cat.pairs:
        grouped = sorted(t for cells in cat.C[p].values() for t in cells)
        assert grouped == sorted(cat.I[p])


def test_catalog_3d():
    cat = build_catalog(build_cartesian(3, 2), "z0")
    assert len(cat.ctx.side_faces) == 4
    assert sorted(t for v in cat.layers.values() for t in v) == list(range(8))
    consts = check_cardinalities(cat)["constants"]
    assert consts["faces_per_cell_vertical"] == 1.0


# ---------------------------------------------------------------------------
# Hardy

def test_hardy_hand_value():
    ratio = hardy_ratio(np.ones(4))
    assert ratio == pytest.approx(289.0 / 144.0, rel=1e-12)
    assert ratio == pytest.approx((4.0 + 9.0 / 4.0 + 16.0 / 9.0) / 4.0, rel=1e-12)


def test_hardy_spike_limit():
    r = np.array([1.0] + [1e-9] * 200)
    assert hardy_ratio(r) <= np.pi ** 2 / 6.0 + 1e-6
    assert hardy_ratio(r) <= HARDY_BOUND


def test_hardy_rejects_nonpositive():
    with pytest.raises(ValueError):
        hardy_ratio(np.array([1.0, 0.0, 2.0]))
    with pytest.raises(ValueError):
        hardy_ratio(np.array([1.0, -0.5]))


def test_hardy_random_sequences_below_bound():
    report = check_hardy(random_hardy_sequences(1000, 200, seed=9))
    assert report["passed"]
    assert report["probes"] == 1000
    assert 0 < report["constants"]["max_ratio"] <= HARDY_BOUND


# ---------------------------------------------------------------------------
# lifting lemmas

def test_lifting_lemma_identities_and_constants():
    for mesh in (build_cartesian(2, 4), build_perturbed_quads(4, 0.15, 2)):
        cat = build_catalog(mesh, "bottom")
        rep = check_lifting_lemmas(cat)
        assert rep["identities"] == {
            "weights_sum_to_one": True,
            "d_rho_vanishes_outside_a_g": True,
        }
        for name, val in rep["constants"].items():
            assert np.isfinite(val) and val >= 0.0, name


def test_lifting_lemma_h_over_delta_cartesian():
    cat = build_catalog(build_cartesian(2, 8), "bottom")
    rep = check_lifting_lemmas(cat)
    # nearest cell centroid sits at distance h/(2 sqrt 2) from the side
    assert rep["constants"]["h_over_delta_t"] == pytest.approx(2.0 * np.sqrt(2.0), rel=1e-12)


# ---------------------------------------------------------------------------
# local approximation / PW / trace

def test_local_approx_hand_case():
    # single unit cell, k = 0: v_t = 0, one face = 1 gives ratio exactly 1
    space = HybridSpace(build_cartesian(2, 1), DegreeConfig.uniform(0))
    from tracelab.lemma_lab import _local_h1

    v_cell = np.zeros(1)
    v_faces = {k: np.zeros(1) for k in range(4)}
    v_faces[0] = np.ones(1)
    semi = np.sqrt(_local_h1(space, 0, v_cell, v_faces))
    h_t = space.mesh.cells[0].diameter
    p0_f = space.face_average(0, v_faces[0])
    ratio = np.sqrt(space.mesh.faces[0].measure) * abs(p0_f) / (np.sqrt(h_t) * semi)
    assert ratio == pytest.approx(1.0, rel=1e-13)


def test_local_approx_runs_and_is_finite():
    space = HybridSpace(build_cartesian(2, 4), DegreeConfig.uniform(1))
    rep = check_local_approx(space, probes=200, seed=5)
    assert rep["probes"] > 0
    assert 0 < rep["constants"]["l2_ratio"] < 10
    assert 0 < rep["constants"]["pointwise_ratio"] < 10


def test_pw_full_boundary_and_shrinking_p0():
    space = HybridSpace(build_cartesian(2, 8), DegreeConfig.uniform(0))
    bundle = assemble_bundle(space)
    all_faces = [int(k) for k in space.dofmap.boundary_faces]
    full = check_pw(space, bundle, all_faces, probes=25, seed=6)
    half = check_pw(space, bundle, all_faces[: len(all_faces) // 2], probes=25, seed=6)
    single = check_pw(space, bundle, all_faces[:1], probes=25, seed=6)
    for rep in (full, half, single):
        assert rep["probes"] > 0
        assert np.isfinite(rep["constants"]["ratio"])
    # the prefactor absorbs the |P0|^{-1/2} growth: normalized ratios stay put
    assert single["constants"]["ratio"] <= full["constants"]["ratio"] * 1.25


def test_pw_constant_probe_is_degenerate():
    space = HybridSpace(build_cartesian(2, 4), DegreeConfig.uniform(0))
    bundle = assemble_bundle(space)
    w = constant_trace(space, 3.0)
    mean = bundle.S @ w.data / 4.0
    w.data[:] -= mean
    assert np.abs(w.data).max() < 1e-13


def test_pw_rejects_empty_p0():
    space = HybridSpace(build_cartesian(2, 4), DegreeConfig.uniform(0))
    bundle = assemble_bundle(space)
    with pytest.raises(ValueError):
        check_pw(space, bundle, [], probes=5, seed=0)


def test_trace_inequality_check():
    space = HybridSpace(build_cartesian(2, 4), DegreeConfig.uniform(1))
    bundle = assemble_bundle(space)
    rep = check_trace_inequality(bundle, probes=40, seed=7, decompose=True)
    assert rep["probes"] > 0
    assert 0 < rep["constants"]["ratio"] < 50
    parts = rep["worst_probe_parts"]
    assert parts["local"] >= 0 and parts["long_range"] >= 0


def test_lifting_constant_check():
    space = HybridSpace(build_cartesian(2, 4), DegreeConfig.uniform(0))
    bundle = assemble_bundle(space)
    rep = check_lifting_constant(bundle, probes=30, seed=8)
    assert rep["probes"] == 30
    assert 0 < rep["constants"]["ratio"] < 5
