import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sammrf.hypercube import (DataError, LabelMap, SpectralCube, SplitSpec, filter_classes, load_cube, load_labels,
                              make_split, normalize_bands, write_cube, write_labels)


def _write_raw(tmp_path, header_extra="", payload=(1, 2, 3, 4), width=2, height=1, bands=2):
    (tmp_path / "cube.bsq").write_bytes(np.asarray(payload, dtype="<f4").tobytes())
    hdr = tmp_path / "cube.hdr"
    hdr.write_text(f"width: {width}\nheight: {height}\nbands: {bands}\ndata: cube.bsq\n"
                   f"byteorder: little\ndtype: float32\nlayout: bsq\n{header_extra}")
    return hdr


def test_bsq_is_reordered_to_pixel_interleaved(tmp_path):
    cube = load_cube(_write_raw(tmp_path))
    assert (cube.width, cube.height, cube.bands) == (2, 1, 2)
    np.testing.assert_array_equal(cube.pixels(), [[1, 3], [2, 4]])


def test_short_payload_is_rejected(tmp_path):
    with pytest.raises(DataError, match="size mismatch"):
        load_cube(_write_raw(tmp_path, payload=(1, 2, 3)))


def test_non_finite_value_reports_coordinates(tmp_path):
    with pytest.raises(DataError, match="row 0, col 1, band 1"):
        load_cube(_write_raw(tmp_path, payload=(1, 2, 3, np.nan)))


def test_missing_files(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_cube(tmp_path / "nope.hdr")
    hdr = _write_raw(tmp_path)
    (tmp_path / "cube.bsq").unlink()
    with pytest.raises(DataError, match="payload not found"):
        load_cube(hdr)


@pytest.mark.parametrize("key,value", [("byteorder", "big"), ("dtype", "float64"), ("layout", "bip")])
def test_unsupported_header_values(tmp_path, key, value):
    hdr = _write_raw(tmp_path)
    text = hdr.read_text().splitlines()
    hdr.write_text("\n".join(f"{key}: {value}" if line.startswith(key) else line for line in text))
    with pytest.raises(DataError, match=key):
        load_cube(hdr)


@settings(max_examples=25, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 4), st.integers(1, 5), st.integers(1, 6)),
              elements=st.floats(-1e6, 1e6, width=32)))
def test_write_then_load_is_bit_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("cube") / "c.hdr"
    cube = SpectralCube(values.astype(np.float64))
    back = load_cube(write_cube(cube, path))
    assert back.values.tobytes() == cube.values.tobytes()


def test_load_labels(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("0,1\n2,0\n")
    lab = load_labels(p, (2, 2))
    assert lab.class_count == 2
    assert np.count_nonzero(lab.labels) == 2


def test_load_labels_errors(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("0,1\n2\n")
    with pytest.raises(DataError, match="columns"):
        load_labels(p)
    p.write_text("0,1\n2,0\n")
    with pytest.raises(DataError, match="expected 3x2"):
        load_labels(p, (3, 2))
    p.write_text("0,-1\n2,0\n")
    with pytest.raises(DataError, match="negative"):
        load_labels(p)


def test_labels_round_trip(tmp_path):
    arr = np.array([[0, 3, 1], [2, 2, 0]])
    write_labels(arr, tmp_path / "x.csv")
    np.testing.assert_array_equal(load_labels(tmp_path / "x.csv").labels, arr)


def test_normalize_three_values():
    cube = SpectralCube(np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1))
    out = normalize_bands(cube).values.ravel()
    # population std sqrt(2/3): (x - 2) / sqrt(2/3)
    np.testing.assert_allclose(out, [-1.224744871391589, 0.0, 1.224744871391589], rtol=0, atol=1e-12)


def test_constant_band_maps_to_zero():
    vals = np.stack([np.full((1, 3), 5.0), np.array([[1.0, 2.0, 4.0]])], axis=-1)
    out = normalize_bands(SpectralCube(vals))
    np.testing.assert_array_equal(out.values[..., 0], 0.0)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(1, 4)),
              elements=st.floats(-1e3, 1e3)))
def test_normalized_bands_have_zero_mean_unit_std(values):
    out = normalize_bands(SpectralCube(values)).pixels()
    for b in range(out.shape[1]):
        col = out[:, b]
        if np.all(col == 0):
            continue
        assert abs(col.mean()) < 1e-9
        assert abs(col.std() - 1) < 1e-9


def test_normalize_is_idempotent(rng):
    cube = normalize_bands(SpectralCube(rng.normal(3, 2, (5, 7, 4))))
    np.testing.assert_allclose(normalize_bands(cube).values, cube.values, atol=1e-12)


def _labels(counts, width=None):
    flat = np.concatenate([np.full(n, c) for c, n in enumerate(counts, 1)])
    width = width or len(flat)
    return LabelMap(flat.reshape(-1, width))


def test_split_sizes_follow_seventy_thirty():
    lab = _labels([80, 90, 100])
    s = make_split(lab, SplitSpec(10, 50, 0.7, seed=4))
    for c in (1, 2, 3):
        assert len(s.unary_train[c]) == 7
        assert len(s.beta_validation[c]) == 3
        assert len(s.test[c]) == 50


@pytest.mark.parametrize("n,unary", [(2, 1), (5, 4), (10, 7), (20, 14), (30, 21), (50, 35), (70, 49)])
def test_round_half_up(n, unary):
    assert SplitSpec(n).unary_count == unary


def test_split_is_deterministic_and_disjoint():
    lab = _labels([120, 130])
    a = make_split(lab, SplitSpec(20, 50, seed=9))
    b = make_split(lab, SplitSpec(20, 50, seed=9))
    assert a.digest() == b.digest()
    assert a.digest() != make_split(lab, SplitSpec(20, 50, seed=10)).digest()
    for c in (1, 2):
        parts = [set(a.unary_train[c]), set(a.beta_validation[c]), set(a.test[c])]
        assert sum(map(len, parts)) == len(set().union(*parts)) == 70
        assert all(lab.flat()[list(p)].tolist() == [c] * len(p) for p in parts)


def test_split_class_too_small():
    with pytest.raises(DataError, match="class 2 has 40"):
        make_split(_labels([100, 40]), SplitSpec(10, 50))


def test_split_matches_stdlib_shuffle_of_sorted_indices(rng):
    lab = LabelMap(rng.integers(1, 4, (12, 15)))
    spec = SplitSpec(6, 8, seed=21)
    split = make_split(lab, spec)
    oracle = random.Random(21)
    for c in (1, 2, 3):
        # present the class's pixels in scrambled order; sorting must undo it
        idx = rng.permutation(np.flatnonzero(lab.flat() == c)).tolist()
        idx = sorted(idx)
        oracle.shuffle(idx)
        assert split.test[c].tolist() == idx[:8]
        assert split.unary_train[c].tolist() + split.beta_validation[c].tolist() == idx[8:14]


@pytest.mark.parametrize("bad", [dict(train_per_class=1), dict(train_per_class=10, test_per_class=0),
                                 dict(train_per_class=10, unary_fraction=1.0)])
def test_split_spec_validation(bad):
    with pytest.raises(ValueError):
        SplitSpec(**bad)


def test_filter_classes():
    lab = _labels([200, 100, 160], width=20)
    out, mapping = filter_classes(lab, 150)
    assert mapping == {1: 1, 3: 2}
    assert out.class_count == 2
    assert out.class_counts() == {1: 200, 2: 160}
    same, ident = filter_classes(lab, 1)
    assert ident == {1: 1, 2: 2, 3: 3}
    np.testing.assert_array_equal(same.labels, lab.labels)
    with pytest.raises(DataError):
        filter_classes(lab, 1000)
