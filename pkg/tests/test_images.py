import numpy as np
import pytest
from hypothesis import given, strategies as st

import specwalk as sw
from specwalk.errors import FormatError, InvalidParam, IoError
from specwalk.images import read_rawj, write_rawj


def test_pgm_p5_load(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 255, 0]))
    img = sw.load_image(p)
    assert img.dims == (2, 2)
    assert np.allclose(img.intensities, [0.0, 1.0, 1.0, 0.0])


def test_pgm_comments_and_maxval(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n# a comment\n2 1\n# more\n100\n" + bytes([50, 100]))
    img = sw.load_image(p)
    assert np.allclose(img.intensities, [0.5, 1.0])


def test_pgm_bad_magic(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P2\n2 2\n255\n" + bytes(4))
    with pytest.raises(FormatError):
        sw.load_image(p)


def test_pgm_payload_mismatch(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes(3))
    with pytest.raises(FormatError):
        sw.load_image(p)


def test_rawj_load_3d(tmp_path):
    vals = np.arange(27, dtype="<f4") / 26.0
    write_rawj(tmp_path / "v", vals, (3, 3, 3), "f32")
    img = sw.load_image(tmp_path / "v.json")
    assert img.dims == (3, 3, 3)
    assert img.n_voxels == 27


def test_rawj_size_mismatch(tmp_path):
    write_rawj(tmp_path / "v", np.zeros(3, dtype="<f4"), (2, 2), "f32")
    with pytest.raises(FormatError):
        sw.load_image(tmp_path / "v.json")


def test_rawj_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(0)
    vals = rng.random(24).astype("<f4")
    write_rawj(tmp_path / "a", vals, (6, 4), "f32")
    img = sw.load_image(tmp_path / "a.json")
    sw.save_image(img, tmp_path / "b")
    assert (tmp_path / "a.raw").read_bytes() == (tmp_path / "b.raw").read_bytes()
    img2 = sw.load_image(tmp_path / "b.json")
    assert np.array_equal(img.intensities, img2.intensities)


def test_load_normalizes_out_of_range(tmp_path):
    write_rawj(tmp_path / "v", np.array([-10.0, 0.0, 30.0], dtype="<f4"),
               (3, 1), "f32")
    img = sw.load_image(tmp_path / "v.json")
    assert img.intensities.min() == 0.0 and img.intensities.max() == 1.0
    assert img.intensity_range == (-10.0, 30.0)


def test_missing_file():
    with pytest.raises(IoError):
        sw.load_image("/nonexistent/image.pgm")


def test_hard_labels_examples():
    f = sw.ProbabilityField((2, 1), [[0.2, 0.8], [0.5, 0.5]])
    assert sw.hard_labels(f).labels.tolist() == [1, 0]
    f = sw.ProbabilityField((3, 1), [[1, 0], [0, 1], [0.4, 0.6]])
    assert sw.hard_labels(f).labels.tolist() == [0, 1, 1]


@given(st.lists(st.floats(1e-3, 1.0), min_size=2, max_size=5),
       st.floats(0.1, 100.0))
def test_hard_labels_rescale_invariant(row, scale):
    row = np.asarray(row)
    field1 = row / row.sum()
    k = row.size
    f1 = sw.ProbabilityField((1, 1), field1[None, :])
    scaled = field1 * scale
    assert int(np.argmax(scaled)) == sw.hard_labels(f1).labels[0]


def test_label_map_round_trip(tmp_path):
    labels = sw.LabelMap((2, 2), [0, 1, sw.SENTINEL_UNLABELED, 2])
    sw.save_labels(labels, tmp_path / "l")
    back = sw.load_labels(tmp_path / "l.json")
    assert np.array_equal(back.labels, labels.labels)


def test_probability_field_validation():
    with pytest.raises(InvalidParam):
        sw.ProbabilityField((2, 1), [[0.7, 0.7], [0.5, 0.5]])
    with pytest.raises(InvalidParam):
        sw.Image((2, 2), [0.0, 0.1, np.nan, 0.3])


def test_probability_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    vals = rng.random((12, 3))
    vals /= vals.sum(axis=1, keepdims=True)
    f = sw.ProbabilityField((4, 3), vals)
    sw.save_probabilities(f, tmp_path / "p")
    back = sw.load_probabilities(tmp_path / "p.json")
    assert back.K == 3
    assert np.abs(back.values - f.values).max() < 1e-6
