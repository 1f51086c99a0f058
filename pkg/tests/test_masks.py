import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from maskrepair.masks import (
    SequenceBundle,
    ShapeMismatchError,
    area,
    extract_object,
    intersect,
    subtract,
    union,
)

bool_masks = arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12)))


@st.composite
def mask_pairs(draw):
    shape = draw(st.tuples(st.integers(1, 12), st.integers(1, 12)))
    return draw(arrays(bool, shape)), draw(arrays(bool, shape))


def test_extract_absent_object_is_empty():
    m = extract_object(np.zeros((4, 4), np.uint16), 1)
    assert m.dtype == bool and area(m) == 0


def test_extract_top_row():
    labels = np.zeros((4, 4), np.uint16)
    labels[0] = 1
    assert area(extract_object(labels, 1)) == 4


def test_extract_matches_pixel_enumeration():
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 4, (16, 16)).astype(np.uint16)
    for oid in (1, 2, 3):
        count = sum(1 for r in range(16) for c in range(16) if labels[r, c] == oid)
        assert area(extract_object(labels, oid)) == count


def test_extract_rejects_background():
    with pytest.raises(ValueError):
        extract_object(np.zeros((2, 2), np.uint16), 0)


def test_area_examples():
    assert area(np.zeros((3, 3), bool)) == 0
    assert area(np.ones((3, 3), bool)) == 9
    a = np.zeros((4, 4), bool)
    b = np.zeros((4, 4), bool)
    a[:2, :2] = True
    b[2:, 2:] = True
    assert area(union(a, b)) == 8


def test_set_ops_per_pixel_oracle():
    rng = np.random.default_rng(2)
    a, b = rng.random((8, 8)) < 0.5, rng.random((8, 8)) < 0.5
    u, i, s = union(a, b), intersect(a, b), subtract(a, b)
    for r in range(8):
        for c in range(8):
            assert u[r, c] == (a[r, c] or b[r, c])
            assert i[r, c] == (a[r, c] and b[r, c])
            assert s[r, c] == (a[r, c] and not b[r, c])


def test_set_ops_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        union(np.zeros((2, 2), bool), np.zeros((2, 3), bool))


@given(bool_masks)
def test_idempotence(a):
    assert np.array_equal(union(a, a), a)
    assert np.array_equal(intersect(a, a), a)
    assert area(subtract(a, a)) == 0


@given(mask_pairs())
def test_inclusion_exclusion(pair):
    a, b = pair
    assert area(union(a, b)) + area(intersect(a, b)) == area(a) + area(b)


@given(mask_pairs())
def test_subtract_is_intersect_with_complement(pair):
    a, b = pair
    assert np.array_equal(subtract(a, b), intersect(a, ~b))


@given(arrays(np.uint16, st.tuples(st.integers(1, 10), st.integers(1, 10)), elements=st.integers(0, 5)))
def test_extraction_partitions_pixels(labels):
    ids = [int(i) for i in np.unique(labels) if i]
    cover = np.zeros(labels.shape, int) + (labels == 0)
    for oid in ids:
        cover += extract_object(labels, oid)
    assert np.all(cover == 1)


def _bundle(n=2, h=3, w=4, ids=None, masks=None):
    frames = np.zeros((n, h, w, 3), np.uint8)
    if masks is None:
        masks = np.zeros((n, h, w), np.uint16)
    return SequenceBundle(frames, masks, ids)


def test_bundle_derives_registry():
    masks = np.zeros((2, 3, 4), np.uint16)
    masks[0, 0, 0] = 2
    masks[1, 1, 1] = 5
    b = _bundle(masks=masks)
    assert b.sorted_ids == (2, 5)
    assert b.n_frames == 2 and b.shape == (3, 4) and b.frame_area == 12


def test_bundle_rejects_unregistered_label():
    masks = np.zeros((2, 3, 4), np.uint16)
    masks[0, 0, 0] = 3
    with pytest.raises(ValueError):
        _bundle(masks=masks, ids={1})


def test_bundle_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        SequenceBundle(np.zeros((2, 3, 4, 3), np.uint8), np.zeros((2, 3, 5), np.uint16))
    with pytest.raises(ValueError):
        SequenceBundle(np.zeros((2, 3, 4, 3), np.uint8), np.zeros((3, 3, 4), np.uint16))


def test_bundle_rejects_empty_sequence():
    with pytest.raises(ValueError):
        SequenceBundle(np.zeros((0, 3, 4, 3), np.uint8), np.zeros((0, 3, 4), np.uint16))


def test_bundle_arrays_are_read_only():
    b = _bundle()
    with pytest.raises(ValueError):
        b.masks[0, 0, 0] = 1


def test_with_masks_extends_registry():
    b = _bundle(ids={1})
    masks = np.zeros((2, 3, 4), np.uint16)
    masks[0, 0, 0] = 4
    nb = b.with_masks(masks)
    assert set(nb.object_ids) == {1, 4}
    assert nb.frames is b.frames
