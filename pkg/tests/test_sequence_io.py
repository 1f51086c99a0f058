import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from maskrepair.masks import SequenceBundle
from maskrepair.sequence_io import (
    DatasetLayout,
    DimensionMismatchError,
    IndexGapError,
    MissingFileError,
    SequenceIOError,
    UnencodableIdError,
    davis_palette,
    load_sequence,
    save_frames,
    save_masks,
)


def write_fixture(root, name, frames, masks, frame_ext="png"):
    fdir = root / "JPEGImages" / name
    mdir = root / "RawMasks" / name
    fdir.mkdir(parents=True)
    mdir.mkdir(parents=True)
    for i, (f, m) in enumerate(zip(frames, masks)):
        Image.fromarray(f).save(fdir / f"{i:05d}.{frame_ext}")
        im = Image.fromarray(m.astype(np.uint8), mode="P")
        im.putpalette(davis_palette())
        im.save(mdir / f"{i:05d}.png")


def test_palette_standard_colours():
    pal = np.asarray(davis_palette()).reshape(256, 3)
    assert pal[0].tolist() == [0, 0, 0]
    assert pal[1].tolist() == [128, 0, 0]
    assert pal[2].tolist() == [0, 128, 0]
    assert pal[3].tolist() == [128, 128, 0]
    assert pal[4].tolist() == [0, 0, 128]
    assert pal[8].tolist() == [64, 0, 0]


def test_single_frame_empty_registry(tmp_path):
    write_fixture(tmp_path, "s", np.zeros((1, 4, 5, 3), np.uint8), np.zeros((1, 4, 5)))
    b = load_sequence(DatasetLayout(tmp_path), "s")
    assert b.n_frames == 1 and b.sorted_ids == ()


def test_two_frame_fixture(tmp_path):
    masks = np.zeros((2, 6, 6), np.uint8)
    masks[0, :2, :3] = 1
    masks[1, 3:, 3:] = 2
    masks[1, 0, 0] = 1
    frames = np.random.default_rng(0).integers(0, 256, (2, 6, 6, 3), dtype=np.uint8)
    write_fixture(tmp_path, "s", frames, masks)
    b = load_sequence(DatasetLayout(tmp_path), "s")
    assert b.sorted_ids == (1, 2)
    assert (b.masks == 1).sum() == 7 and (b.masks == 2).sum() == 9
    assert np.array_equal(b.frames, frames)


def test_grayscale_masks_accepted(tmp_path):
    write_fixture(tmp_path, "s", np.zeros((1, 3, 3, 3), np.uint8), np.zeros((1, 3, 3)))
    Image.fromarray(np.full((3, 3), 4, np.uint8), mode="L").save(tmp_path / "RawMasks/s/00000.png")
    assert load_sequence(DatasetLayout(tmp_path), "s").sorted_ids == (4,)


def test_rgb_masks_rejected(tmp_path):
    write_fixture(tmp_path, "s", np.zeros((1, 3, 3, 3), np.uint8), np.zeros((1, 3, 3)))
    Image.fromarray(np.zeros((3, 3, 3), np.uint8)).save(tmp_path / "RawMasks/s/00000.png")
    with pytest.raises(SequenceIOError):
        load_sequence(DatasetLayout(tmp_path), "s")


def test_jpeg_frames(tmp_path):
    write_fixture(tmp_path, "s", np.full((2, 8, 8, 3), 100, np.uint8), np.zeros((2, 8, 8)), "jpg")
    b = load_sequence(DatasetLayout(tmp_path), "s")
    assert b.frames.shape == (2, 8, 8, 3)


def test_dimension_mismatch(tmp_path):
    write_fixture(tmp_path, "s", np.zeros((1, 4, 4, 3), np.uint8), np.zeros((1, 4, 4)))
    Image.fromarray(np.zeros((4, 5), np.uint8), mode="L").save(tmp_path / "RawMasks/s/00000.png")
    with pytest.raises(DimensionMismatchError):
        load_sequence(DatasetLayout(tmp_path), "s")


def test_missing_mask(tmp_path):
    write_fixture(tmp_path, "s", np.zeros((2, 4, 4, 3), np.uint8), np.zeros((2, 4, 4)))
    (tmp_path / "RawMasks/s/00001.png").unlink()
    with pytest.raises(MissingFileError):
        load_sequence(DatasetLayout(tmp_path), "s")


def test_index_gap(tmp_path):
    write_fixture(tmp_path, "s", np.zeros((3, 4, 4, 3), np.uint8), np.zeros((3, 4, 4)))
    (tmp_path / "JPEGImages/s/00001.png").unlink()
    with pytest.raises(IndexGapError):
        load_sequence(DatasetLayout(tmp_path), "s")


def test_missing_sequence(tmp_path):
    with pytest.raises(MissingFileError):
        load_sequence(DatasetLayout(tmp_path), "nope")


def test_unrelated_files_ignored(tmp_path):
    write_fixture(tmp_path, "s", np.zeros((1, 4, 4, 3), np.uint8), np.zeros((1, 4, 4)))
    (tmp_path / "JPEGImages/s/notes.txt").write_text("x")
    (tmp_path / "RawMasks/s/report.json").write_text("{}")
    assert load_sequence(DatasetLayout(tmp_path), "s").n_frames == 1


def test_id_255_round_trip(tmp_path):
    masks = np.zeros((1, 4, 4), np.uint16)
    masks[0, 0, 0] = 255
    b = SequenceBundle(np.zeros((1, 4, 4, 3), np.uint8), masks, name="s")
    layout = DatasetLayout(tmp_path)
    save_frames(b, layout)
    save_masks(b, layout, subdir="RawMasks")
    assert load_sequence(layout, "s").sorted_ids == (255,)


def test_id_over_255_rejected(tmp_path):
    masks = np.zeros((1, 2, 2), np.uint16)
    masks[0, 0, 0] = 256
    b = SequenceBundle(np.zeros((1, 2, 2, 3), np.uint8), masks, name="s")
    with pytest.raises(UnencodableIdError):
        save_masks(b, DatasetLayout(tmp_path))


def test_saved_masks_are_palette_images(tmp_path):
    b = SequenceBundle(np.zeros((1, 2, 2, 3), np.uint8), np.zeros((1, 2, 2), np.uint16), name="s")
    out = save_masks(b, DatasetLayout(tmp_path))
    with Image.open(out / "00000.png") as im:
        assert im.mode == "P" and not np.asarray(im).any()


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("MASKREPAIR_ROOT", str(tmp_path))
    monkeypatch.setenv("MASKREPAIR_GT", "GT")
    layout = DatasetLayout.from_env()
    assert layout.root == tmp_path and layout.gt_subdir == "GT"
    assert DatasetLayout.from_env("elsewhere", gt_subdir="X").gt_subdir == "X"


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(
    arrays(np.uint16, st.tuples(st.integers(1, 3), st.integers(1, 6), st.integers(1, 6)), elements=st.integers(0, 255)),
)
def test_save_load_round_trip(tmp_path_factory, masks):
    root = tmp_path_factory.mktemp("rt")
    frames = np.random.default_rng(int(masks.sum())).integers(0, 256, (*masks.shape, 3), dtype=np.uint8)
    b = SequenceBundle(frames, masks, name="seq")
    layout = DatasetLayout(root)
    save_frames(b, layout)
    save_masks(b, layout, subdir=layout.raw_masks_subdir)
    back = load_sequence(layout, "seq")
    assert np.array_equal(back.masks, masks)
    assert np.array_equal(back.frames, frames)
    assert back.object_ids == b.object_ids
