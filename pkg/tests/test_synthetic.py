import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maskrepair.raster import center_of_mass
from maskrepair.synthetic import Defect, ObjectScript, SceneScript, ScriptError, inject_defects, render


def single(**kw):
    obj = ObjectScript(1, kw.pop("center", (16, 16)), kw.pop("size", (8, 8)), **kw)
    return SceneScript(32, 32, 5, (obj,), seed=0)


def test_static_square_identical_masks():
    b = render(single())
    assert all(np.array_equal(m, b.masks[0]) for m in b.masks)
    assert (b.masks[0] == 1).sum() == 64


def test_translation_moves_centroid():
    b = render(SceneScript(32, 48, 5, (ObjectScript(1, (16, 10), (8, 8), velocity=(0, 2)),)))
    cols = [center_of_mass(m == 1)[1] for m in b.masks]
    assert np.allclose(np.diff(cols), 2)


def test_zoom_is_monotone_about_fixed_centre():
    b = render(SceneScript(64, 64, 6, (ObjectScript(1, (32, 32), (40, 40), scale=0.9),)))
    areas = [(m == 1).sum() for m in b.masks]
    assert all(a > b_ for a, b_ in zip(areas, areas[1:]))
    cents = [center_of_mass(m == 1) for m in b.masks]
    assert all(max(abs(c[0] - 32), abs(c[1] - 32)) <= 0.5 for c in cents)


def test_disk_shape():
    b = render(single(shape="disk", size=(10, 10)))
    area = (b.masks[0] == 1).sum()
    assert abs(area - np.pi * 25) < 12


def test_object_leaving_canvas_errors():
    with pytest.raises(ScriptError):
        render(SceneScript(16, 16, 5, (ObjectScript(1, (8, 8), (6, 6), velocity=(0, 3)),)))


def test_bad_scripts():
    with pytest.raises(ScriptError):
        SceneScript.from_dict({"height": 8})
    with pytest.raises(ScriptError):
        Defect(1, 0, "explode")
    with pytest.raises(ScriptError):
        Defect(1, 0, "drop_part", fraction=1.0)
    with pytest.raises(ScriptError):
        render(SceneScript(8, 8, 2, (ObjectScript(0, (4, 4), (2, 2)),)))


def test_script_json_round_trip(tmp_path):
    script = SceneScript(
        32, 32, 4, (ObjectScript(1, (16, 16), (8, 8), velocity=(1, 0)),), seed=9,
        defects=(Defect(1, 2, "oversplit", 0.5, "top", new_id=4),),
    )
    path = tmp_path / "s.json"
    path.write_text(json.dumps(script.to_dict()))
    again = SceneScript.load(path)
    assert np.array_equal(render(again).frames, render(script).frames)
    assert again.defects == script.defects


def test_drop_part_area():
    b = render(single())
    bad, (region,) = inject_defects(b, [Defect(1, 2, "drop_part", 0.5, "right")])
    assert (bad.masks[2] == 1).sum() == 32
    assert np.array_equal(bad.frames, b.frames)


def test_oversplit_partitions_original():
    b = render(single())
    bad, _ = inject_defects(b, [Defect(1, 2, "oversplit", 0.25, "bottom")])
    new = max(bad.object_ids)
    assert new not in b.object_ids
    assert np.array_equal((bad.masks[2] == 1) | (bad.masks[2] == new), b.masks[2] == 1)
    assert not ((bad.masks[2] == 1) & (bad.masks[2] == new)).any()


def test_oversplit_id_collision():
    b = render(single())
    with pytest.raises(ScriptError):
        inject_defects(b, [Defect(1, 2, "oversplit", new_id=1)])


def test_occlude_changes_pixels_only_in_region():
    b = render(single())
    bad, (region,) = inject_defects(b, [Defect(1, 3, "occlude", 0.5, "left")])
    changed = np.any(bad.frames != b.frames, axis=-1)
    assert not (changed & ~region[None]).any()
    assert changed[3][region].all()
    assert not (bad.masks[3][region]).any()


def test_defect_on_absent_object():
    b = render(single())
    with pytest.raises(ScriptError):
        inject_defects(b, [Defect(9, 0, "drop_part")])


@given(
    st.integers(0, 10**6),
    st.sampled_from(["left", "right", "top", "bottom"]),
    st.floats(0.1, 0.9),
    st.integers(0, 4),
)
def test_determinism_and_undrop(seed, side, fraction, frame):
    script = SceneScript(32, 32, 5, (ObjectScript(1, (16, 16), (10, 8)),), seed=seed)
    a, b = render(script), render(script)
    assert np.array_equal(a.frames, b.frames) and np.array_equal(a.masks, b.masks)
    bad, (region,) = inject_defects(a, [Defect(1, frame, "drop_part", fraction, side)])
    assert np.array_equal((bad.masks[frame] == 1) | region, a.masks[frame] == 1)
