import numpy as np
import pytest

from semcom.errors import ConfigError
from semcom.scene import (BACKGROUND_COLORS, CLASS_NAMES, OBJECT_COLORS,
                          SceneDescription, SceneObject, background_field,
                          classify_pixels, default_color_for_class,
                          generate_corpus, generate_scene, render_scene,
                          scene_from_json, scene_to_json)


def test_class_vocabulary():
    assert len(CLASS_NAMES) == 80
    assert CLASS_NAMES[16] == "dog"
    assert len(set(CLASS_NAMES)) == 80


def test_palette_sizes_and_unique_names():
    assert len(OBJECT_COLORS) == 16
    assert len(BACKGROUND_COLORS) == 8
    names = [n for n, _ in OBJECT_COLORS] + [n for n, _, _ in BACKGROUND_COLORS]
    assert len(set(names)) == 24


def test_default_color_reduction():
    assert default_color_for_class(16) == 0
    assert default_color_for_class(33) == 1


def test_every_background_pixel_classifies_home():
    # the texture amplitude bound exists exactly for this property
    for bg in range(len(BACKGROUND_COLORS)):
        field = background_field(128, 128, bg)
        labels = classify_pixels(field)
        assert np.all(labels == 16 + bg), BACKGROUND_COLORS[bg][0]


def test_object_pixels_classify_to_their_color():
    for color in range(len(OBJECT_COLORS)):
        arr = np.empty((8, 8, 3), dtype=np.uint8)
        arr[:] = OBJECT_COLORS[color][1]
        assert np.all(classify_pixels(arr) == color)


def test_render_paints_boxes_in_order():
    scene = SceneDescription(width=64, height=64, background=0, objects=(
        SceneObject(class_id=1, x=0.0, y=0.0, w=0.5, h=0.5, color=2, identifier=1),
        SceneObject(class_id=2, x=0.25, y=0.25, w=0.5, h=0.5, color=3, identifier=2),
    ))
    arr = render_scene(scene).to_array()
    # overlap region belongs to the later object
    assert tuple(arr[24, 24]) == OBJECT_COLORS[3][1]
    assert tuple(arr[4, 4]) == OBJECT_COLORS[2][1]
    assert tuple(arr[60, 60]) == BACKGROUND_COLORS[0][1]


class TestGenerator:
    def test_deterministic(self):
        a = generate_corpus(5, 10)
        b = generate_corpus(5, 10)
        assert [scene_to_json(s) for s in a] == [scene_to_json(s) for s in b]

    def test_coordinates_on_wire_grid(self):
        for scene in generate_corpus(6, 10):
            for obj in scene.objects:
                for v in (obj.x, obj.y, obj.w, obj.h):
                    assert (v * 1024) == int(v * 1024)

    def test_object_count_coverage(self):
        counts = {len(s.objects) for s in generate_corpus(1, 100,
                                                          min_objects=1, max_objects=16)}
        assert counts == set(range(1, 17))

    def test_validity(self):
        for scene in generate_corpus(7, 30, min_objects=1, max_objects=16):
            scene.validate()

    def test_distinct_colors_within_scene(self):
        for scene in generate_corpus(8, 10, min_objects=4, max_objects=8):
            colors = [o.color for o in scene.objects]
            assert len(set(colors)) == len(colors)

    def test_avoid_default_colors(self):
        scenes = generate_corpus(9, 10, min_objects=2, max_objects=6,
                                 avoid_default_colors=True)
        for scene in scenes:
            defaults = {default_color_for_class(o.class_id) for o in scene.objects}
            assert not defaults & {o.color for o in scene.objects}

    def test_default_colors_only(self):
        scenes = generate_corpus(10, 10, min_objects=2, max_objects=6,
                                 default_colors_only=True)
        for scene in scenes:
            for obj in scene.objects:
                assert obj.color == default_color_for_class(obj.class_id)

    def test_no_overlap_mode(self):
        rng = np.random.default_rng(11)
        scene = generate_scene(rng, 6, allow_overlap=False)
        boxes = [(o.x, o.y, o.w, o.h) for o in scene.objects]
        for i, a in enumerate(boxes):
            for b in boxes[i + 1:]:
                no_overlap = (a[0] + a[2] <= b[0] or b[0] + b[2] <= a[0]
                              or a[1] + a[3] <= b[1] or b[1] + b[3] <= a[1])
                assert no_overlap

    def test_bad_count(self):
        with pytest.raises(ConfigError):
            generate_corpus(1, 0)


def test_json_roundtrip():
    for scene in generate_corpus(12, 5):
        assert scene_from_json(scene_to_json(scene)) == scene
