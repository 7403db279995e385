"""Stub provider semantics: grammar inversion, reconstruction color rules,
extract/reconstruct closure, and the joint-embedding properties."""

import numpy as np
import pytest

from semcom.errors import (EmptyInput, GrammarError, PromptSchemeMismatch,
                           ZeroVector)
from semcom.gateway import (Scheme, SelectionPolicy, caption_for, detect_objects,
                            grid_layout, parse_caption, prompt_placements,
                            stub_caption_image, stub_embed_image, stub_embed_text,
                            stub_extract, stub_reconstruct)
from semcom.knowledge import HistoryRecord, KnowledgeBase
from semcom.prompts import Prompt, PromptVariant
from semcom.scene import (OBJECT_COLORS, RasterImage, SceneDescription,
                          SceneObject, generate_corpus, render_scene)


def one_object_scene(color=0, class_id=16, background=0):
    return SceneDescription(width=256, height=256, background=background, objects=(
        SceneObject(class_id=class_id, x=0.3, y=0.4, w=0.3, h=0.3,
                    color=color, identifier=42),))


class TestGrammar:
    def test_single_object_caption(self):
        scene = one_object_scene()
        prompt = stub_extract(scene, Scheme.NI)
        assert prompt.caption == "a red dog on plain background"
        assert prompt.identifiers == (42,)

    def test_omit_color(self):
        prompt = stub_extract(one_object_scene(), Scheme.NI, omit_color=True)
        assert prompt.caption == "a dog on plain background"

    def test_multiword_class_names_parse(self):
        caption = caption_for([(2, 9), (None, 11)], 4)
        assert caption == "a blue traffic light and a stop sign on sky background"
        items, background = parse_caption(caption)
        assert items == [(2, 9), (None, 11)]
        assert background == 4

    def test_color_class_collision(self):
        # "orange" is both a color word and a class name
        items, _ = parse_caption("a orange on plain background")
        assert items == [(None, 49)]
        items, _ = parse_caption("a orange orange on plain background")
        assert items == [(4, 49)]

    def test_grammar_inversion_over_corpus(self):
        for scene in generate_corpus(21, 100, min_objects=1, max_objects=16):
            prompt = stub_extract(scene, Scheme.NI)
            items, background = parse_caption(prompt.caption)
            assert [c for _, c in items] == [o.class_id for o in scene.objects]
            assert [col for col, _ in items] == [o.color for o in scene.objects]
            assert background == scene.background

    def test_rejects_non_grammar(self):
        with pytest.raises(GrammarError):
            parse_caption("an arbitrary sentence")
        with pytest.raises(GrammarError):
            parse_caption("a flying saucer on plain background")


class TestExtract:
    def test_boxes_copied_exactly(self):
        scene = one_object_scene()
        prompt = stub_extract(scene, Scheme.NA)
        assert prompt.variant is PromptVariant.LABELED_BOXES
        box = prompt.boxes[0]
        assert (box.class_id, box.x, box.y, box.w, box.h) == (16, 0.3, 0.4, 0.3, 0.3)
        assert prompt.identifiers == (42,)

    def test_selection_policy_truncates_in_confidence_order(self):
        scene = next(iter(generate_corpus(22, 1, min_objects=6, max_objects=6)))
        prompt = stub_extract(scene, Scheme.NA, policy=SelectionPolicy(max_items=3))
        assert len(prompt.boxes) == 3
        assert prompt.identifiers == tuple(o.identifier for o in scene.objects[:3])

    def test_extract_from_raster(self):
        scene = one_object_scene()
        prompt = stub_extract(render_scene(scene), Scheme.NA)
        box = prompt.boxes[0]
        assert box.class_id == 0  # canonical class for red
        assert box.x == pytest.approx(0.3, abs=2 / 256)
        assert box.w == pytest.approx(0.3, abs=2 / 256)

    def test_baseline_scheme_has_no_prompt(self):
        with pytest.raises(PromptSchemeMismatch):
            stub_extract(one_object_scene(), Scheme.SHANNON_BASELINE)

    def test_unsupported_modality(self):
        from semcom.errors import UnsupportedModality
        with pytest.raises(UnsupportedModality):
            stub_extract("not a scene", Scheme.NA)


class TestReconstruct:
    def test_history_color_wins_for_history_scheme(self):
        scene = one_object_scene(color=5)
        prompt = stub_extract(scene, Scheme.HA)
        kb = KnowledgeBase()
        kb.put(42, HistoryRecord(color=5, class_id=16))
        out = stub_reconstruct(prompt, Scheme.HA, kb)
        arr = out.to_array()
        assert tuple(arr[128, 115]) == OBJECT_COLORS[5][1]

    def test_default_color_without_history(self):
        scene = one_object_scene(color=5)
        prompt = stub_extract(scene, Scheme.NA)
        out = stub_reconstruct(prompt, Scheme.NA, KnowledgeBase())
        arr = out.to_array()
        # class 16 -> palette entry 0
        assert tuple(arr[128, 115]) == OBJECT_COLORS[0][1]

    def test_no_history_scheme_never_reads_kb(self):
        prompt = stub_extract(one_object_scene(), Scheme.NA)
        kb = KnowledgeBase()
        kb.put(42, HistoryRecord(color=5, class_id=16))
        reads = kb.history_reads
        stub_reconstruct(prompt, Scheme.NA, kb)
        assert kb.history_reads == reads

    def test_caption_color_used_when_no_history(self):
        prompt = stub_extract(one_object_scene(color=7), Scheme.NI)
        out = stub_reconstruct(prompt, Scheme.NI, KnowledgeBase())
        layout = grid_layout(1)[0]
        cx = int((layout[0] + layout[2] / 2) * 256)
        cy = int((layout[1] + layout[3] / 2) * 256)
        assert tuple(out.to_array()[cy, cx]) == OBJECT_COLORS[7][1]

    def test_history_equal_to_default_gives_identical_renders(self):
        # the KB monotonicity equality case: history color == class default
        scene = one_object_scene(color=0)  # class 16 default is palette 0
        prompt = stub_extract(scene, Scheme.HA)
        kb = KnowledgeBase()
        kb.put(42, HistoryRecord(color=0, class_id=16))
        ha = stub_reconstruct(prompt, Scheme.HA, kb)
        na = stub_reconstruct(prompt, Scheme.NA, KnowledgeBase())
        assert ha.pixels == na.pixels

    def test_hi_vs_ni_differ_exactly_inside_boxes(self):
        # color-omitted caption: HI uses history, NI the class default
        scene = one_object_scene(color=5)
        prompt = stub_extract(scene, Scheme.HI, omit_color=True)
        kb = KnowledgeBase()
        kb.put(42, HistoryRecord(color=5, class_id=16))
        hi = stub_reconstruct(prompt, Scheme.HI, kb).to_array()
        ni = stub_reconstruct(prompt, Scheme.NI, KnowledgeBase()).to_array()
        diff = np.any(hi != ni, axis=2)
        from semcom.scene import box_to_pixels
        x0, y0, x1, y1 = box_to_pixels(*grid_layout(1)[0], 256, 256)
        expected = np.zeros_like(diff)
        expected[y0:y1, x0:x1] = True
        assert np.array_equal(diff, expected)

    def test_scheme_mismatch(self):
        caption_prompt = stub_extract(one_object_scene(), Scheme.NI)
        with pytest.raises(PromptSchemeMismatch):
            stub_reconstruct(caption_prompt, Scheme.NA, KnowledgeBase())
        box_prompt = stub_extract(one_object_scene(), Scheme.NA)
        with pytest.raises(PromptSchemeMismatch):
            stub_reconstruct(box_prompt, Scheme.NI, KnowledgeBase())

    def test_hybrid_serves_both_families(self):
        prompt = Prompt(variant=PromptVariant.HYBRID,
                        caption="a red dog on plain background",
                        boxes=stub_extract(one_object_scene(), Scheme.NA).boxes,
                        identifiers=(42,))
        stub_reconstruct(prompt, Scheme.NA, KnowledgeBase())
        stub_reconstruct(prompt, Scheme.NI, KnowledgeBase())


class TestClosure:
    def test_extract_reconstruct_closure_pixel_exact(self):
        # plain background + class-default colors: the prompt carries
        # everything the renderer needs
        scenes = generate_corpus(23, 10, min_objects=1, max_objects=6,
                                 backgrounds=(0,), default_colors_only=True)
        for scene in scenes:
            prompt = stub_extract(scene, Scheme.NA)
            out = stub_reconstruct(prompt, Scheme.NA, KnowledgeBase(),
                                   width=scene.width, height=scene.height)
            assert out.pixels == render_scene(scene).pixels


class TestEmbedding:
    def test_unit_norm(self):
        for scene in generate_corpus(24, 5):
            vec = stub_embed_image(render_scene(scene))
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-9)

    def test_deterministic_self_similarity(self):
        img = render_scene(one_object_scene())
        a, b = stub_embed_image(img), stub_embed_image(img)
        assert float(a @ b) == pytest.approx(1.0, abs=1e-12)

    def test_position_invariance(self):
        s1 = one_object_scene()
        s2 = SceneDescription(width=256, height=256, background=0, objects=(
            SceneObject(class_id=16, x=0.05, y=0.05, w=0.3, h=0.3,
                        color=0, identifier=42),))
        v1 = stub_embed_image(render_scene(s1))
        v2 = stub_embed_image(render_scene(s2))
        assert float(v1 @ v2) == pytest.approx(1.0, abs=1e-9)

    def test_disjoint_support(self):
        v1 = stub_embed_image(render_scene(one_object_scene(color=0)))
        v2 = stub_embed_image(render_scene(one_object_scene(color=3, class_id=17)))
        assert float(v1 @ v2) == pytest.approx(0.0, abs=1e-12)

    def test_caption_image_equality_under_shared_layout(self):
        scene = one_object_scene()
        caption = stub_extract(scene, Scheme.NI).caption
        layout = grid_layout(1)[0]
        grid_scene = SceneDescription(width=256, height=256, background=0, objects=(
            SceneObject(class_id=16, x=layout[0], y=layout[1], w=layout[2],
                        h=layout[3], color=0, identifier=42),))
        v_text = stub_embed_text(caption)
        v_img = stub_embed_image(render_scene(grid_scene))
        assert float(v_text @ v_img) == pytest.approx(1.0, abs=1e-9)

    def test_object_free_image_is_not_zero(self):
        from semcom.scene import background_field
        img = RasterImage.from_array(background_field(64, 64, 4))
        vec = stub_embed_image(img)
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-9)

    def test_empty_inputs_rejected(self):
        with pytest.raises(EmptyInput):
            stub_embed_text("")


class TestCaptioner:
    def test_captions_canonical_classes(self):
        img = render_scene(one_object_scene())
        assert stub_caption_image(img) == "a red person on plain background"

    def test_caption_of_object_free_image(self):
        from semcom.scene import background_field
        img = RasterImage.from_array(background_field(64, 64, 5))
        assert stub_caption_image(img) == "nothing on grass background"

    def test_detect_objects_orders_by_palette(self):
        scene = SceneDescription(width=256, height=256, background=0, objects=(
            SceneObject(class_id=1, x=0.6, y=0.6, w=0.2, h=0.2, color=9, identifier=1),
            SceneObject(class_id=2, x=0.1, y=0.1, w=0.2, h=0.2, color=4, identifier=2),
        ))
        found = detect_objects(render_scene(scene))
        assert [c for c, _ in found] == [4, 9]


def test_prompt_placements_grid_rule():
    prompt = Prompt(variant=PromptVariant.CAPTION,
                    caption="a red dog and a blue cat on plain background",
                    identifiers=(1, 2))
    placements, background = prompt_placements(prompt, Scheme.NI)
    assert background == 0
    assert [p[3] for p in placements] == [1, 2]
    assert [p[2] for p in placements] == grid_layout(2)
