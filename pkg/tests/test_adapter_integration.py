"""Cross-component run: the bundled adapter's echo mode, spawned as a real
subprocess, bound as every provider — the end-to-end assertions that hold
with builtin stubs must hold identically over the wire."""

import math
import re
import subprocess
import sys
import time

import numpy as np
import pytest

pytest.importorskip("semcom_adapter")

from semcom.gateway import (ProviderBinding, ProviderSet, Scheme, stub_embed_image,
                            stub_extract, stub_reconstruct)
from semcom.knowledge import KnowledgeBase
from semcom.pipeline import ExperimentConfig, run_transmission, seed_history
from semcom.scene import generate_corpus, render_scene


@pytest.fixture(scope="module")
def adapter_endpoint():
    proc = subprocess.Popen(
        [sys.executable, "-m", "semcom_adapter", "serve", "--echo",
         "--listen", "127.0.0.1:0"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    try:
        line = proc.stdout.readline()
        match = re.search(r"listening on ([\d.]+:\d+)", line)
        assert match, f"no endpoint line, got {line!r}"
        yield match.group(1)
    finally:
        proc.terminate()
        proc.wait(timeout=10)


@pytest.fixture
def external_providers(adapter_endpoint):
    bindings = {
        kind: ProviderBinding(kind=kind, mode="external", endpoint=adapter_endpoint)
        for kind in ("extractor", "reconstructor", "denoiser", "embedder")
    }
    providers = ProviderSet(bindings, timeout=10.0)
    yield providers
    providers.close()


def test_extract_matches_builtin(external_providers):
    scene = generate_corpus(31, 1, min_objects=3, max_objects=3)[0]
    for scheme in (Scheme.NA, Scheme.NI):
        over_wire = external_providers.extract(scene, scheme)
        builtin = stub_extract(scene, scheme)
        assert over_wire == builtin


def test_reconstruct_matches_builtin_pixels(external_providers):
    scene = generate_corpus(32, 1, min_objects=2, max_objects=2)[0]
    prompt = stub_extract(scene, Scheme.HA)
    kb_a, kb_b = KnowledgeBase(name="C"), KnowledgeBase(name="C")
    seed_history(kb_a, scene)
    seed_history(kb_b, scene)
    over_wire = external_providers.reconstruct(prompt, Scheme.HA, kb_a,
                                               width=scene.width, height=scene.height)
    builtin = stub_reconstruct(prompt, Scheme.HA, kb_b,
                               width=scene.width, height=scene.height)
    assert over_wire.pixels == builtin.pixels


def test_embeddings_match_builtin(external_providers):
    scene = generate_corpus(33, 1, min_objects=2, max_objects=2)[0]
    img = render_scene(scene)
    assert np.allclose(external_providers.embed_image(img), stub_embed_image(img))


def test_denoise_echo_identity(external_providers):
    rng = np.random.default_rng(34)
    symbols = (rng.standard_normal(16) + 1j * rng.standard_normal(16)) / 2
    out = external_providers.denoise(symbols, 10.0)
    assert np.allclose(out, symbols)


def test_noiseless_closure_through_external_providers(external_providers):
    cfg = ExperimentConfig(snr_db=math.inf, trials=1, seed=35)
    scene = generate_corpus(35, 1, min_objects=2, max_objects=2,
                            default_colors_only=True)[0]
    rec = run_transmission(scene, Scheme.NA, cfg, providers=external_providers,
                           trial=0)
    assert rec.crc_ok
    assert rec.image_alignment == pytest.approx(1.0, abs=1e-6)
    assert rec.object_alignment == pytest.approx(1.0, abs=1e-6)
    assert rec.text_alignment == pytest.approx(1.0, abs=1e-6)


def test_kb_effect_through_external_providers(external_providers):
    cfg = ExperimentConfig(snr_db=math.inf, trials=1, seed=36, omit_color=True)
    scene = generate_corpus(36, 1, min_objects=2, max_objects=2,
                            avoid_default_colors=True)[0]
    receivers_h = [KnowledgeBase(name="C")]
    seed_history(receivers_h[0], scene)
    ha = run_transmission(scene, Scheme.HA, cfg, receivers=receivers_h,
                          providers=external_providers, trial=0)
    na = run_transmission(scene, Scheme.NA, cfg,
                          receivers=[KnowledgeBase(name="B")],
                          providers=external_providers, trial=0)
    assert ha.per_receiver["C"]["object_alignment"] > na.per_receiver["B"]["object_alignment"]
