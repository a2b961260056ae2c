"""Matching pipeline: normalization, cosine thresholding, liveness gating,
hash-then-sign binding, and the synthetic FAR/FRR oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqballot import biometric, falcon
from pqballot.biometric import (
    CaptureSample,
    Liveness,
    SyntheticProvider,
    cosine_similarity,
    find_best_match,
    liveness_gate,
    normalize,
    sign_embedding,
    verify_signed_embedding,
)
from pqballot.errors import DegenerateEmbedding, EmptyTemplateSet

rng = np.random.default_rng(11)


def unit(seed: int) -> biometric.FaceEmbedding:
    return normalize(np.random.default_rng(seed).standard_normal(512))


def test_normalize_records_quality_norm():
    raw = np.zeros(512)
    raw[0] = 2.0
    emb = normalize(raw)
    assert emb.quality_norm == pytest.approx(2.0)
    assert np.linalg.norm(emb.values) == pytest.approx(1.0, abs=1e-9)


def test_normalize_unit_vector_unchanged():
    raw = rng.standard_normal(512)
    raw /= np.linalg.norm(raw)
    emb = normalize(raw)
    assert np.allclose(emb.values, raw)
    assert emb.quality_norm == pytest.approx(1.0)


def test_normalize_rejects_zero_and_nonfinite():
    with pytest.raises(DegenerateEmbedding):
        normalize(np.zeros(512))
    bad = np.ones(512)
    bad[7] = np.nan
    with pytest.raises(DegenerateEmbedding):
        normalize(bad)
    with pytest.raises(DegenerateEmbedding):
        normalize(np.ones(100))


def test_cosine_self_negation_orthogonal():
    e = unit(1)
    neg = biometric.FaceEmbedding(values=-e.values, quality_norm=e.quality_norm)
    assert cosine_similarity(e, e) == pytest.approx(1.0)
    assert cosine_similarity(e, neg) == pytest.approx(-1.0)
    e1 = np.zeros(512)
    e1[0] = 1.0
    e2 = np.zeros(512)
    e2[1] = 1.0
    assert cosine_similarity(normalize(e1), normalize(e2)) == 0.0


def test_cosine_symmetry():
    for seed in range(20):
        a, b = unit(seed), unit(seed + 1000)
        assert abs(cosine_similarity(a, b) - cosine_similarity(b, a)) <= 1e-12


@given(st.floats(min_value=1e-6, max_value=1e6), st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_scale_invariance_of_decision(scale, seed):
    raw = np.random.default_rng(seed).standard_normal(512)
    templates = [(i, unit(i)) for i in range(5)]
    base = find_best_match(normalize(raw), templates, 0.4)
    scaled = find_best_match(normalize(scale * raw), templates, 0.4)
    assert base.best_id == scaled.best_id
    assert base.accepted == scaled.accepted
    assert base.similarity == pytest.approx(scaled.similarity, abs=1e-9)


def test_liveness_gate_boundaries():
    emb = unit(3)
    assert liveness_gate(CaptureSample(emb, 0.9), 0.5) is Liveness.SPOOF
    assert liveness_gate(CaptureSample(emb, 0.1), 0.5) is Liveness.LIVE
    # boundary rejects: fail-closed
    assert liveness_gate(CaptureSample(emb, 0.5), 0.5) is Liveness.SPOOF
    with pytest.raises(ValueError):
        liveness_gate(CaptureSample(emb, 0.5), 1.5)


def test_spoof_score_validated():
    with pytest.raises(ValueError):
        CaptureSample(unit(0), 1.5)


def test_find_best_match_exact_hit():
    templates = [(i, unit(100 + i)) for i in range(10)]
    probe = templates[3][1]
    result = find_best_match(probe, templates, 0.4)
    assert result.best_id == 3
    assert result.similarity == pytest.approx(1.0)
    assert result.accepted


def test_find_best_match_rejects_orthogonal():
    templates = []
    for i in range(5):
        v = np.zeros(512)
        v[i] = 1.0
        templates.append((i, normalize(v)))
    probe_raw = np.zeros(512)
    probe_raw[100] = 1.0
    result = find_best_match(normalize(probe_raw), templates, 0.4)
    assert not result.accepted
    assert result.best_id is None


def test_find_best_match_tie_breaks_to_lowest_id():
    shared = unit(42)
    templates = [(7, shared), (2, shared), (9, shared)]
    result = find_best_match(shared, templates, 0.4)
    assert result.best_id == 2


def test_find_best_match_empty():
    with pytest.raises(EmptyTemplateSet):
        find_best_match(unit(0), [], 0.4)


def test_find_best_match_deterministic():
    templates = [(i, unit(i)) for i in range(50)]
    probe = unit(999)
    first = find_best_match(probe, templates, 0.4)
    for _ in range(5):
        assert find_best_match(probe, templates, 0.4) == first


def test_signed_embedding_roundtrip(keypair512):
    emb = unit(5)
    signed = sign_embedding(keypair512.secret, emb, keypair512.public)
    assert verify_signed_embedding(keypair512.public, emb, signed)
    assert len(falcon.encode_signature(signed.signature)) == 666


def test_signed_embedding_detects_perturbation(keypair512):
    emb = unit(6)
    signed = sign_embedding(keypair512.secret, emb, keypair512.public)
    perturbed = emb.values.copy()
    perturbed[0] += 1e-3
    other = biometric.FaceEmbedding(values=perturbed / np.linalg.norm(perturbed),
                                    quality_norm=emb.quality_norm)
    assert not verify_signed_embedding(keypair512.public, other, signed)


def test_signed_embedding_wrong_person(keypair512):
    signed = sign_embedding(keypair512.secret, unit(7), keypair512.public)
    assert not verify_signed_embedding(keypair512.public, unit(8), signed)


def test_synthetic_provider_stable_identity():
    prov = SyntheticProvider()
    a = prov.identity("subject-1")
    b = prov.identity("subject-1")
    assert np.array_equal(a.values, b.values)
    c = prov.capture("subject-1", capture_nonce=b"x")
    assert cosine_similarity(a, c.embedding) > 0.6
    stranger = prov.identity("subject-2")
    assert cosine_similarity(a, stranger) < 0.2


def test_matching_quality_far_frr():
    """Synthetic-cluster oracle at the calibrated threshold: genuine probes are
    template + sigma=0.08 noise renormalized; impostors are independent
    uniform-on-sphere draws."""
    gen = np.random.default_rng(2024)
    theta = 0.4
    templates = gen.standard_normal((100, 512))
    templates /= np.linalg.norm(templates, axis=1, keepdims=True)
    frr_hits = 0
    for t in templates:
        noisy = t + 0.08 * gen.standard_normal((100, 512))
        noisy /= np.linalg.norm(noisy, axis=1, keepdims=True)
        frr_hits += int(np.sum(noisy @ t < theta))
    frr = frr_hits / 10_000
    a = gen.standard_normal((10_000, 512))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    b = gen.standard_normal((10_000, 512))
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    far = float(np.mean(np.sum(a * b, axis=1) >= theta))
    assert far < 0.001, far
    assert frr < 0.02, frr
