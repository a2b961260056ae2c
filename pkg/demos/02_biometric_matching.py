"""Embedding-space identity checks: normalization, cosine matching, the
liveness gate, and an FAR/FRR sweep over the synthetic identity model.

Run:  python demos/02_biometric_matching.py
"""

import numpy as np

from pqballot.biometric import (
    CaptureSample,
    SyntheticProvider,
    cosine_similarity,
    find_best_match,
    liveness_gate,
)

provider = SyntheticProvider(seed=b"demo")

print("== stable synthetic identities ==")
alice = provider.identity("alice")
again = provider.identity("alice")
bob = provider.identity("bob")
print(f"alice vs alice: {cosine_similarity(alice, again):+.3f}")
print(f"alice vs bob:   {cosine_similarity(alice, bob):+.3f}")

print("\n== repeat captures carry acquisition noise ==")
for nonce in (b"1", b"2", b"3"):
    cap = provider.capture("alice", capture_nonce=nonce)
    print(f"capture {nonce.decode()}: similarity to template "
          f"{cosine_similarity(alice, cap.embedding):+.3f}")

print("\n== liveness gate (fail-closed at the boundary) ==")
for score in (0.1, 0.49, 0.5, 0.9):
    verdict = liveness_gate(CaptureSample(alice, score), 0.5)
    print(f"spoof_score {score:.2f} -> {verdict.value}")

print("\n== 1:N identification ==")
templates = [(i, provider.identity(f"citizen-{i}")) for i in range(10)]
probe = provider.capture("citizen-4", capture_nonce=b"x").embedding
result = find_best_match(probe, templates, threshold=0.4)
print(f"best_id={result.best_id} similarity={result.similarity:.3f} "
      f"accepted={result.accepted}")

print("\n== FAR/FRR across thresholds (10k genuine / 10k impostor pairs) ==")
gen = np.random.default_rng(7)
temps = gen.standard_normal((100, 512))
temps /= np.linalg.norm(temps, axis=1, keepdims=True)
genuine = []
for t in temps:
    noisy = t + 0.08 * gen.standard_normal((100, 512))
    noisy /= np.linalg.norm(noisy, axis=1, keepdims=True)
    genuine.append(noisy @ t)
genuine = np.concatenate(genuine)
a = gen.standard_normal((10_000, 512))
a /= np.linalg.norm(a, axis=1, keepdims=True)
b = gen.standard_normal((10_000, 512))
b /= np.linalg.norm(b, axis=1, keepdims=True)
impostor = np.sum(a * b, axis=1)
print(f"{'theta':>6} {'FRR':>8} {'FAR':>8}")
for theta in (0.2, 0.3, 0.4, 0.5, 0.6):
    frr = float(np.mean(genuine < theta))
    far = float(np.mean(impostor >= theta))
    print(f"{theta:>6.1f} {frr:>8.3%} {far:>8.4%}")
print("default theta=0.4 sits where FAR ~ 0 and FRR stays under 2%")
