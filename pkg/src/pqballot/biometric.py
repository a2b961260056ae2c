"""Embedding-space identity verification.

Embeddings are 512-dimensional unit vectors compared by cosine similarity
against a threshold; a liveness gate rejects spoof-scored captures before any
comparison, and hash-then-sign binds an embedding to the voter record.  The
CNN that would produce embeddings and spoof scores in production sits behind
EmbeddingProvider; the default provider synthesizes stable per-subject
identities for demos and tests.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import falcon
from .errors import DegenerateEmbedding, EmptyTemplateSet

EMBEDDING_DIM = 512
DEFAULT_THRESHOLD = 0.4
DEFAULT_SPOOF_THRESHOLD = 0.5

_DIGEST_TAG = b"pqballot:v1:embedding"


@dataclass(frozen=True)
class FaceEmbedding:
    """Unit-normalized identity vector plus its pre-normalization norm,
    which downstream code can use as a capture-quality proxy."""

    values: np.ndarray
    quality_norm: float

    def __post_init__(self):
        if self.values.shape != (EMBEDDING_DIM,):
            raise DegenerateEmbedding(f"embedding must have {EMBEDDING_DIM} dimensions")

    def canonical_bytes(self) -> bytes:
        """Little-endian float32 encoding; the digest input on every platform."""
        return self.values.astype("<f4").tobytes()

    def digest(self) -> bytes:
        return hashlib.sha3_256(_DIGEST_TAG + self.canonical_bytes()).digest()


@dataclass(frozen=True)
class CaptureSample:
    embedding: FaceEmbedding
    spoof_score: float
    provider_id: str = "synthetic"

    def __post_init__(self):
        if not 0.0 <= self.spoof_score <= 1.0:
            raise ValueError("spoof_score must lie in [0, 1]")


@dataclass(frozen=True)
class SignedEmbedding:
    embedding_digest: bytes
    signature: falcon.Signature
    signer_public: bytes


class Liveness(Enum):
    LIVE = "Live"
    SPOOF = "Spoof"


@dataclass(frozen=True)
class MatchResult:
    best_id: int | None
    similarity: float
    accepted: bool
    threshold_used: float


def normalize(raw) -> FaceEmbedding:
    """Canonicalize provider output to unit L2 norm, recording the input norm."""
    values = np.asarray(raw, dtype=np.float64)
    if values.shape != (EMBEDDING_DIM,):
        raise DegenerateEmbedding(f"embedding must have {EMBEDDING_DIM} dimensions")
    if not np.all(np.isfinite(values)):
        raise DegenerateEmbedding("embedding has non-finite values")
    norm = float(np.linalg.norm(values))
    if norm == 0.0:
        raise DegenerateEmbedding("all-zero embedding")
    return FaceEmbedding(values=values / norm, quality_norm=norm)


def cosine_similarity(a: FaceEmbedding, b: FaceEmbedding) -> float:
    return float(np.clip(np.dot(a.values, b.values), -1.0, 1.0))


def liveness_gate(sample: CaptureSample,
                  spoof_threshold: float = DEFAULT_SPOOF_THRESHOLD) -> Liveness:
    """Fail-closed: a score exactly at the threshold is rejected."""
    if not 0.0 < spoof_threshold < 1.0:
        raise ValueError("spoof_threshold must lie in (0, 1)")
    return Liveness.SPOOF if sample.spoof_score >= spoof_threshold else Liveness.LIVE


def find_best_match(probe: FaceEmbedding, templates, threshold: float = DEFAULT_THRESHOLD
                    ) -> MatchResult:
    """Max-similarity scan over (id, embedding) pairs; ties break to lowest id.

    The BLAS product is not bitwise-stable across rows, so near-ties are
    re-evaluated with an exactly-rounded sum before choosing, making the
    result deterministic even for identical templates.
    """
    items = sorted(templates, key=lambda pair: pair[0])
    if not items:
        raise EmptyTemplateSet("no templates to match against")
    matrix = np.stack([e.values for _, e in items])
    sims = matrix @ probe.values
    near = np.flatnonzero(sims >= sims.max() - 1e-9)
    exact = {int(i): math.fsum(items[int(i)][1].values * probe.values) for i in near}
    best = min(exact, key=lambda i: (-exact[i], items[i][0]))
    similarity = float(np.clip(exact[best], -1.0, 1.0))
    accepted = similarity >= threshold
    return MatchResult(
        best_id=items[best][0] if accepted else None,
        similarity=similarity,
        accepted=accepted,
        threshold_used=threshold,
    )


def sign_embedding(secret: falcon.SecretKey, embedding: FaceEmbedding,
                   signer_public: bytes) -> SignedEmbedding:
    digest = embedding.digest()
    return SignedEmbedding(
        embedding_digest=digest,
        signature=falcon.sign(secret, digest),
        signer_public=signer_public,
    )


def verify_signed_embedding(public: bytes, embedding: FaceEmbedding,
                            signed: SignedEmbedding) -> bool:
    digest = embedding.digest()
    if digest != signed.embedding_digest:
        return False
    return falcon.verify(public, digest, signed.signature)


class EmbeddingProvider:
    """Source of capture samples; stands in for the camera + CNN pipeline."""

    def capture(self, subject_id: str, spoof_score: float = 0.0) -> CaptureSample:
        raise NotImplementedError


class SyntheticProvider(EmbeddingProvider):
    """Stable per-subject identities: the subject id seeds a direction on the
    unit sphere, and capture noise models repeat acquisitions."""

    def __init__(self, noise_sigma: float = 0.03, seed: bytes = b""):
        self.noise_sigma = noise_sigma
        self._seed = seed

    def _rng(self, subject_id: str, extra: bytes = b"") -> np.random.Generator:
        material = hashlib.sha3_256(self._seed + subject_id.encode() + extra).digest()
        return np.random.default_rng(int.from_bytes(material[:8], "little"))

    def identity(self, subject_id: str) -> FaceEmbedding:
        return normalize(self._rng(subject_id).standard_normal(EMBEDDING_DIM))

    def capture(self, subject_id: str, spoof_score: float = 0.0,
                capture_nonce: bytes = b"") -> CaptureSample:
        base = self.identity(subject_id).values
        noise = self._rng(subject_id, b"noise" + capture_nonce).standard_normal(EMBEDDING_DIM)
        raw = base + self.noise_sigma * noise
        return CaptureSample(embedding=normalize(raw), spoof_score=spoof_score)
