"""End-to-end flows: enrollment and authenticated vote casting.

Check order in authenticate is fixed: liveness gate, then signature
verification of the stored template, then the cosine match; any failure
terminates the flow immediately.  A passing authenticate issues a single-use,
TTL-bounded session that cast_vote consumes (even when the vote is rejected),
and every state mutation funnels through one commit lock shared with the
ledger append, so the one-vote policy holds under any interleaving.
"""

from __future__ import annotations

import hashlib
import os
import struct
import threading
import time
from dataclasses import dataclass
from typing import Callable

from . import biometric, falcon, ledger, registry
from .biometric import CaptureSample, Liveness
from .errors import (
    AlreadyVoted,
    ElectionClosed,
    NoMatch,
    SessionExpired,
    SessionInvalid,
    SignatureInvalid,
    SpoofDetected,
    UnknownVoter,
)

_TX_TAG = b"pqballot:v1:tx"

SESSION_TTL_MS = 120_000
SESSION_ID_LEN = 16


@dataclass(frozen=True)
class EnrollmentReceipt:
    address: bytes
    block_index: int
    embedding_digest: bytes
    timestamp_ms: int


@dataclass(frozen=True)
class AuthSession:
    session_id: bytes
    address: bytes
    similarity: float
    expires_at_ms: int


@dataclass(frozen=True)
class VoteReceipt:
    tx_id: bytes
    block_index: int
    candidate_id: int
    timestamp_ms: int


class SessionStore:
    """Single-use sessions with TTL; consume() atomically removes."""

    def __init__(self, clock_ms: Callable[[], int]):
        self._clock = clock_ms
        self._lock = threading.Lock()
        self._sessions: dict[bytes, AuthSession] = {}

    def issue(self, address: bytes, similarity: float, ttl_ms: int) -> AuthSession:
        session = AuthSession(
            session_id=os.urandom(SESSION_ID_LEN),
            address=address,
            similarity=similarity,
            expires_at_ms=self._clock() + ttl_ms,
        )
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def consume(self, session_id: bytes) -> AuthSession:
        with self._lock:
            session = self._sessions.pop(session_id, None)
        if session is None:
            raise SessionInvalid("unknown or already-used session")
        if self._clock() > session.expires_at_ms:
            raise SessionExpired("session TTL elapsed")
        return session


def tx_identity(address: bytes, candidate_id: int, timestamp_ms: int,
                session_id: bytes) -> bytes:
    material = (_TX_TAG + address + struct.pack("<I", candidate_id)
                + struct.pack("<Q", timestamp_ms) + session_id)
    return hashlib.sha3_256(material).digest()


def _now_ms() -> int:
    return int(time.time() * 1000)


class VotingNode:
    """Facade over signature scheme, biometrics, registry, and ledger.

    `metrics` (optional) implements the MetricsRegistry interface; `trace`
    (optional) receives (operation, step) pairs, used by flow-ordering tests.
    """

    def __init__(self, authority: falcon.KeyPair, ledger_store: ledger.LedgerStore,
                 template_store: registry.TemplateStore,
                 voter_registry: registry.Registry | None = None,
                 theta: float = biometric.DEFAULT_THRESHOLD,
                 spoof_threshold: float = biometric.DEFAULT_SPOOF_THRESHOLD,
                 session_ttl_ms: int = SESSION_TTL_MS,
                 clock_ms: Callable[[], int] = _now_ms,
                 metrics=None,
                 trace: Callable[[str, str], None] | None = None):
        self.authority = authority
        self.ledger = ledger_store
        self.templates = template_store
        self.registry = voter_registry if voter_registry is not None else registry.Registry()
        self.theta = theta
        self.spoof_threshold = spoof_threshold
        self.session_ttl_ms = session_ttl_ms
        self.clock_ms = clock_ms
        self.metrics = metrics
        self.trace = trace
        self.sessions = SessionStore(clock_ms)
        self.commit_lock = ledger_store.lock  # state + chain commit are one unit

    # -- helpers ---------------------------------------------------------------

    def _emit(self, op: str, step: str) -> None:
        if self.trace is not None:
            self.trace(op, step)

    def _observe(self, name: str, ms: float) -> None:
        if self.metrics is not None:
            self.metrics.observe(name, ms)

    def _count(self, name: str) -> None:
        if self.metrics is not None:
            self.metrics.increment(name)

    def _gate(self, op: str, sample: CaptureSample) -> None:
        self._emit(op, "liveness")
        if biometric.liveness_gate(sample, self.spoof_threshold) is Liveness.SPOOF:
            self._count("spoof_rejections_total")
            raise SpoofDetected(f"spoof_score={sample.spoof_score}")

    # -- enrollment -------------------------------------------------------------

    def enroll(self, personal: ledger.PersonalInfo,
               sample: CaptureSample) -> EnrollmentReceipt:
        if self.registry.phase is registry.ElectionPhase.CLOSED:
            raise ElectionClosed("enrollment after close")
        self._gate("enroll", sample)
        template = sample.embedding

        t0 = time.perf_counter()
        signed = biometric.sign_embedding(self.authority.secret, template,
                                          self.authority.public)
        sign_ms = (time.perf_counter() - t0) * 1000.0
        self._emit("enroll", "sign_embedding")

        address = registry.derive_address(signed.embedding_digest,
                                          personal.citizenship_number)
        payload = ledger.RegistrationPayload(
            voter_address=address,
            personal=personal,
            embedding_digest=signed.embedding_digest,
            embedding_signature=falcon.encode_signature(signed.signature),
        )
        with self.commit_lock:
            self.registry.ensure_can_register(personal, address, signed, template)
            self.templates.put(signed.embedding_digest, template)
            block = self.ledger.append_block(ledger.BlockKind.REGISTRATION, payload)
            self.registry.register_voter(personal, address, signed, template,
                                         block.header.index)
        # Observed only on success: histogram count must equal registrations.
        self._observe("sign_latency_ms", sign_ms)
        self._count("registrations_total")
        return EnrollmentReceipt(
            address=address,
            block_index=block.header.index,
            embedding_digest=signed.embedding_digest,
            timestamp_ms=block.header.timestamp_ms,
        )

    # -- authentication -----------------------------------------------------------

    def authenticate(self, address: bytes, sample: CaptureSample) -> AuthSession:
        try:
            self._gate("authenticate", sample)

            record = self.registry.get_voter(address)
            if record is None:
                raise UnknownVoter(address.hex())

            self._emit("authenticate", "verify_signed_embedding")
            t0 = time.perf_counter()
            stored_ok = biometric.verify_signed_embedding(
                record.signed_embedding.signer_public, record.template,
                record.signed_embedding)
            self._observe("verify_latency_ms", (time.perf_counter() - t0) * 1000.0)
            if not stored_ok:
                raise SignatureInvalid("stored template failed verification")

            self._emit("authenticate", "match")
            t0 = time.perf_counter()
            similarity = biometric.cosine_similarity(sample.embedding, record.template)
            self._observe("match_latency_ms", (time.perf_counter() - t0) * 1000.0)
            if similarity < self.theta:
                raise NoMatch(f"similarity {similarity:.3f} below {self.theta}")
        except Exception:
            self._count("auth_failures_total")
            raise

        return self.sessions.issue(address, similarity, self.session_ttl_ms)

    # -- voting ----------------------------------------------------------------------

    def cast_vote(self, session_id: bytes, candidate_id: int) -> VoteReceipt:
        session = self.sessions.consume(session_id)  # single-use, even on failure
        if self.registry.phase is not registry.ElectionPhase.OPEN:
            raise ElectionClosed("voting requires an open election")
        with self.commit_lock:
            self.registry.ensure_can_vote(session.address, candidate_id)
            timestamp_ms = self.clock_ms()
            tx_id = tx_identity(session.address, candidate_id, timestamp_ms,
                                session.session_id)
            payload = ledger.VotePayload(voter_address=session.address,
                                         candidate_id=candidate_id, tx_id=tx_id)
            block = self.ledger.append_block(ledger.BlockKind.VOTE, payload,
                                             timestamp_ms=timestamp_ms)
            self.registry.mark_voted(session.address, candidate_id,
                                     block.header.index)
        self._count("votes_total")
        return VoteReceipt(tx_id=tx_id, block_index=block.header.index,
                           candidate_id=candidate_id,
                           timestamp_ms=block.header.timestamp_ms)

    # -- audit -------------------------------------------------------------------------

    def audit_receipt(self, receipt: VoteReceipt) -> bool:
        try:
            block = self.ledger.get_block(receipt.block_index)
        except Exception:
            return False
        payload = block.payload
        if not isinstance(payload, ledger.VotePayload):
            return False
        if payload.tx_id != receipt.tx_id or payload.candidate_id != receipt.candidate_id:
            return False
        with self.ledger.lock:
            blocks = self.ledger.state.blocks[:receipt.block_index + 1]
            raws = self.ledger.state.raw[:receipt.block_index + 1]
        report = ledger.verify_chain_blocks(blocks, raws, self.authority.public,
                                            self.ledger.profile,
                                            self.ledger.gas_model)
        return report.valid

    def results(self) -> dict[int, int]:
        counts = {cid: 0 for cid in self.registry.candidates}
        counts.update(self.ledger.tally())
        return counts

    # -- maintenance ---------------------------------------------------------------------

    def rebuild_registry(self) -> registry.Registry:
        """Replay the chain into a fresh registry (restart path and tests)."""
        candidates = [(c.candidate_id, c.display_name)
                      for c in self.registry.list_candidates()]
        return registry.replay(self.ledger, self.templates, candidates,
                               self.authority.public)
