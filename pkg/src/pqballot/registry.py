"""Smart-contract analog: voter records, candidates, events, one-vote policy.

The ledger is the source of truth; the registry is a deterministic state
machine over it.  Templates are plaintext embeddings kept OFF-chain in a
sidecar store keyed by their on-chain digest, so replaying the ledger plus the
sidecar reconstructs the registry field-for-field, and every template is
integrity-checked against the chain during replay.
"""

from __future__ import annotations

import hashlib
import os
import struct
import threading
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import falcon, ledger
from .biometric import EMBEDDING_DIM, FaceEmbedding, SignedEmbedding
from .errors import (
    AlreadyRegistered,
    AlreadyVoted,
    DuplicateCandidate,
    ElectionAlreadyOpen,
    InvalidSignedEmbedding,
    MalformedEncoding,
    NotRegistered,
    UnknownCandidate,
)

_ADDRESS_TAG = b"pqballot:v1:address"
SNAPSHOT_MAGIC = b"PQSR"
SNAPSHOT_VERSION = 1


def derive_address(embedding_digest: bytes, citizenship_number: str) -> bytes:
    """20-byte pseudonymous address, reproducible from on-chain data."""
    material = _ADDRESS_TAG + embedding_digest + citizenship_number.encode("utf-8")
    return hashlib.sha3_256(material).digest()[:20]


class ElectionPhase(Enum):
    SETUP = "Setup"
    OPEN = "Open"
    CLOSED = "Closed"


class EventKind(Enum):
    VOTER_REGISTERED = "VoterRegistered"
    CAST_VOTE = "CastVote"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    address: bytes
    payload_summary: str
    block_index: int


@dataclass
class VoterRecord:
    address: bytes
    personal: ledger.PersonalInfo
    signed_embedding: SignedEmbedding
    template: FaceEmbedding
    is_registered: bool = True
    has_voted: bool = False


@dataclass
class CandidateRecord:
    candidate_id: int
    display_name: str
    vote_count: int = 0


class TemplateStore:
    """Append-only sidecar of plaintext templates keyed by embedding digest."""

    _FRAME = 32 + 8 + 4 * EMBEDDING_DIM  # digest | quality_norm f64 | values f32

    def __init__(self, path):
        self.path = str(path)
        self._lock = threading.Lock()
        self._templates: dict[bytes, FaceEmbedding] = {}
        self._load()

    def _load(self) -> None:
        if not os.path.exists(self.path):
            return
        with open(self.path, "rb") as fh:
            data = fh.read()
        full = (len(data) // self._FRAME) * self._FRAME
        for off in range(0, full, self._FRAME):
            digest = data[off:off + 32]
            (qnorm,) = struct.unpack_from("<d", data, off + 32)
            values = np.frombuffer(data[off + 40:off + self._FRAME], dtype="<f4")
            emb = FaceEmbedding(values=values.astype(np.float64), quality_norm=qnorm)
            self._templates[digest] = emb

    def put(self, digest: bytes, template: FaceEmbedding) -> None:
        with self._lock:
            if digest in self._templates:
                return
            frame = (digest + struct.pack("<d", template.quality_norm)
                     + template.canonical_bytes())
            with open(self.path, "ab") as fh:
                fh.write(frame)
                fh.flush()
                os.fsync(fh.fileno())
            self._templates[digest] = template

    def get(self, digest: bytes) -> FaceEmbedding | None:
        with self._lock:
            return self._templates.get(digest)


class Registry:
    """Authoritative in-memory state; mutate only under the node commit lock."""

    def __init__(self):
        self.records: dict[bytes, VoterRecord] = {}
        self.by_citizenship: dict[str, bytes] = {}
        self.candidates: dict[int, CandidateRecord] = {}
        self.events: list[Event] = []
        self.phase = ElectionPhase.SETUP

    # -- lifecycle ---------------------------------------------------------------

    def add_candidate(self, candidate_id: int, display_name: str) -> None:
        if self.phase is not ElectionPhase.SETUP:
            raise ElectionAlreadyOpen("candidates are fixed once the election opens")
        if candidate_id in self.candidates:
            raise DuplicateCandidate(str(candidate_id))
        self.candidates[candidate_id] = CandidateRecord(candidate_id, display_name)

    def open_election(self) -> None:
        self.phase = ElectionPhase.OPEN

    def close_election(self) -> None:
        self.phase = ElectionPhase.CLOSED

    def list_candidates(self) -> list[CandidateRecord]:
        return [self.candidates[cid] for cid in sorted(self.candidates)]

    # -- registration -------------------------------------------------------------

    def ensure_can_register(self, personal: ledger.PersonalInfo, address: bytes,
                            signed_embedding: SignedEmbedding,
                            template: FaceEmbedding) -> None:
        from .biometric import verify_signed_embedding

        if personal.citizenship_number in self.by_citizenship:
            raise AlreadyRegistered(personal.citizenship_number)
        if address in self.records:
            raise AlreadyRegistered(address.hex())
        if not verify_signed_embedding(signed_embedding.signer_public, template,
                                       signed_embedding):
            raise InvalidSignedEmbedding("signature does not bind this template")

    def register_voter(self, personal: ledger.PersonalInfo, address: bytes,
                       signed_embedding: SignedEmbedding, template: FaceEmbedding,
                       block_index: int) -> Event:
        record = VoterRecord(address=address, personal=personal,
                             signed_embedding=signed_embedding, template=template)
        self.records[address] = record
        self.by_citizenship[personal.citizenship_number] = address
        event = Event(kind=EventKind.VOTER_REGISTERED, address=address,
                      payload_summary=f"citizenship={personal.citizenship_number}",
                      block_index=block_index)
        self.events.append(event)
        return event

    # -- voting ---------------------------------------------------------------------

    def ensure_can_vote(self, address: bytes, candidate_id: int) -> None:
        record = self.records.get(address)
        if record is None:
            raise NotRegistered(address.hex())
        if record.has_voted:
            raise AlreadyVoted(address.hex())
        if candidate_id not in self.candidates:
            raise UnknownCandidate(str(candidate_id))

    def mark_voted(self, address: bytes, candidate_id: int, block_index: int) -> Event:
        self.ensure_can_vote(address, candidate_id)
        self.records[address].has_voted = True
        self.candidates[candidate_id].vote_count += 1
        event = Event(kind=EventKind.CAST_VOTE, address=address,
                      payload_summary=f"candidate={candidate_id}",
                      block_index=block_index)
        self.events.append(event)
        return event

    def get_voter(self, address: bytes) -> VoterRecord | None:
        return self.records.get(address)

    # -- snapshots & replay -----------------------------------------------------------

    def state_dict(self) -> dict:
        """Canonical comparable representation of the full state."""
        return {
            "records": {
                rec.address.hex(): {
                    "personal": rec.personal,
                    "digest": rec.signed_embedding.embedding_digest.hex(),
                    "signature": falcon.encode_signature(
                        rec.signed_embedding.signature).hex(),
                    "signer_public": rec.signed_embedding.signer_public.hex(),
                    "template": rec.template.canonical_bytes().hex(),
                    "quality_norm": rec.template.quality_norm,
                    "is_registered": rec.is_registered,
                    "has_voted": rec.has_voted,
                }
                for rec in self.records.values()
            },
            "candidates": {
                cid: (rec.display_name, rec.vote_count)
                for cid, rec in self.candidates.items()
            },
            "events": [
                (e.kind.value, e.address.hex(), e.payload_summary, e.block_index)
                for e in self.events
            ],
        }

    def save_snapshot(self, path) -> None:
        out = bytearray()
        out += SNAPSHOT_MAGIC + struct.pack("<H", SNAPSHOT_VERSION)
        out += struct.pack("<B", {"Setup": 0, "Open": 1, "Closed": 2}[self.phase.value])
        out += struct.pack("<I", len(self.candidates))
        for rec in self.list_candidates():
            name = rec.display_name.encode("utf-8")
            out += struct.pack("<IH", rec.candidate_id, len(name)) + name
            out += struct.pack("<Q", rec.vote_count)
        out += struct.pack("<I", len(self.records))
        for addr in sorted(self.records):
            rec = self.records[addr]
            sig = falcon.encode_signature(rec.signed_embedding.signature)
            out += rec.address
            out += ledger.serialize_personal(rec.personal)
            out += rec.signed_embedding.embedding_digest
            out += struct.pack("<I", len(sig)) + sig
            pub = rec.signed_embedding.signer_public
            out += struct.pack("<I", len(pub)) + pub
            out += struct.pack("<d", rec.template.quality_norm)
            out += rec.template.canonical_bytes()
            out += struct.pack("<B", rec.has_voted)
        tmp = str(path) + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(bytes(out))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    @classmethod
    def load_snapshot(cls, path, profile: falcon.SignatureProfile) -> "Registry":
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:4] != SNAPSHOT_MAGIC:
            raise MalformedEncoding("not a registry snapshot")
        (version,) = struct.unpack_from("<H", data, 4)
        if version != SNAPSHOT_VERSION:
            raise MalformedEncoding(f"unsupported snapshot version {version}")
        reg = cls()
        off = 6
        phase_code = data[off]
        off += 1
        reg.phase = [ElectionPhase.SETUP, ElectionPhase.OPEN,
                     ElectionPhase.CLOSED][phase_code]
        (n_cand,) = struct.unpack_from("<I", data, off)
        off += 4
        for _ in range(n_cand):
            cid, name_len = struct.unpack_from("<IH", data, off)
            off += 6
            name = data[off:off + name_len].decode("utf-8")
            off += name_len
            (count,) = struct.unpack_from("<Q", data, off)
            off += 8
            reg.candidates[cid] = CandidateRecord(cid, name, count)
        (n_rec,) = struct.unpack_from("<I", data, off)
        off += 4
        personal_len = sum(2 + b for _, b in ledger.PERSONAL_BUDGETS)
        for _ in range(n_rec):
            address = data[off:off + 20]
            off += 20
            personal = ledger.deserialize_personal(data[off:off + personal_len])
            off += personal_len
            digest = data[off:off + 32]
            off += 32
            (sig_len,) = struct.unpack_from("<I", data, off)
            off += 4
            sig = falcon.decode_signature(data[off:off + sig_len], profile)
            off += sig_len
            (pub_len,) = struct.unpack_from("<I", data, off)
            off += 4
            pub = data[off:off + pub_len]
            off += pub_len
            (qnorm,) = struct.unpack_from("<d", data, off)
            off += 8
            values = np.frombuffer(data[off:off + 4 * EMBEDDING_DIM], dtype="<f4")
            off += 4 * EMBEDDING_DIM
            (voted,) = struct.unpack_from("<B", data, off)
            off += 1
            template = FaceEmbedding(values=values.astype(np.float64), quality_norm=qnorm)
            signed = SignedEmbedding(embedding_digest=digest, signature=sig,
                                     signer_public=pub)
            rec = VoterRecord(address=address, personal=personal,
                              signed_embedding=signed, template=template,
                              has_voted=bool(voted))
            reg.records[address] = rec
            reg.by_citizenship[personal.citizenship_number] = address
        return reg


def replay(store: ledger.LedgerStore, templates: TemplateStore,
           candidates: list[tuple[int, str]], authority_public: bytes,
           events_from_chain: bool = True) -> Registry:
    """Rebuild registry state from the chain plus the template sidecar.

    Every replayed template is hashed and checked against the on-chain digest,
    so sidecar tampering surfaces as MalformedEncoding here.
    """
    reg = Registry()
    for cid, name in candidates:
        reg.add_candidate(cid, name)
    reg.open_election()
    for block in store.state.blocks:
        payload = block.payload
        if isinstance(payload, ledger.RegistrationPayload):
            template = templates.get(payload.embedding_digest)
            if template is None:
                raise MalformedEncoding(
                    f"template missing for digest {payload.embedding_digest.hex()}")
            if template.digest() != payload.embedding_digest:
                raise MalformedEncoding("sidecar template does not match chain digest")
            signed = SignedEmbedding(
                embedding_digest=payload.embedding_digest,
                signature=falcon.decode_signature(payload.embedding_signature,
                                                  store.profile),
                signer_public=authority_public,
            )
            reg.register_voter(payload.personal, payload.voter_address, signed,
                               template, block.header.index)
        elif isinstance(payload, ledger.VotePayload):
            reg.mark_voted(payload.voter_address, payload.candidate_id,
                           block.header.index)
    return reg
