"""Append-only, hash-chained, authority-signed block store.

One block per transaction.  The canonical byte layout is fixed-width per block
kind so sizes are deterministic: with the F512 profile a nominal registration
block is exactly 2275 bytes and a vote block 768 bytes.

Layout (all integers little-endian unless noted):

    header   = index u64 | prev_hash 32B | timestamp_ms u64 | kind u8 | gas_used u64
    reg body = address 20B | 5 x (u16 len | field padded to budget) | digest 32B
               | embedding signature (sig_len) | zero padding
    vote body= address 20B | candidate_id u32 | tx_id 32B | zero padding
    block    = header | body | authority signature body (sig_len - 41)

The authority signs the SHA3-256 digest of header|body; its salt is derived
from the same bytes, so the stored signature drops the salt and header byte.
The chain hash covers the full block bytes, signature included.  The ledger
file is a sequence of [u32 big-endian frame length | block bytes], fsynced per
append; recovery truncates a torn tail frame and refuses interior corruption.
"""

from __future__ import annotations

import hashlib
import math
import os
import struct
import threading
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Iterable

from . import falcon
from .falcon.rng import ShakeStream
from .errors import (
    DuplicateCitizenship,
    DuplicateTxId,
    IndexOutOfRange,
    MalformedEncoding,
    PersistenceFailure,
)

HEADER_LEN = 57
ADDRESS_LEN = 20
DIGEST_LEN = 32
TX_ID_LEN = 32

# (field name, byte budget) in canonical order.
PERSONAL_BUDGETS = (
    ("full_name", 64),
    ("phone", 16),
    ("date_of_birth", 10),
    ("citizenship_number", 24),
    ("address", 128),
)
_PERSONAL_BLOCK_LEN = sum(2 + budget for _, budget in PERSONAL_BUDGETS)  # 252

REGISTRATION_PAD = 623
VOTE_PAD = 30

_HASH_TAG = b"pqballot:v1:block"
_SALT_TAG = b"pqballot:v1:block-salt"


class BlockKind(IntEnum):
    GENESIS = 0
    REGISTRATION = 1
    VOTE = 2


@dataclass(frozen=True)
class PersonalInfo:
    full_name: str
    phone: str
    date_of_birth: str
    citizenship_number: str
    address: str

    def __post_init__(self):
        for name, budget in PERSONAL_BUDGETS:
            raw = getattr(self, name).encode("utf-8")
            if not raw:
                raise ValueError(f"personal field {name!r} must be nonempty")
            if len(raw) > budget:
                raise ValueError(f"personal field {name!r} exceeds {budget} bytes")


@dataclass(frozen=True)
class RegistrationPayload:
    voter_address: bytes
    personal: PersonalInfo
    embedding_digest: bytes
    embedding_signature: bytes  # full fixed-width signature encoding


@dataclass(frozen=True)
class VotePayload:
    voter_address: bytes
    candidate_id: int
    tx_id: bytes


@dataclass(frozen=True)
class BlockHeader:
    index: int
    prev_hash: bytes
    timestamp_ms: int
    kind: BlockKind
    gas_used: int


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    payload: RegistrationPayload | VotePayload | None
    authority_signature: bytes  # salt-less signature body


@dataclass(frozen=True)
class ChainReport:
    valid: bool
    first_bad_index: int | None


# -- gas model ----------------------------------------------------------------

# Bytes the contract analog persists beyond the payload itself: the
# registration flow stores the 512 x float32 template alongside the record.
STORAGE_OVERHEAD = {
    BlockKind.GENESIS: 0,
    BlockKind.REGISTRATION: 2048,
    BlockKind.VOTE: 0,
}


@dataclass(frozen=True)
class GasModel:
    base_cost: int = 21_000
    per_byte_cost: int = 16
    per_storage_slot_cost: int = 8_276  # see calibrate_slot_cost
    slot_size: int = 32
    block_gas_limit: int = 30_000_000

    def __post_init__(self):
        for name in ("base_cost", "per_byte_cost", "per_storage_slot_cost",
                     "slot_size", "block_gas_limit"):
            if getattr(self, name) <= 0:
                raise ValueError(f"gas model field {name} must be positive")


def compute_gas(model: GasModel, kind: BlockKind, payload_bytes: bytes) -> int:
    persistent = len(payload_bytes) + STORAGE_OVERHEAD[kind]
    slots = math.ceil(persistent / model.slot_size)
    return (model.base_cost
            + model.per_byte_cost * len(payload_bytes)
            + model.per_storage_slot_cost * slots)


def gas_fraction(model: GasModel, gas_used: int) -> float:
    return gas_used / model.block_gas_limit


def calibrate_slot_cost(model: GasModel, payload_len: int, kind: BlockKind,
                        target_fraction: float) -> int:
    """Solve per_storage_slot_cost so this payload lands on target_fraction."""
    slots = math.ceil((payload_len + STORAGE_OVERHEAD[kind]) / model.slot_size)
    target_gas = target_fraction * model.block_gas_limit
    return round((target_gas - model.base_cost - model.per_byte_cost * payload_len) / slots)


# -- canonical serialization -----------------------------------------------------

def _sig_body_len(profile: falcon.SignatureProfile) -> int:
    return profile.sig_len - 41  # header byte and salt are derived, not stored


def payload_len(kind: BlockKind, profile: falcon.SignatureProfile) -> int:
    if kind == BlockKind.GENESIS:
        return 0
    if kind == BlockKind.REGISTRATION:
        return (ADDRESS_LEN + _PERSONAL_BLOCK_LEN + DIGEST_LEN + profile.sig_len
                + REGISTRATION_PAD)
    return ADDRESS_LEN + 4 + TX_ID_LEN + VOTE_PAD


def block_size(kind: BlockKind, profile: falcon.SignatureProfile) -> int:
    return HEADER_LEN + payload_len(kind, profile) + _sig_body_len(profile)


def serialize_personal(personal: PersonalInfo) -> bytes:
    out = bytearray()
    for name, budget in PERSONAL_BUDGETS:
        raw = getattr(personal, name).encode("utf-8")
        out += struct.pack("<H", len(raw))
        out += raw.ljust(budget, b"\x00")
    return bytes(out)


def deserialize_personal(data: bytes) -> PersonalInfo:
    fields = {}
    off = 0
    for name, budget in PERSONAL_BUDGETS:
        (length,) = struct.unpack_from("<H", data, off)
        off += 2
        if length == 0 or length > budget:
            raise MalformedEncoding(f"personal field {name!r} has invalid length")
        raw = data[off:off + budget]
        off += budget
        if any(raw[length:]):
            raise MalformedEncoding(f"personal field {name!r} has nonzero padding")
        try:
            fields[name] = raw[:length].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedEncoding(f"personal field {name!r} is not UTF-8") from exc
    return PersonalInfo(**fields)


def serialize_payload(payload, kind: BlockKind, profile: falcon.SignatureProfile) -> bytes:
    if kind == BlockKind.GENESIS:
        return b""
    if kind == BlockKind.REGISTRATION:
        if len(payload.embedding_signature) != profile.sig_len:
            raise ValueError("embedding signature has wrong length")
        body = (payload.voter_address + serialize_personal(payload.personal)
                + payload.embedding_digest + payload.embedding_signature)
        return body + bytes(REGISTRATION_PAD)
    body = (payload.voter_address + struct.pack("<I", payload.candidate_id)
            + payload.tx_id)
    return body + bytes(VOTE_PAD)


def deserialize_payload(data: bytes, kind: BlockKind, profile: falcon.SignatureProfile):
    if len(data) != payload_len(kind, profile):
        raise MalformedEncoding("payload has wrong length for its kind")
    if kind == BlockKind.GENESIS:
        return None
    if kind == BlockKind.REGISTRATION:
        off = 0
        address = data[off:off + ADDRESS_LEN]
        off += ADDRESS_LEN
        personal = deserialize_personal(data[off:off + _PERSONAL_BLOCK_LEN])
        off += _PERSONAL_BLOCK_LEN
        digest = data[off:off + DIGEST_LEN]
        off += DIGEST_LEN
        signature = data[off:off + profile.sig_len]
        off += profile.sig_len
        if any(data[off:]):
            raise MalformedEncoding("registration padding must be zero")
        return RegistrationPayload(voter_address=address, personal=personal,
                                   embedding_digest=digest,
                                   embedding_signature=signature)
    off = 0
    address = data[off:off + ADDRESS_LEN]
    off += ADDRESS_LEN
    (candidate_id,) = struct.unpack_from("<I", data, off)
    off += 4
    tx_id = data[off:off + TX_ID_LEN]
    off += TX_ID_LEN
    if any(data[off:]):
        raise MalformedEncoding("vote padding must be zero")
    return VotePayload(voter_address=address, candidate_id=candidate_id, tx_id=tx_id)


def _serialize_header(header: BlockHeader) -> bytes:
    return (struct.pack("<Q", header.index) + header.prev_hash
            + struct.pack("<Q", header.timestamp_ms)
            + bytes([header.kind])
            + struct.pack("<Q", header.gas_used))


def _deserialize_header(data: bytes) -> BlockHeader:
    index, = struct.unpack_from("<Q", data, 0)
    prev_hash = data[8:40]
    timestamp_ms, = struct.unpack_from("<Q", data, 40)
    kind_byte = data[48]
    gas_used, = struct.unpack_from("<Q", data, 49)
    try:
        kind = BlockKind(kind_byte)
    except ValueError as exc:
        raise MalformedEncoding(f"unknown block kind {kind_byte}") from exc
    return BlockHeader(index=index, prev_hash=prev_hash, timestamp_ms=timestamp_ms,
                       kind=kind, gas_used=gas_used)


def serialize_block(block: Block, profile: falcon.SignatureProfile) -> bytes:
    body = serialize_payload(block.payload, block.header.kind, profile)
    sig = block.authority_signature
    if len(sig) != _sig_body_len(profile):
        raise ValueError("authority signature body has wrong length")
    return _serialize_header(block.header) + body + sig


def deserialize_block(data: bytes, profile: falcon.SignatureProfile) -> Block:
    if len(data) < HEADER_LEN:
        raise MalformedEncoding("block shorter than its header")
    header = _deserialize_header(data[:HEADER_LEN])
    if len(data) != block_size(header.kind, profile):
        raise MalformedEncoding("block has wrong length for its kind")
    body_len = payload_len(header.kind, profile)
    payload = deserialize_payload(data[HEADER_LEN:HEADER_LEN + body_len],
                                  header.kind, profile)
    sig = data[HEADER_LEN + body_len:]
    return Block(header=header, payload=payload, authority_signature=sig)


def block_hash(serialized: bytes) -> bytes:
    return hashlib.sha3_256(_HASH_TAG + serialized).digest()


def signing_digest(header: BlockHeader, payload_bytes: bytes) -> bytes:
    return hashlib.sha3_256(_HASH_TAG + _serialize_header(header) + payload_bytes).digest()


def derive_block_salt(header: BlockHeader, payload_bytes: bytes,
                      profile: falcon.SignatureProfile) -> bytes:
    material = _SALT_TAG + _serialize_header(header) + payload_bytes
    return hashlib.shake_256(material).digest(profile.salt_len)


# -- authority signers -------------------------------------------------------------

class BlockSigner:
    """Signs block digests; pluggable so stress tests can avoid lattice cost."""

    profile: falcon.SignatureProfile

    def sign_digest(self, digest: bytes, salt: bytes) -> bytes:
        raise NotImplementedError


class FalconBlockSigner(BlockSigner):
    """Derandomized: the Gaussian sampler is seeded from the secret key and
    the signed material, so identical chains re-sign to identical bytes
    (fixed clock implies byte-reproducible chains)."""

    def __init__(self, secret: falcon.SecretKey):
        self.profile = secret.profile
        self._secret = secret
        self._seed_base = hashlib.sha3_256(b"pqballot:v1:block-signer"
                                           + secret.to_bytes()).digest()

    def sign_digest(self, digest: bytes, salt: bytes) -> bytes:
        rng = ShakeStream(self._seed_base + digest + salt)
        sig = falcon.sign_with_salt(self._secret, digest, salt, randombytes=rng)
        return falcon.encode_signature(sig)[41:]


def verify_block_signature(public: bytes, block: Block,
                           profile: falcon.SignatureProfile) -> bool:
    payload_bytes = serialize_payload(block.payload, block.header.kind, profile)
    digest = signing_digest(block.header, payload_bytes)
    salt = derive_block_salt(block.header, payload_bytes, profile)
    encoded = bytes([0x30 + profile.logn]) + salt + block.authority_signature
    try:
        sig = falcon.decode_signature(encoded, profile)
        return falcon.verify(public, digest, sig)
    except MalformedEncoding:
        return False


# -- chain state --------------------------------------------------------------------

@dataclass
class RecoveryReport:
    truncated_bytes: int = 0
    bad_index: int | None = None


def parse_frames(data: bytes, profile: falcon.SignatureProfile
                 ) -> tuple[list[Block], list[bytes], RecoveryReport, int]:
    """Parse a ledger file image into blocks.

    Returns (blocks, raw frames, report, offset after last good frame).  An
    incomplete frame at the end is reported as truncation; an undecodable
    complete frame is interior corruption and parsing stops there.
    """
    report = RecoveryReport()
    blocks: list[Block] = []
    raws: list[bytes] = []
    off = 0
    good_end = 0
    index = 0
    while off < len(data):
        if off + 4 > len(data):
            report.truncated_bytes = len(data) - off
            report.bad_index = index
            break
        (length,) = struct.unpack_from(">I", data, off)
        if off + 4 + length > len(data):
            report.truncated_bytes = len(data) - off
            report.bad_index = index
            break
        frame = data[off + 4:off + 4 + length]
        try:
            block = deserialize_block(frame, profile)
        except MalformedEncoding:
            report.bad_index = index
            break
        blocks.append(block)
        raws.append(frame)
        off += 4 + length
        good_end = off
        index += 1
    return blocks, raws, report, good_end


class ChainState:
    """In-memory chain with uniqueness indexes; persistence lives in LedgerStore."""

    def __init__(self, profile: falcon.SignatureProfile):
        self.profile = profile
        self.blocks: list[Block] = []
        self.raw: list[bytes] = []
        self.citizenship_index: set[str] = set()
        self.tx_index: set[bytes] = set()

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def tip_hash(self) -> bytes:
        return block_hash(self.raw[-1]) if self.raw else bytes(32)

    def admit(self, block: Block, serialized: bytes) -> None:
        payload = block.payload
        if isinstance(payload, RegistrationPayload):
            self.citizenship_index.add(payload.personal.citizenship_number)
        elif isinstance(payload, VotePayload):
            self.tx_index.add(payload.tx_id)
        self.blocks.append(block)
        self.raw.append(serialized)

    def check_unique(self, payload) -> None:
        if isinstance(payload, RegistrationPayload):
            if payload.personal.citizenship_number in self.citizenship_index:
                raise DuplicateCitizenship(payload.personal.citizenship_number)
        elif isinstance(payload, VotePayload):
            if payload.tx_id in self.tx_index:
                raise DuplicateTxId(payload.tx_id.hex())


def now_ms() -> int:
    import time

    return int(time.time() * 1000)


class LedgerStore:
    """File-backed chain with a single-writer append lock.

    Readers may snapshot `state.blocks` without the lock; block lists only
    grow and blocks are immutable.
    """

    def __init__(self, path, signer: BlockSigner,
                 gas_model: GasModel | None = None,
                 clock: Callable[[], int] = now_ms):
        self.path = str(path)
        self.signer = signer
        self.profile = signer.profile
        self.gas_model = gas_model or GasModel()
        self.clock = clock
        self.state = ChainState(self.profile)
        self.lock = threading.RLock()
        self.recovery = self._load()

    # -- persistence ------------------------------------------------------------

    def _load(self) -> RecoveryReport:
        if not os.path.exists(self.path):
            return RecoveryReport()
        with open(self.path, "rb") as fh:
            data = fh.read()
        blocks, raws, report, good_end = parse_frames(data, self.profile)
        if report.bad_index is not None and report.truncated_bytes == 0:
            return report  # interior corruption: do not admit or truncate
        for block, raw in zip(blocks, raws):
            self.state.admit(block, raw)
        if report.truncated_bytes:
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)
                fh.flush()
                os.fsync(fh.fileno())
        return report

    def _persist(self, serialized: bytes) -> None:
        try:
            with open(self.path, "ab") as fh:
                fh.write(struct.pack(">I", len(serialized)) + serialized)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise PersistenceFailure(str(exc)) from exc

    # -- append -------------------------------------------------------------------

    def append_block(self, kind: BlockKind, payload,
                     timestamp_ms: int | None = None) -> Block:
        with self.lock:
            self.state.check_unique(payload)
            payload_bytes = serialize_payload(payload, kind, self.profile)
            header = BlockHeader(
                index=len(self.state),
                prev_hash=self.state.tip_hash,
                timestamp_ms=self.clock() if timestamp_ms is None else timestamp_ms,
                kind=kind,
                gas_used=compute_gas(self.gas_model, kind, payload_bytes),
            )
            digest = signing_digest(header, payload_bytes)
            salt = derive_block_salt(header, payload_bytes, self.profile)
            sig_body = self.signer.sign_digest(digest, salt)
            block = Block(header=header, payload=payload, authority_signature=sig_body)
            serialized = serialize_block(block, self.profile)
            self._persist(serialized)
            self.state.admit(block, serialized)
            return block

    def append_genesis_if_empty(self) -> None:
        with self.lock:
            if not self.state.blocks:
                self.append_block(BlockKind.GENESIS, None)

    # -- reads ---------------------------------------------------------------------

    def get_block(self, index: int) -> Block:
        blocks = self.state.blocks
        if not 0 <= index < len(blocks):
            raise IndexOutOfRange(f"chain has {len(blocks)} blocks")
        return blocks[index]

    def get_raw(self, index: int) -> bytes:
        raw = self.state.raw
        if not 0 <= index < len(raw):
            raise IndexOutOfRange(f"chain has {len(raw)} blocks")
        return raw[index]

    def tally(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for block in list(self.state.blocks):
            if isinstance(block.payload, VotePayload):
                cid = block.payload.candidate_id
                counts[cid] = counts.get(cid, 0) + 1
        return counts


def verify_chain_blocks(blocks: Iterable[Block], raws: Iterable[bytes],
                        authority_public: bytes,
                        profile: falcon.SignatureProfile,
                        gas_model: GasModel | None = None) -> ChainReport:
    prev = bytes(32)
    model = gas_model or GasModel()
    for i, (block, raw) in enumerate(zip(blocks, raws)):
        header = block.header
        payload_bytes = serialize_payload(block.payload, header.kind, profile)
        bad = (
            header.index != i
            or header.prev_hash != prev
            or header.gas_used != compute_gas(model, header.kind, payload_bytes)
            or not verify_block_signature(authority_public, block, profile)
        )
        if bad:
            return ChainReport(valid=False, first_bad_index=i)
        prev = block_hash(raw)
    return ChainReport(valid=True, first_bad_index=None)


def verify_chain(store: LedgerStore, authority_public: bytes) -> ChainReport:
    """Verify the prefix visible at call time; safe alongside appends."""
    with store.lock:
        blocks = list(store.state.blocks)
        raws = list(store.state.raw)
    if store.recovery.bad_index is not None and store.recovery.truncated_bytes == 0:
        return ChainReport(valid=False, first_bad_index=store.recovery.bad_index)
    return verify_chain_blocks(blocks, raws, authority_public, store.profile,
                               store.gas_model)
