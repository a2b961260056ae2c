"""REST node: configuration, startup wiring, API routes, metrics endpoint.

Every 2xx mutation response is returned only after the block is fsynced (the
append path syncs before releasing the commit lock).  Errors cross the wire as
problem documents {code, message, detail} with stable machine-readable codes.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

import filelock
import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import biometric, falcon, ledger, protocol, registry
from .errors import (
    AlreadyRegistered,
    AlreadyVoted,
    DegenerateEmbedding,
    DuplicateCitizenship,
    ElectionClosed,
    IndexOutOfRange,
    InvalidSignedEmbedding,
    MalformedEncoding,
    NoMatch,
    NotRegistered,
    PqBallotError,
    SessionExpired,
    SessionInvalid,
    SignatureInvalid,
    SpoofDetected,
    StartupError,
    UnknownCandidate,
    UnknownVoter,
)
from .metrics import MetricsRegistry

ENV_PREFIX = "PQBALLOT_"


@dataclass(frozen=True)
class NodeConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    profile: str = "F512"
    theta: float = biometric.DEFAULT_THRESHOLD
    spoof_threshold: float = biometric.DEFAULT_SPOOF_THRESHOLD
    data_dir: str = "./pqballot-data"
    authority_key_path: str = ""  # defaults to <data_dir>/authority.key
    key_passphrase: str = "pqballot-dev"
    session_ttl_ms: int = protocol.SESSION_TTL_MS
    candidates: tuple[tuple[int, str], ...] = ((1, "Candidate One"), (2, "Candidate Two"))
    gas_base_cost: int = 21_000
    gas_per_byte_cost: int = 16
    gas_per_storage_slot_cost: int = 8_276
    gas_slot_size: int = 32
    gas_block_limit: int = 30_000_000

    def validated(self) -> "NodeConfig":
        if self.profile not in falcon.PROFILES:
            raise StartupError(f"config field 'profile' must be one of "
                               f"{sorted(falcon.PROFILES)}, got {self.profile!r}")
        if not 0.0 < self.theta < 1.0:
            raise StartupError(f"config field 'theta' must lie in (0, 1), got {self.theta}")
        if not 0.0 < self.spoof_threshold < 1.0:
            raise StartupError("config field 'spoof_threshold' must lie in (0, 1), "
                               f"got {self.spoof_threshold}")
        if not 0 < self.port < 65536:
            raise StartupError(f"config field 'port' must be a TCP port, got {self.port}")
        if self.session_ttl_ms <= 0:
            raise StartupError("config field 'session_ttl_ms' must be positive")
        for name in ("gas_base_cost", "gas_per_byte_cost",
                     "gas_per_storage_slot_cost", "gas_slot_size", "gas_block_limit"):
            if getattr(self, name) <= 0:
                raise StartupError(f"config field {name!r} must be positive")
        if not self.candidates:
            raise StartupError("config field 'candidates' must not be empty")
        return self

    def gas_model(self) -> ledger.GasModel:
        return ledger.GasModel(
            base_cost=self.gas_base_cost,
            per_byte_cost=self.gas_per_byte_cost,
            per_storage_slot_cost=self.gas_per_storage_slot_cost,
            slot_size=self.gas_slot_size,
            block_gas_limit=self.gas_block_limit,
        )


_CONFIG_FIELDS = {
    "host": str, "port": int, "profile": str, "theta": float,
    "spoof_threshold": float, "data_dir": str, "authority_key_path": str,
    "key_passphrase": str, "session_ttl_ms": int,
    "gas_base_cost": int, "gas_per_byte_cost": int,
    "gas_per_storage_slot_cost": int, "gas_slot_size": int,
    "gas_block_limit": int,
}


def load_config(path: str | None = None, env: dict | None = None,
                overrides: dict | None = None) -> NodeConfig:
    """File config, overridden by PQBALLOT_* environment, then CLI overrides."""
    values: dict = {}
    if path:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise StartupError(f"config file unreadable: {exc}") from exc
        for key, value in raw.items():
            if key == "candidates":
                values[key] = tuple((int(c["id"]), str(c["name"])) for c in value)
            elif key in _CONFIG_FIELDS:
                values[key] = _CONFIG_FIELDS[key](value)
            else:
                raise StartupError(f"config field {key!r} is not recognized")
    env = os.environ if env is None else env
    for key, caster in _CONFIG_FIELDS.items():
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            try:
                values[key] = caster(env[env_key])
            except ValueError as exc:
                raise StartupError(f"config field {key!r} from {env_key} "
                                   f"is malformed: {exc}") from exc
    if ENV_PREFIX + "CANDIDATES" in env:
        try:
            raw = json.loads(env[ENV_PREFIX + "CANDIDATES"])
            values["candidates"] = tuple((int(c["id"]), str(c["name"])) for c in raw)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise StartupError(f"config field 'candidates' from environment "
                               f"is malformed: {exc}") from exc
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return NodeConfig(**values).validated()


def build_node(config: NodeConfig,
               clock_ms=None) -> tuple[protocol.VotingNode, MetricsRegistry]:
    """Keys, ledger recovery + verification, registry replay; refuses to start
    on interior chain corruption or failed chain verification."""
    config = config.validated()
    profile = falcon.PROFILES[config.profile]
    try:
        os.makedirs(config.data_dir, exist_ok=True)
        probe = os.path.join(config.data_dir, ".writable")
        with open(probe, "w") as fh:
            fh.write("ok")
        os.remove(probe)
    except OSError as exc:
        raise StartupError(f"data directory not writable: {exc}") from exc

    key_path = config.authority_key_path or os.path.join(config.data_dir,
                                                         "authority.key")
    passphrase = config.key_passphrase.encode("utf-8")
    lock = filelock.FileLock(key_path + ".lock")
    with lock:
        if os.path.exists(key_path):
            try:
                authority = falcon.load_keypair(key_path, passphrase)
            except (MalformedEncoding, OSError) as exc:
                raise StartupError(f"authority key unloadable: {exc}") from exc
            if authority.profile is not profile:
                raise StartupError("authority key profile does not match config "
                                   f"field 'profile' ({config.profile})")
        else:
            authority = falcon.generate_keypair(profile)
            falcon.save_keypair(key_path, authority, passphrase)

    store = ledger.LedgerStore(
        os.path.join(config.data_dir, "chain.bin"),
        ledger.FalconBlockSigner(authority.secret),
        gas_model=config.gas_model(),
        clock=clock_ms or ledger.now_ms,
    )
    if store.recovery.bad_index is not None and store.recovery.truncated_bytes == 0:
        raise StartupError("ledger interior corruption at block "
                           f"{store.recovery.bad_index}")
    store.append_genesis_if_empty()
    report = ledger.verify_chain(store, authority.public)
    if not report.valid:
        raise StartupError(f"chain verification failed at block {report.first_bad_index}")

    templates = registry.TemplateStore(os.path.join(config.data_dir, "templates.bin"))
    voter_registry = registry.replay(store, templates, list(config.candidates),
                                     authority.public)

    metrics = MetricsRegistry()
    node = protocol.VotingNode(
        authority=authority,
        ledger_store=store,
        template_store=templates,
        voter_registry=voter_registry,
        theta=config.theta,
        spoof_threshold=config.spoof_threshold,
        session_ttl_ms=config.session_ttl_ms,
        clock_ms=clock_ms or ledger.now_ms,
        metrics=metrics,
    )
    return node, metrics


# -- wire models -----------------------------------------------------------------

class PersonalModel(BaseModel):
    full_name: str
    phone: str
    date_of_birth: str
    citizenship_number: str
    address: str


class RegisterRequest(BaseModel):
    personal: PersonalModel
    embedding: list[float]
    spoof_score: float = 0.0


class AuthenticateRequest(BaseModel):
    address: str
    embedding: list[float]
    spoof_score: float = 0.0


class VoteRequest(BaseModel):
    session_id: str
    candidate_id: int


_PROBLEMS: list[tuple[type, int, str]] = [
    (SpoofDetected, 401, "SPOOF_DETECTED"),
    (NoMatch, 401, "NO_MATCH"),
    (SignatureInvalid, 401, "SIGNATURE_INVALID"),
    (SessionInvalid, 401, "SESSION_INVALID"),
    (SessionExpired, 401, "SESSION_EXPIRED"),
    (UnknownVoter, 404, "UNKNOWN_VOTER"),
    (NotRegistered, 404, "NOT_REGISTERED"),
    (UnknownCandidate, 404, "UNKNOWN_CANDIDATE"),
    (IndexOutOfRange, 404, "INDEX_OUT_OF_RANGE"),
    (AlreadyRegistered, 409, "ALREADY_REGISTERED"),
    (DuplicateCitizenship, 409, "ALREADY_REGISTERED"),
    (AlreadyVoted, 409, "ALREADY_VOTED"),
    (ElectionClosed, 409, "ELECTION_CLOSED"),
    (DegenerateEmbedding, 400, "INVALID_EMBEDDING"),
    (InvalidSignedEmbedding, 400, "INVALID_SIGNED_EMBEDDING"),
    (MalformedEncoding, 400, "MALFORMED_ENCODING"),
]


def problem_code(exc: PqBallotError) -> tuple[int, str]:
    for klass, status, code in _PROBLEMS:
        if isinstance(exc, klass):
            return status, code
    return 500, "INTERNAL"


def _problem(exc: PqBallotError) -> JSONResponse:
    status, code = problem_code(exc)
    return JSONResponse(status_code=status, content={
        "code": code,
        "message": exc.__class__.__name__,
        "detail": str(exc),
    })


def _parse_embedding(values: list[float], spoof_score: float) -> biometric.CaptureSample:
    if len(values) != biometric.EMBEDDING_DIM:
        raise DegenerateEmbedding(
            f"embedding must have {biometric.EMBEDDING_DIM} values, got {len(values)}")
    embedding = biometric.normalize(np.asarray(values, dtype=np.float64))
    return biometric.CaptureSample(embedding=embedding, spoof_score=spoof_score)


def _block_json(node: protocol.VotingNode, index: int) -> dict:
    block = node.ledger.get_block(index)
    raw = node.ledger.get_raw(index)
    header = block.header
    out = {
        "index": header.index,
        "prev_hash": header.prev_hash.hex(),
        "timestamp_ms": header.timestamp_ms,
        "kind": header.kind.name.title(),
        "gas_used": header.gas_used,
        "gas_limit": node.ledger.gas_model.block_gas_limit,
        "size_bytes": len(raw),
        "hash": ledger.block_hash(raw).hex(),
        "authority_signature": block.authority_signature.hex(),
    }
    payload = block.payload
    if isinstance(payload, ledger.RegistrationPayload):
        out["payload"] = {
            "voter_address": payload.voter_address.hex(),
            "personal": {
                name: getattr(payload.personal, name)
                for name, _ in ledger.PERSONAL_BUDGETS
            },
            "embedding_digest": payload.embedding_digest.hex(),
            "embedding_signature": payload.embedding_signature.hex(),
        }
    elif isinstance(payload, ledger.VotePayload):
        out["payload"] = {
            "voter_address": payload.voter_address.hex(),
            "candidate_id": payload.candidate_id,
            "tx_id": payload.tx_id.hex(),
        }
    else:
        out["payload"] = None
    return out


def create_app(node: protocol.VotingNode, metrics: MetricsRegistry) -> FastAPI:
    app = FastAPI(title="pqballot node", docs_url=None, redoc_url=None)

    @app.exception_handler(PqBallotError)
    async def handle_problem(request: Request, exc: PqBallotError):
        return _problem(exc)

    @app.middleware("http")
    async def time_requests(request: Request, call_next):
        t0 = time.perf_counter()
        try:
            return await call_next(request)
        finally:
            metrics.observe("request_latency_ms",
                            (time.perf_counter() - t0) * 1000.0)

    @app.post("/api/register", status_code=201)
    def register(req: RegisterRequest):
        try:
            personal = ledger.PersonalInfo(**req.personal.model_dump())
        except ValueError as exc:
            return JSONResponse(status_code=400, content={
                "code": "INVALID_PERSONAL", "message": "ValueError", "detail": str(exc)})
        sample = _parse_embedding(req.embedding, req.spoof_score)
        receipt = node.enroll(personal, sample)
        return {
            "address": receipt.address.hex(),
            "block_index": receipt.block_index,
            "embedding_digest": receipt.embedding_digest.hex(),
        }

    @app.post("/api/authenticate")
    def authenticate(req: AuthenticateRequest):
        sample = _parse_embedding(req.embedding, req.spoof_score)
        try:
            address = bytes.fromhex(req.address)
        except ValueError as exc:
            raise MalformedEncoding("address must be hex") from exc
        session = node.authenticate(address, sample)
        return {
            "session_id": session.session_id.hex(),
            "similarity": session.similarity,
            "expires_at": session.expires_at_ms,
        }

    @app.post("/api/vote", status_code=201)
    def vote(req: VoteRequest):
        try:
            session_id = bytes.fromhex(req.session_id)
        except ValueError as exc:
            raise MalformedEncoding("session_id must be hex") from exc
        receipt = node.cast_vote(session_id, req.candidate_id)
        return {"tx_id": receipt.tx_id.hex(), "block_index": receipt.block_index}

    @app.get("/api/tally")
    def tally():
        return {str(cid): count for cid, count in sorted(node.results().items())}

    @app.get("/api/blocks/{index}")
    def get_block(index: int):
        return _block_json(node, index)

    @app.get("/api/chain/verify")
    def chain_verify():
        report = ledger.verify_chain(node.ledger, node.authority.public)
        return {"valid": report.valid, "first_bad_index": report.first_bad_index}

    @app.get("/api/events")
    def events():
        return [
            {
                "kind": e.kind.value,
                "address": e.address.hex(),
                "payload_summary": e.payload_summary,
                "block_index": e.block_index,
            }
            for e in list(node.registry.events)
        ]

    @app.get("/metrics")
    def scrape_metrics():
        return Response(content=metrics.render(),
                        media_type="text/plain; version=0.0.4; charset=utf-8")

    return app


def serve(config: NodeConfig) -> None:
    """Build the node and block serving HTTP until interrupted."""
    import uvicorn

    node, metrics = build_node(config)
    app = create_app(node, metrics)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    except SystemExit as exc:  # uvicorn wraps bind errors
        raise StartupError(f"server failed to start: {exc}") from exc
