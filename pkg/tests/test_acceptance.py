"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured numbers.  Stated runtime budgets are asserted, not aspirational.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.
"""

import random
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
import uvicorn

from pqballot import bench, falcon, ledger, registry, service
from pqballot.biometric import CaptureSample, SyntheticProvider, normalize
from pqballot.errors import (
    AlreadyVoted,
    MalformedEncoding,
    SessionInvalid,
    SpoofDetected,
)
from tests.conftest import SEED_A
from tests.exposition import parse_exposition
from tests.util import build_node, enroll_subject, personal_record

pytestmark = pytest.mark.acceptance


def report(name: str, detail: str) -> None:
    print(f"\nACCEPTANCE {name}: PASS ({detail})")


# -- live node + bench session (shared by the latency criteria) -----------------


@pytest.fixture(scope="module")
def live_node(tmp_path_factory, keypair512):
    data_dir = tmp_path_factory.mktemp("live-node")
    falcon.save_keypair(data_dir / "authority.key", keypair512, b"acceptance")
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    cfg = service.NodeConfig(data_dir=str(data_dir), port=port,
                             key_passphrase="acceptance")
    node, metrics = service.build_node(cfg)
    app = service.create_app(node, metrics)
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                           log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.05)
    yield {"url": f"http://127.0.0.1:{port}", "node": node, "metrics": metrics}
    server.should_exit = True
    thread.join(timeout=10)


@pytest.fixture(scope="module")
def load_report(live_node):
    t0 = time.time()
    rep = bench.run_load(live_node["url"], levels=(1, 10, 20, 40, 80),
                         ops_per_level=12, seed=b"acceptance-load")
    return rep, time.time() - t0


# -- criteria -------------------------------------------------------------------


def test_signature_roundtrip_and_unforgeability(keypair512):
    t0 = time.time()
    rng = np.random.default_rng(101)
    failures = 0
    for i in range(1000):
        msg = rng.bytes(32)
        sig = falcon.sign(keypair512.secret, msg)
        failures += not falcon.verify(keypair512.public, msg, sig)
    assert failures == 0

    false_accepts = 0
    for i in range(100_000):
        blob = rng.bytes(666)
        try:
            sig = falcon.decode_signature(blob, falcon.FALCON_512)
        except MalformedEncoding:
            continue
        false_accepts += falcon.verify(keypair512.public, b"forged", sig)
    assert false_accepts == 0
    elapsed = time.time() - t0
    assert elapsed < 120, f"runtime budget exceeded: {elapsed:.1f}s"
    report("signature-roundtrip",
           f"1000/1000 verified, 0/100000 forgeries accepted, {elapsed:.1f}s")


def test_sign_verify_asymmetry_at_20(load_report):
    rep, _ = load_report
    row = {r.concurrency: r for r in rep.rows}[20]
    assert row.avg_verify_ms <= row.avg_sign_ms / 10, (
        f"verify {row.avg_verify_ms:.3f}ms vs sign {row.avg_sign_ms:.3f}ms")
    report("sign-verify-asymmetry",
           f"at 20 concurrent: sign {row.avg_sign_ms:.1f}ms, "
           f"verify {row.avg_verify_ms:.3f}ms, "
           f"ratio {row.avg_sign_ms / row.avg_verify_ms:.0f}x")


def test_load_escalation_shape(load_report):
    rep, elapsed = load_report
    rows = sorted(rep.rows, key=lambda r: r.concurrency)
    by_level = {r.concurrency: r for r in rows}
    assert by_level[80].avg_sign_ms > by_level[20].avg_sign_ms
    for prev, cur in zip(rows, rows[1:]):
        assert cur.avg_request_ms >= prev.avg_request_ms * 0.9, (
            f"latency fell between {prev.concurrency} and {cur.concurrency}")
    assert bench.check_properties(rep) == []
    assert elapsed < 300, f"runtime budget exceeded: {elapsed:.1f}s"
    shape = " -> ".join(f"{r.avg_sign_ms:.0f}" for r in rows)
    report("load-escalation",
           f"sign ms across levels 1/10/20/40/80: {shape}; wall {elapsed:.0f}s")


def test_block_sizes_exact(load_report):
    rep, _ = load_report
    assert rep.registration_bytes == 2275
    assert rep.vote_bytes == 768
    ratio = rep.registration_bytes / rep.vote_bytes
    assert 2.4 <= ratio <= 3.6
    # layout-derived sizes, independent of the live measurement
    assert ledger.block_size(ledger.BlockKind.REGISTRATION, falcon.FALCON_512) == 2275
    assert ledger.block_size(ledger.BlockKind.VOTE, falcon.FALCON_512) == 768
    report("block-sizes", f"registration=2275B vote=768B ratio={ratio:.2f}")


def test_gas_fractions(load_report):
    rep, _ = load_report
    assert 0.028 <= rep.registration_gas_fraction <= 0.039, rep.registration_gas_fraction
    assert 0.0010 <= rep.vote_gas_fraction <= 0.0025, rep.vote_gas_fraction
    report("gas-fractions",
           f"registration {100 * rep.registration_gas_fraction:.2f}%, "
           f"vote {100 * rep.vote_gas_fraction:.3f}% of 30M")


def test_tamper_detection_exhaustive(tmp_path, keypair512):
    t0 = time.time()
    store = ledger.LedgerStore(tmp_path / "sweep.bin",
                               ledger.FalconBlockSigner(keypair512.secret))
    store.append_genesis_if_empty()
    provider = SyntheticProvider(seed=b"sweep")
    for i in range(4):
        emb = provider.identity(f"sw{i}")
        digest = emb.digest()
        sig = falcon.encode_signature(falcon.sign(keypair512.secret, digest))
        store.append_block(ledger.BlockKind.REGISTRATION, ledger.RegistrationPayload(
            voter_address=bytes([i]) * 20, personal=personal_record(f"sw{i}"),
            embedding_digest=digest, embedding_signature=sig))
    for i in range(5):
        store.append_block(ledger.BlockKind.VOTE, ledger.VotePayload(
            voter_address=bytes([i]) * 20, candidate_id=1 + i % 2,
            tx_id=bytes([i + 1]) * 32))
    assert len(store.state) == 10

    data = (tmp_path / "sweep.bin").read_bytes()
    spans = []
    off = 0
    for i, raw in enumerate(store.state.raw):
        spans.append((off, off + 4 + len(raw), i))
        off += 4 + len(raw)
    assert off == len(data)

    missed = []
    wrong_index = []
    checked = 0
    # Two masks per position: one flips low bits only, one sets the high bit,
    # covering both numeric-field and text-encoding corruption classes.
    for mask in (0x5A, 0x80):
        for pos in range(len(data)):
            mutated = bytearray(data)
            mutated[pos] ^= mask
            checked += 1
            blocks, raws, parse_report, _ = ledger.parse_frames(bytes(mutated),
                                                                store.profile)
            if parse_report.bad_index is not None:
                found = parse_report.bad_index
            else:
                check = ledger.verify_chain_blocks(blocks, raws, keypair512.public,
                                                   store.profile, store.gas_model)
                found = None if check.valid else check.first_bad_index
            expected = next(i for s, e, i in spans if s <= pos < e)
            if found is None:
                missed.append((pos, mask))
            elif found != expected:
                wrong_index.append((pos, mask, found, expected))
    elapsed = time.time() - t0
    assert not missed, f"{len(missed)} undetected mutations, first at {missed[:5]}"
    assert not wrong_index, f"wrong first_bad_index: {wrong_index[:5]}"
    assert elapsed < 180, f"runtime budget exceeded: {elapsed:.1f}s"
    report("tamper-detection",
           f"{checked} mutations over {len(data)} byte positions detected with "
           f"correct first_bad_index, {elapsed:.0f}s")


def test_one_vote_under_concurrency(tmp_path, keypair512):
    t0 = time.time()
    node = build_node(tmp_path, keypair512)
    provider = SyntheticProvider(seed=b"one-vote")
    voters = []
    for i in range(50):
        receipt, _ = enroll_subject(node, provider, f"ov{i}")
        template = node.registry.get_voter(receipt.address).template
        voters.append((receipt.address, template))

    rng = random.Random(7)
    successes = [0] * len(voters)
    errors = []
    lock = threading.Lock()

    def attempt(vidx: int, seed: int):
        address, template = voters[vidx]
        gen = np.random.default_rng(seed)
        probe = CaptureSample(
            embedding=normalize(template.values
                                + 0.03 * gen.standard_normal(512)),
            spoof_score=0.0)
        try:
            session = node.authenticate(address, probe)
            node.cast_vote(session.session_id, rng.choice([1, 2]))
            with lock:
                successes[vidx] += 1
        except (AlreadyVoted, SessionInvalid):
            pass
        except Exception as exc:  # anything else is a real failure
            with lock:
                errors.append(repr(exc))

    schedules = 0
    with ThreadPoolExecutor(max_workers=16) as pool:
        while schedules < 1000:
            batch = [(rng.randrange(len(voters)), schedules * 31 + k)
                     for k in range(rng.randint(2, 6))]
            futures = [pool.submit(attempt, v, s) for v, s in batch]
            for fut in futures:
                fut.result()
            schedules += 1

    assert not errors, errors[:3]
    assert all(s <= 1 for s in successes), "a voter voted twice"
    per_address: dict[bytes, int] = {}
    for block in node.ledger.state.blocks:
        if isinstance(block.payload, ledger.VotePayload):
            per_address[block.payload.voter_address] = per_address.get(
                block.payload.voter_address, 0) + 1
    assert all(c == 1 for c in per_address.values()), "duplicate vote block"
    tally_total = sum(node.results().values())
    has_voted = sum(1 for r in node.registry.records.values() if r.has_voted)
    assert tally_total == has_voted == len(per_address) == sum(successes)
    report("one-vote",
           f"{schedules} schedules over 50 voters, {sum(successes)} single "
           f"votes, 0 duplicates, {time.time() - t0:.0f}s")


def test_matching_quality():
    theta = 0.4
    gen = np.random.default_rng(424242)
    templates = gen.standard_normal((100, 512))
    templates /= np.linalg.norm(templates, axis=1, keepdims=True)
    frr_hits = 0
    for t in templates:
        probes = t + 0.08 * gen.standard_normal((100, 512))
        probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        frr_hits += int(np.sum(probes @ t < theta))
    frr = frr_hits / 10_000
    a = gen.standard_normal((10_000, 512))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    b = gen.standard_normal((10_000, 512))
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    far = float(np.mean(np.sum(a * b, axis=1) >= theta))
    assert far < 0.001, f"FAR {far:.4%}"
    assert frr < 0.02, f"FRR {frr:.4%}"
    report("matching-quality",
           f"theta=0.4: FAR {far:.4%} (<0.1%), FRR {frr:.3%} (<2%) "
           f"over 10^4+10^4 trials")


def test_replay_equivalence_with_crashes(tmp_path, keypair512):
    node = build_node(tmp_path, keypair512)
    provider = SyntheticProvider(seed=b"replay-acc")
    receipts = {}
    for i in range(6):
        receipt, _ = enroll_subject(node, provider, f"rp{i}")
        receipts[i] = receipt
    for i in (0, 2, 4):
        gen = np.random.default_rng(900 + i)
        template = node.registry.get_voter(receipts[i].address).template
        probe = CaptureSample(embedding=normalize(
            template.values + 0.03 * gen.standard_normal(512)), spoof_score=0.0)
        session = node.authenticate(receipts[i].address, probe)
        node.cast_vote(session.session_id, 1 + i % 2)

    # spoofed and duplicate attempts leave no partial state
    with pytest.raises(SpoofDetected):
        enroll_subject(node, provider, "rp-spoof", spoof_score=0.99)

    # injected crash between chain append and registry apply
    original = node.registry.register_voter
    node.registry.register_voter = lambda *a, **k: (_ for _ in ()).throw(
        RuntimeError("mid-commit crash"))
    with pytest.raises(RuntimeError):
        enroll_subject(node, provider, "rp-crash")
    node.registry.register_voter = original

    # live registry missed the crashed block; replay must include it
    replayed = registry.replay(
        node.ledger, node.templates,
        [(c.candidate_id, c.display_name) for c in node.registry.list_candidates()],
        keypair512.public)
    assert len(replayed.records) == len(node.registry.records) + 1

    # a node restarted from the same directory equals the replayed state
    store2 = ledger.LedgerStore(node.ledger.path,
                                ledger.FalconBlockSigner(keypair512.secret))
    templates2 = registry.TemplateStore(node.templates.path)
    replayed2 = registry.replay(
        store2, templates2,
        [(c.candidate_id, c.display_name) for c in node.registry.list_candidates()],
        keypair512.public)
    assert replayed2.state_dict() == replayed.state_dict()
    report("replay-equivalence",
           f"{len(replayed.records)} records, {len(replayed.events)} events "
           f"identical across live replay and restart, crash block healed")


def test_metrics_ground_truth(tmp_path, keypair512):
    from fastapi.testclient import TestClient

    from pqballot.metrics import MetricsRegistry

    node = build_node(tmp_path, keypair512, metrics=MetricsRegistry())
    app = service.create_app(node, node.metrics)
    client = TestClient(app, raise_server_exceptions=False)
    provider = SyntheticProvider(seed=b"metrics-acc")

    registrations = 0
    votes = 0
    bodies = {}
    addresses = {}
    for i in range(7):
        sample = provider.capture(f"m{i}")
        body = {
            "personal": {
                "full_name": f"M {i}", "phone": "1", "date_of_birth": "1990-01-01",
                "citizenship_number": f"M-{i}", "address": "addr",
            },
            "embedding": [float(x) for x in sample.embedding.values],
            "spoof_score": 0.0,
        }
        resp = client.post("/api/register", json=body)
        assert resp.status_code == 201
        registrations += 1
        bodies[i] = body
        addresses[i] = resp.json()["address"]
        if i == 3:  # duplicate and spoof attempts must NOT move the sign count
            assert client.post("/api/register", json=body).status_code == 409
            assert client.post("/api/register", json={
                **body, "spoof_score": 0.99}).status_code == 401
    for i in (0, 1, 2):
        auth = client.post("/api/authenticate", json={
            "address": addresses[i], "embedding": bodies[i]["embedding"],
            "spoof_score": 0.0})
        assert auth.status_code == 200
        assert client.post("/api/vote", json={
            "session_id": auth.json()["session_id"], "candidate_id": 1,
        }).status_code == 201
        votes += 1

    text = client.get("/metrics").text
    families = parse_exposition(text)  # grammar oracle
    votes_total = families["votes_total"]["samples"][0][2]
    assert votes_total == votes, (votes_total, votes)
    sign_count = [v for name, _, v in families["sign_latency_ms"]["samples"]
                  if name == "sign_latency_ms_count"][0]
    assert sign_count == registrations, (sign_count, registrations)
    report("metrics",
           f"exposition parses; votes_total={votes} and "
           f"sign_latency count={registrations} match ground truth exactly")
