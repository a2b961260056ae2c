"""A complete desk-scale election: enrollment with liveness gating, one-vote
enforcement, receipts with chain audits, ledger replay, and the metrics the
node would expose for scraping.

Run:  python demos/04_full_election.py
"""

import tempfile
from pathlib import Path

from pqballot import falcon, ledger, protocol, registry
from pqballot.biometric import SyntheticProvider
from pqballot.errors import AlreadyVoted, SpoofDetected
from pqballot.metrics import MetricsRegistry

workdir = Path(tempfile.mkdtemp())
print(f"data directory: {workdir}")

authority = falcon.generate_keypair(falcon.FALCON_512, seed=bytes(32))
store = ledger.LedgerStore(workdir / "chain.bin",
                           ledger.FalconBlockSigner(authority.secret))
store.append_genesis_if_empty()
reg = registry.Registry()
reg.add_candidate(1, "Asha Gurung")
reg.add_candidate(2, "Bikram Thapa")
reg.open_election()
metrics = MetricsRegistry()
node = protocol.VotingNode(authority=authority, ledger_store=store,
                           template_store=registry.TemplateStore(
                               workdir / "templates.bin"),
                           voter_registry=reg, metrics=metrics)

provider = SyntheticProvider(seed=b"election-demo")
voters = ["anita", "binod", "chandra", "devi", "eshan"]

print("\n== enrollment ==")
receipts = {}
for name in voters:
    personal = ledger.PersonalInfo(
        full_name=name.title(), phone="+977-555-0000",
        date_of_birth="1990-01-01", citizenship_number=f"NP-{name}",
        address="Pokhara")
    receipt = node.enroll(personal, provider.capture(name))
    receipts[name] = receipt
    print(f"{name:<9} -> address {receipt.address.hex()[:16]}... "
          f"block {receipt.block_index}")

print("\n== a spoofed capture is turned away before any matching ==")
try:
    node.enroll(ledger.PersonalInfo("Mallory", "1", "1990-01-01", "NP-m", "x"),
                provider.capture("mallory", spoof_score=0.97))
except SpoofDetected as exc:
    print(f"SpoofDetected: {exc}")

print("\n== voting ==")
ballots = {"anita": 1, "binod": 2, "chandra": 1, "devi": 1, "eshan": 2}
vote_receipts = {}
for name, candidate in ballots.items():
    probe = provider.capture(name, capture_nonce=b"at the booth")
    session = node.authenticate(receipts[name].address, probe)
    vote_receipts[name] = node.cast_vote(session.session_id, candidate)
    print(f"{name:<9} voted (similarity {session.similarity:.3f}, "
          f"tx {vote_receipts[name].tx_id.hex()[:16]}...)")

print("\n== the one-vote policy holds ==")
try:
    probe = provider.capture("anita", capture_nonce=b"again")
    session = node.authenticate(receipts["anita"].address, probe)
    node.cast_vote(session.session_id, 2)
except AlreadyVoted as exc:
    print(f"AlreadyVoted: {exc}")

print("\n== results and audit ==")
names = {c.candidate_id: c.display_name for c in node.registry.list_candidates()}
for cid, count in sorted(node.results().items()):
    print(f"{names[cid]:<14} {count} votes")
print(f"receipt audit for devi: {node.audit_receipt(vote_receipts['devi'])}")
print(f"chain verification: {ledger.verify_chain(store, authority.public)}")

print("\n== the registry is just a view of the chain ==")
replayed = node.rebuild_registry()
print(f"replay(ledger) == live registry: "
      f"{replayed.state_dict() == node.registry.state_dict()}")

print("\n== metrics a scraper would collect ==")
for line in metrics.render().splitlines():
    if not line.startswith("#") and ("_total" in line or "_count" in line.split(" ")[0]):
        print(f"  {line}")
