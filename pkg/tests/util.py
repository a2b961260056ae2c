"""Test helpers: node builders, a fast stub block signer for stress tests,
and canned personal records."""

from __future__ import annotations

import hashlib
import itertools

from pqballot import falcon, ledger, protocol, registry
from pqballot.biometric import SyntheticProvider

_counter = itertools.count()


class StubBlockSigner(ledger.BlockSigner):
    """Constant-time fake signer with the canonical body length; lets stress
    tests hammer commit logic without lattice sampling cost.  Chain signature
    verification is NOT valid under this signer."""

    def __init__(self, profile: falcon.SignatureProfile):
        self.profile = profile

    def sign_digest(self, digest: bytes, salt: bytes) -> bytes:
        body_len = self.profile.sig_len - 41
        stream = hashlib.shake_256(b"stub" + digest + salt).digest(body_len)
        return stream


def personal_record(tag: str) -> ledger.PersonalInfo:
    return ledger.PersonalInfo(
        full_name=f"Voter {tag}",
        phone="+977-555-0101",
        date_of_birth="1991-03-14",
        citizenship_number=f"CZ-{tag}",
        address=f"{tag} Ring Road, Pokhara",
    )


def build_node(tmp_path, authority: falcon.KeyPair, *, stub_blocks: bool = False,
               theta: float = 0.4, session_ttl_ms: int = 120_000,
               clock_ms=None, trace=None, metrics=None,
               candidates=((1, "Alice"), (2, "Bob"))) -> protocol.VotingNode:
    signer: ledger.BlockSigner
    if stub_blocks:
        signer = StubBlockSigner(authority.profile)
    else:
        signer = ledger.FalconBlockSigner(authority.secret)
    kwargs = {"clock": clock_ms} if clock_ms else {}
    store = ledger.LedgerStore(tmp_path / f"chain-{next(_counter)}.bin", signer,
                               **kwargs)
    store.append_genesis_if_empty()
    templates = registry.TemplateStore(tmp_path / f"templates-{next(_counter)}.bin")
    reg = registry.Registry()
    for cid, name in candidates:
        reg.add_candidate(cid, name)
    reg.open_election()
    node_kwargs = {"clock_ms": clock_ms} if clock_ms else {}
    return protocol.VotingNode(
        authority=authority,
        ledger_store=store,
        template_store=templates,
        voter_registry=reg,
        theta=theta,
        session_ttl_ms=session_ttl_ms,
        metrics=metrics,
        trace=trace,
        **node_kwargs,
    )


def enroll_subject(node: protocol.VotingNode, provider: SyntheticProvider,
                   subject: str, spoof_score: float = 0.0):
    sample = provider.capture(subject, spoof_score=spoof_score)
    return node.enroll(personal_record(subject), sample), sample
