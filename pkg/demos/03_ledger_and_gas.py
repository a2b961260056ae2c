"""The tamper-evident ledger: deterministic block sizes, gas accounting, and
what happens when any persisted byte changes.

Run:  python demos/03_ledger_and_gas.py
"""

import tempfile
from pathlib import Path

from pqballot import falcon, ledger
from pqballot.biometric import SyntheticProvider

keypair = falcon.generate_keypair(falcon.FALCON_512, seed=bytes(32))
workdir = Path(tempfile.mkdtemp())
store = ledger.LedgerStore(workdir / "chain.bin",
                           ledger.FalconBlockSigner(keypair.secret))
store.append_genesis_if_empty()

provider = SyntheticProvider(seed=b"ledger-demo")
emb = provider.identity("citizen")
digest = emb.digest()
embedding_sig = falcon.encode_signature(falcon.sign(keypair.secret, digest))

personal = ledger.PersonalInfo(
    full_name="Kanchan Sharma", phone="+977-555-0142",
    date_of_birth="1992-11-30", citizenship_number="NP-220541",
    address="Lakeside 6, Pokhara")
registration = store.append_block(ledger.BlockKind.REGISTRATION,
                                  ledger.RegistrationPayload(
                                      voter_address=b"\x11" * 20,
                                      personal=personal,
                                      embedding_digest=digest,
                                      embedding_signature=embedding_sig))
vote = store.append_block(ledger.BlockKind.VOTE, ledger.VotePayload(
    voter_address=b"\x11" * 20, candidate_id=2, tx_id=b"\x07" * 32))

print("== canonical block sizes ==")
for i in range(3):
    block = store.get_block(i)
    print(f"block {i}: kind={block.header.kind.name:<12} "
          f"{len(store.get_raw(i))} bytes")

print("\n== gas accounting ==")
model = store.gas_model
for block in (registration, vote):
    frac = ledger.gas_fraction(model, block.header.gas_used)
    print(f"{block.header.kind.name:<12} gas={block.header.gas_used:>7} "
          f"({frac:.3%} of the {model.block_gas_limit:,} limit)")

print("\n== chain verification ==")
print("untampered:", ledger.verify_chain(store, keypair.public))

print("\n== flip one byte anywhere and the chain notices ==")
data = bytearray((workdir / "chain.bin").read_bytes())
for label, pos in (("genesis header", 10),
                   ("registration personal field", 4 + 682 + 4 + 90),
                   ("vote tx id", 4 + 682 + 4 + 2275 + 4 + 60),
                   ("authority signature", len(data) - 5)):
    mutated = bytearray(data)
    mutated[pos] ^= 0xFF
    blocks, raws, rep, _ = ledger.parse_frames(bytes(mutated), store.profile)
    if rep.bad_index is not None:
        print(f"{label:<34} -> parse failure at block {rep.bad_index}")
        continue
    check = ledger.verify_chain_blocks(blocks, raws, keypair.public,
                                       store.profile, store.gas_model)
    print(f"{label:<34} -> valid={check.valid} first_bad={check.first_bad_index}")
