"""Lattice signatures walkthrough: keys, salted signing, verification, and the
fixed-width encodings that keep ledger blocks deterministic in size.

Run:  python demos/01_signatures.py
"""

import time

from pqballot import falcon

print("== key generation (F512) ==")
t0 = time.time()
keypair = falcon.generate_keypair(falcon.FALCON_512, seed=bytes(32))
print(f"generated in {time.time() - t0:.1f}s")
print(f"public key: {len(keypair.public)} bytes, starts {keypair.public[:8].hex()}")

print("\n== signing is salted: same message, different signatures ==")
message = b"ballot for candidate 7"
sig_a = falcon.sign(keypair.secret, message)
sig_b = falcon.sign(keypair.secret, message)
print(f"salt A: {sig_a.salt[:12].hex()}...")
print(f"salt B: {sig_b.salt[:12].hex()}...")
print(f"both verify: {falcon.verify(keypair.public, message, sig_a)} "
      f"{falcon.verify(keypair.public, message, sig_b)}")

print("\n== fixed-width encoding ==")
encoded = falcon.encode_signature(sig_a)
print(f"encoded signature: {len(encoded)} bytes (always, for F512)")
decoded = falcon.decode_signature(encoded, falcon.FALCON_512)
print(f"decode(encode(sig)) == sig: {decoded == sig_a}")

print("\n== tampering fails ==")
tampered = bytearray(encoded)
tampered[100] ^= 0x01
try:
    bad = falcon.decode_signature(bytes(tampered), falcon.FALCON_512)
    print(f"bit flip still verifies? {falcon.verify(keypair.public, message, bad)}")
except Exception as exc:
    print(f"bit flip rejected at decode: {type(exc).__name__}")

print("\n== latency asymmetry (the reason vote verification is cheap) ==")
t0 = time.time()
sigs = [falcon.sign(keypair.secret, b"m%d" % i) for i in range(10)]
sign_ms = (time.time() - t0) / 10 * 1000
t0 = time.time()
for i, sig in enumerate(sigs):
    falcon.verify(keypair.public, b"m%d" % i, sig)
verify_ms = (time.time() - t0) / 10 * 1000
print(f"sign {sign_ms:.1f} ms   verify {verify_ms:.2f} ms   "
      f"ratio {sign_ms / verify_ms:.0f}x")
