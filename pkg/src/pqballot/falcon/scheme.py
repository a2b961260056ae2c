"""Hash-and-sign lattice signatures over NTRU lattices (Falcon parameter sets).

Two production profiles are exposed, F512 and F1024; the smaller degrees in
the parameter table exist for fast math tests only.  Signing samples a salt,
hashes (salt, message) to a ring point, draws a short preimage with the fast
Fourier nearest-plane sampler, and retries until the squared norm bound and
the fixed-width encoding both hold.  Verification recomputes the hash point,
reconstructs s1 = point - s2*h mod q, and checks the same norm bound, so it is
stateless and lock-free.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..errors import MalformedEncoding, SigningFailure
from . import encoding
from .encoding import HEAD_LEN, SALT_LEN
from .fft import fft, ifft
from .ffsampling import ff_sampling, ldl_tree
from .ntt import Q, center_mod_q, div_zq, intt, ntt
from .ntrugen import ntru_gen
from .rng import BufferedRandom, ShakeStream, system_random

RETRY_CAP = 64  # preimage resampling attempts before SigningFailure


@dataclass(frozen=True)
class SignatureProfile:
    name: str
    logn: int
    n: int
    q: int
    norm_bound: int          # squared L2 acceptance threshold
    sigma: float
    sigmin: float
    salt_len: int
    pk_len: int
    sig_len: int


def _profile(name: str, logn: int, sigma: float, sigmin: float, norm_bound: int,
             sig_len: int) -> SignatureProfile:
    n = 1 << logn
    return SignatureProfile(
        name=name, logn=logn, n=n, q=Q, norm_bound=norm_bound,
        sigma=sigma, sigmin=sigmin, salt_len=SALT_LEN,
        pk_len=1 + (14 * n) // 8, sig_len=sig_len,
    )


FALCON_512 = _profile("F512", 9, 165.7366171829776, 1.2778336969128337, 34034726, 666)
FALCON_1024 = _profile("F1024", 10, 168.38857144654395, 1.298280334344292, 70265242, 1280)

PROFILES = {"F512": FALCON_512, "F1024": FALCON_1024}

# Reduced degrees for unit-testing the lattice machinery; never used by nodes.
_TOY = {
    16: (151.78340713845503, 1.170254078853483, 892039, 63),
    32: (154.6747794602761, 1.1925466358390344, 1852696, 82),
    64: (157.51308555044122, 1.2144300507766141, 3842630, 122),
    128: (160.30114421975344, 1.235926056771981, 7959734, 200),
    256: (163.04153322607107, 1.2570545284063217, 16468416, 356),
}


def toy_profile(n: int) -> SignatureProfile:
    sigma, sigmin, bound, sig_len = _TOY[n]
    return _profile(f"T{n}", n.bit_length() - 1, sigma, sigmin, bound, sig_len)


def profile_by_code(code: int) -> SignatureProfile:
    for prof in PROFILES.values():
        if prof.logn == code:
            return prof
    raise MalformedEncoding(f"unknown profile code {code}")


class SecretKey:
    """Short basis plus the precomputed transforms the sampler needs.

    Immutable after construction, so signing from many threads is safe.
    """

    def __init__(self, profile: SignatureProfile, f, g, F, G):
        self.profile = profile
        self.f = [int(c) for c in f]
        self.g = [int(c) for c in g]
        self.F = [int(c) for c in F]
        self.G = [int(c) for c in G]
        # Basis rows (g, -f), (G, -F), transform domain.
        self._b00 = fft(self.g)
        self._b01 = fft([-c for c in self.f])
        self._b10 = fft(self.G)
        self._b11 = fft([-c for c in self.F])
        self._tree = ldl_tree(self._b00, self._b01, self._b10, self._b11,
                              profile.sigma)

    def public_coefficients(self) -> np.ndarray:
        return div_zq(self.g, self.f)

    def to_bytes(self) -> bytes:
        return encoding.pack_secret(self.f, self.g, self.F, self.G)

    @classmethod
    def from_bytes(cls, blob: bytes, profile: SignatureProfile) -> "SecretKey":
        return cls(profile, *encoding.unpack_secret(blob, profile.n))


@dataclass(frozen=True)
class KeyPair:
    profile: SignatureProfile
    secret: SecretKey = field(repr=False)
    public: bytes


@dataclass(frozen=True)
class Signature:
    profile: SignatureProfile
    salt: bytes
    s2: np.ndarray = field(repr=False)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Signature)
                and self.profile == other.profile
                and self.salt == other.salt
                and np.array_equal(self.s2, other.s2))


def generate_keypair(profile: SignatureProfile, seed: bytes | None = None) -> KeyPair:
    """New keypair; a fixed 32-byte seed makes generation deterministic."""
    if seed is not None:
        if len(seed) != 32:
            raise ValueError("seed must be exactly 32 bytes")
        randombytes = ShakeStream(seed)
    else:
        randombytes = system_random
    f, g, F, G = ntru_gen(profile.n, BufferedRandom(randombytes))
    secret = SecretKey(profile, f, g, F, G)
    public = encoding.pack_public(secret.public_coefficients(), profile.logn)
    return KeyPair(profile=profile, secret=secret, public=public)


def hash_to_point(salt: bytes, message: bytes, profile: SignatureProfile) -> np.ndarray:
    """Deterministic map of (salt, message) to n coefficients uniform mod q."""
    if len(salt) != profile.salt_len:
        raise ValueError(f"salt must be {profile.salt_len} bytes")
    n = profile.n
    accept_below = (65536 // Q) * Q  # 16-bit rejection keeps residues uniform
    length = 2 * (n + n // 8 + 16)
    while True:
        stream = hashlib.shake_256(salt + message).digest(length)
        vals = np.frombuffer(stream, dtype=">u2").astype(np.int64)
        kept = vals[vals < accept_below]
        if kept.shape[0] >= n:
            return kept[:n] % Q
        length *= 2


def _sample_preimage(secret: SecretKey, point: np.ndarray, randombytes
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Short (s1, s2) with s1 + s2*h = point mod q."""
    prof = secret.profile
    point_t = fft(point)
    # (point, 0) * B^-1, using det(B) = q.
    t0 = point_t * secret._b11 / prof.q
    t1 = -point_t * secret._b01 / prof.q
    z0, z1 = ff_sampling(t0, t1, secret._tree, prof.sigmin, randombytes)
    v0 = ifft(z0 * secret._b00 + z1 * secret._b10)
    v1 = ifft(z0 * secret._b01 + z1 * secret._b11)
    s1 = point - np.round(v0).astype(np.int64)
    s2 = -np.round(v1).astype(np.int64)
    return s1, s2


def _attempt(secret: SecretKey, salt: bytes, point: np.ndarray, randombytes
             ) -> Signature | None:
    prof = secret.profile
    s1, s2 = _sample_preimage(secret, point, randombytes)
    if int(np.sum(s1 * s1) + np.sum(s2 * s2)) > prof.norm_bound:
        return None
    if encoding.compress(s2, prof.sig_len - HEAD_LEN - SALT_LEN) is None:
        return None
    return Signature(profile=prof, salt=salt, s2=s2)


def sign(secret: SecretKey, message: bytes, randombytes=None) -> Signature:
    """Salted signature; same message signs differently on every call."""
    rng = BufferedRandom(randombytes if randombytes is not None else system_random)
    for _ in range(RETRY_CAP):
        salt = rng(SALT_LEN)
        sig = _attempt(secret, salt, hash_to_point(salt, message, secret.profile), rng)
        if sig is not None:
            return sig
    raise SigningFailure(f"no bounded signature after {RETRY_CAP} attempts")


def sign_with_salt(secret: SecretKey, message: bytes, salt: bytes,
                   randombytes=None) -> Signature:
    """Signature under a caller-fixed salt (the Gaussian draw still varies)."""
    rng = BufferedRandom(randombytes if randombytes is not None else system_random)
    point = hash_to_point(salt, message, secret.profile)
    for _ in range(RETRY_CAP):
        sig = _attempt(secret, salt, point, rng)
        if sig is not None:
            return sig
    raise SigningFailure(f"no bounded signature after {RETRY_CAP} attempts")


@lru_cache(maxsize=64)
def _public_ntt(public: bytes, logn: int) -> np.ndarray:
    h = encoding.unpack_public(public, logn)
    table = ntt(h)
    table.flags.writeable = False
    return table


def verify(public: bytes, message: bytes, sig: Signature) -> bool:
    """True iff s1 = point - s2*h is well-formed and ||(s1, s2)||^2 <= bound."""
    prof = sig.profile
    if len(public) != prof.pk_len:
        raise MalformedEncoding("public key length does not match signature profile")
    h_ntt = _public_ntt(public, prof.logn)
    point = hash_to_point(sig.salt, message, prof)
    s2h = intt(ntt(sig.s2) * h_ntt % Q)
    s1 = center_mod_q(point - s2h)
    norm = int(np.sum(s1 * s1) + np.sum(sig.s2 * sig.s2))
    return norm <= prof.norm_bound


def encode_signature(sig: Signature) -> bytes:
    out = encoding.encode_signature_parts(sig.salt, sig.s2, sig.profile.logn,
                                          sig.profile.sig_len)
    if out is None:
        raise MalformedEncoding("signature does not fit its fixed-width encoding")
    return out


def decode_signature(data: bytes, profile: SignatureProfile) -> Signature:
    salt, s2 = encoding.decode_signature_parts(data, profile.logn, profile.sig_len)
    return Signature(profile=profile, salt=salt, s2=s2)


_keyfile_lock = threading.Lock()


def save_keypair(path, keypair: KeyPair, passphrase: bytes) -> None:
    sealed = encoding.seal_secret(keypair.secret.to_bytes(), passphrase)
    with _keyfile_lock:
        encoding.write_keyfile(path, keypair.profile.logn, sealed, keypair.public)


def load_keypair(path, passphrase: bytes) -> KeyPair:
    code, sealed, public = encoding.read_keyfile(path)
    profile = profile_by_code(code)
    if len(public) != profile.pk_len:
        raise MalformedEncoding("key file public key has wrong length")
    blob = encoding.open_secret(sealed, passphrase)
    secret = SecretKey.from_bytes(blob, profile)
    return KeyPair(profile=profile, secret=secret, public=public)
