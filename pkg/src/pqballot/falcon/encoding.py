"""Canonical byte encodings: compressed short vectors, public keys, signatures,
and the encrypted key file.

Signatures use the fixed-width padded layout (header byte, 40-byte salt,
compressed short vector, zero padding) so every encoded signature of a profile
has exactly sig_len bytes and ledger blocks stay deterministic in size.
"""

from __future__ import annotations

import os
import struct

import numpy as np
from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.scrypt import Scrypt

from ..errors import MalformedEncoding
from .ntt import Q

HEAD_LEN = 1
SALT_LEN = 40
_LOW_BITS = 7
_MAX_COEFF = 2047  # |coefficient| bound encodable by the sign/low/unary scheme

KEYFILE_MAGIC = b"PQBK"


# -- short-vector compression --------------------------------------------------

def compress(coeffs, out_len: int) -> bytes | None:
    """Variable-length encode, zero-padded to out_len; None if it cannot fit."""
    acc = 0
    nbits = 0
    for c in coeffs:
        c = int(c)
        mag = abs(c)
        if mag > _MAX_COEFF:
            return None
        high = mag >> _LOW_BITS
        # sign bit, 7 low bits, `high` zeros, terminating one.
        chunk_bits = 1 + _LOW_BITS + high + 1
        chunk = ((c < 0) << (chunk_bits - 1)) | ((mag & 0x7F) << (high + 1)) | 1
        acc = (acc << chunk_bits) | chunk
        nbits += chunk_bits
    total = 8 * out_len
    if nbits > total:
        return None
    acc <<= total - nbits
    return acc.to_bytes(out_len, "big")


def decompress(data: bytes, n: int) -> np.ndarray:
    """Strict inverse of compress; raises MalformedEncoding on any deviation."""
    total = 8 * len(data)
    acc = int.from_bytes(data, "big")
    pos = 0

    def take(k: int) -> int:
        nonlocal pos
        if pos + k > total:
            raise MalformedEncoding("compressed stream truncated")
        out = (acc >> (total - pos - k)) & ((1 << k) - 1)
        pos += k
        return out

    coeffs = np.empty(n, dtype=np.int64)
    for i in range(n):
        sign = take(1)
        low = take(_LOW_BITS)
        high = 0
        while take(1) == 0:
            high += 1
            if high > (_MAX_COEFF >> _LOW_BITS):
                raise MalformedEncoding("unary run exceeds coefficient bound")
        mag = (high << _LOW_BITS) | low
        if sign and mag == 0:
            raise MalformedEncoding("negative zero is not canonical")
        coeffs[i] = -mag if sign else mag
    if pos < total and (acc & ((1 << (total - pos)) - 1)) != 0:
        raise MalformedEncoding("nonzero padding after coefficients")
    return coeffs


# -- public keys -----------------------------------------------------------------

def pack_public(h, logn: int) -> bytes:
    """Header byte 0x00|logn, then 14-bit big-endian packed coefficients."""
    n = len(h)
    acc = 0
    for c in h:
        c = int(c)
        if not 0 <= c < Q:
            raise ValueError("public coefficient out of range")
        acc = (acc << 14) | c
    return bytes([logn]) + acc.to_bytes((14 * n) // 8, "big")


def unpack_public(data: bytes, logn: int) -> np.ndarray:
    n = 1 << logn
    expect = 1 + (14 * n) // 8
    if len(data) != expect:
        raise MalformedEncoding(f"public key must be {expect} bytes")
    if data[0] != logn:
        raise MalformedEncoding("public key header does not match profile")
    acc = int.from_bytes(data[1:], "big")
    out = np.empty(n, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        out[i] = acc & 0x3FFF
        acc >>= 14
    if np.any(out >= Q):
        raise MalformedEncoding("public coefficient out of range")
    return out


# -- signatures -------------------------------------------------------------------

def signature_header(logn: int) -> int:
    return 0x30 + logn


def encode_signature_parts(salt: bytes, s2, logn: int, sig_len: int) -> bytes | None:
    body = compress(s2, sig_len - HEAD_LEN - SALT_LEN)
    if body is None:
        return None
    return bytes([signature_header(logn)]) + salt + body


def decode_signature_parts(data: bytes, logn: int, sig_len: int) -> tuple[bytes, np.ndarray]:
    if len(data) != sig_len:
        raise MalformedEncoding(f"signature must be {sig_len} bytes")
    if data[0] != signature_header(logn):
        raise MalformedEncoding("signature header does not match profile")
    salt = data[HEAD_LEN:HEAD_LEN + SALT_LEN]
    s2 = decompress(data[HEAD_LEN + SALT_LEN:], 1 << logn)
    return salt, s2


# -- secret keys -------------------------------------------------------------------

def pack_secret(f, g, F, G) -> bytes:
    out = bytearray()
    for poly in (f, g, F, G):
        arr = np.asarray(poly, dtype=np.int64)
        if np.any(np.abs(arr) > 127):
            raise ValueError("secret coefficient exceeds signed byte range")
        out += arr.astype(np.int8).tobytes()
    return bytes(out)


def unpack_secret(blob: bytes, n: int) -> tuple[list[int], ...]:
    if len(blob) != 4 * n:
        raise MalformedEncoding("secret blob has wrong length")
    parts = []
    for i in range(4):
        arr = np.frombuffer(blob[i * n:(i + 1) * n], dtype=np.int8).astype(np.int64)
        parts.append([int(c) for c in arr])
    return tuple(parts)


# -- key file ---------------------------------------------------------------------

_SCRYPT_N = 1 << 14
_SCRYPT_R = 8
_SCRYPT_P = 1


def _derive_key(passphrase: bytes, salt: bytes) -> bytes:
    kdf = Scrypt(salt=salt, length=32, n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P)
    return kdf.derive(passphrase)


def seal_secret(blob: bytes, passphrase: bytes) -> bytes:
    salt = os.urandom(16)
    nonce = os.urandom(12)
    sealed = AESGCM(_derive_key(passphrase, salt)).encrypt(nonce, blob, b"")
    return salt + nonce + sealed


def open_secret(sealed: bytes, passphrase: bytes) -> bytes:
    if len(sealed) < 16 + 12 + 16:
        raise MalformedEncoding("sealed secret too short")
    salt, nonce, body = sealed[:16], sealed[16:28], sealed[28:]
    try:
        return AESGCM(_derive_key(passphrase, salt)).decrypt(nonce, body, b"")
    except InvalidTag as exc:
        raise MalformedEncoding("wrong passphrase or corrupted key file") from exc


def write_keyfile(path, profile_code: int, sealed_secret: bytes, public: bytes) -> None:
    frame = (KEYFILE_MAGIC + bytes([profile_code])
             + struct.pack("<I", len(sealed_secret)) + sealed_secret
             + struct.pack("<I", len(public)) + public)
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(frame)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def read_keyfile(path) -> tuple[int, bytes, bytes]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 5 or data[:4] != KEYFILE_MAGIC:
        raise MalformedEncoding("not a key file")
    profile_code = data[4]
    off = 5

    def field() -> bytes:
        nonlocal off
        if off + 4 > len(data):
            raise MalformedEncoding("key file truncated")
        (length,) = struct.unpack_from("<I", data, off)
        off += 4
        if off + length > len(data):
            raise MalformedEncoding("key file truncated")
        out = data[off:off + length]
        off += length
        return out

    sealed = field()
    public = field()
    if off != len(data):
        raise MalformedEncoding("trailing bytes in key file")
    return profile_code, sealed, public
