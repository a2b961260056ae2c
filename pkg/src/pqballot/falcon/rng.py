"""Random byte sources: system entropy, and a SHAKE256-based deterministic stream.

Every consumer takes a ``randombytes(k) -> bytes`` callable, so deterministic
key generation / signing under a fixed seed and OS entropy share one code path.
"""

from __future__ import annotations

import hashlib
import os
import threading

from ..errors import EntropyUnavailable


def system_random(k: int) -> bytes:
    try:
        return os.urandom(k)
    except NotImplementedError as exc:  # pragma: no cover - exotic platforms
        raise EntropyUnavailable("os.urandom is unavailable") from exc


class BufferedRandom:
    """Chunked reads over a byte source; preserves the consumed byte sequence.

    Gaussian sampling asks for 1-9 bytes at a time, which is syscall-bound
    straight off os.urandom.  Not thread-safe: wrap per operation.
    """

    def __init__(self, source, chunk: int = 4096):
        self._source = source
        self._chunk = chunk
        self._buf = b""
        self._pos = 0

    def __call__(self, k: int) -> bytes:
        if k >= self._chunk:
            return self._source(k)
        if len(self._buf) - self._pos < k:
            self._buf = self._buf[self._pos:] + self._source(self._chunk)
            self._pos = 0
        out = self._buf[self._pos:self._pos + k]
        self._pos += k
        return out


class ShakeStream:
    """Deterministic byte stream: the SHAKE256 XOF of a seed, read incrementally.

    hashlib exposes SHAKE only as fixed-length digests; the XOF prefix property
    (digest(2L)[:L] == digest(L)) makes doubling reads consistent.
    """

    def __init__(self, seed: bytes):
        self._seed = bytes(seed)
        self._buf = b""
        self._pos = 0
        self._lock = threading.Lock()

    def __call__(self, k: int) -> bytes:
        with self._lock:
            while len(self._buf) - self._pos < k:
                grow = max(2 * len(self._buf), 4096)
                self._buf = hashlib.shake_256(self._seed).digest(grow)
            out = self._buf[self._pos:self._pos + k]
            self._pos += k
            return out
