"""Number-theoretic transform modulo q = 12289 over Z_q[x]/(x^n + 1).

Forward transform takes standard coefficient order to bit-reversed evaluation
order; the inverse undoes it.  All users here only combine ntt/intt pairs or
test slots for zero, so the internal ordering never leaks.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

Q = 12289

# 11 generates the multiplicative group of Z_q (order q-1 = 2^12 * 3).
_GEN = 11
assert pow(_GEN, (Q - 1) // 2, Q) != 1 and pow(_GEN, (Q - 1) // 3, Q) != 1


def _bitrev(value: int, bits: int) -> int:
    out = 0
    for _ in range(bits):
        out = (out << 1) | (value & 1)
        value >>= 1
    return out


@lru_cache(maxsize=None)
def _tables(n: int) -> tuple[np.ndarray, np.ndarray, int]:
    logn = n.bit_length() - 1
    psi = pow(_GEN, (Q - 1) // (2 * n), Q)
    assert pow(psi, n, Q) == Q - 1
    psi_inv = pow(psi, Q - 2, Q)
    fwd = np.array([pow(psi, _bitrev(i, logn), Q) for i in range(n)], dtype=np.int64)
    inv = np.array([pow(psi_inv, _bitrev(i, logn), Q) for i in range(n)], dtype=np.int64)
    return fwd, inv, pow(n, Q - 2, Q)


def ntt(a) -> np.ndarray:
    v = np.asarray(a, dtype=np.int64) % Q
    n = v.shape[0]
    fwd, _, _ = _tables(n)
    t, m = n, 1
    while m < n:
        t //= 2
        blocks = v.reshape(m, 2 * t)
        s = fwd[m:2 * m, None]
        left = blocks[:, :t]
        right = blocks[:, t:] * s % Q
        v = np.hstack(((left + right) % Q, (left - right) % Q)).ravel()
        m *= 2
    return v


def intt(a) -> np.ndarray:
    v = np.asarray(a, dtype=np.int64) % Q
    n = v.shape[0]
    _, inv, n_inv = _tables(n)
    t, m = 1, n
    while m > 1:
        h = m // 2
        blocks = v.reshape(h, 2 * t)
        s = inv[h:2 * h, None]
        left = blocks[:, :t]
        right = blocks[:, t:]
        v = np.hstack(((left + right) % Q, (left - right) * s % Q)).ravel()
        t *= 2
        m = h
    return v * n_inv % Q


def mul_zq(f, g) -> np.ndarray:
    return intt(ntt(f) * ntt(g) % Q)


def div_zq(f, g) -> np.ndarray:
    """f/g in the quotient ring; g must be invertible (no zero NTT slot)."""
    gt = ntt(g)
    if np.any(gt == 0):
        raise ZeroDivisionError("polynomial is not invertible mod q")
    inv = np.array([pow(int(x), Q - 2, Q) for x in gt], dtype=np.int64)
    return intt(ntt(f) * inv % Q)


def is_invertible(f) -> bool:
    return bool(np.all(ntt(f) != 0))


def center_mod_q(a) -> np.ndarray:
    """Map residues to the symmetric range (-q/2, q/2]."""
    v = np.asarray(a, dtype=np.int64) % Q
    return v - np.where(v > Q // 2, Q, 0)
