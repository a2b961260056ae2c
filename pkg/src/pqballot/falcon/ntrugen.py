"""NTRU key generation: find short f, g, F, G with f*G - g*F = q in Z[x]/(x^n + 1).

f and g are Gaussian-short; (F, G) comes from solving the NTRU equation down a
tower of subfields (field norms halve the degree until the problem is an
integer Bezout identity), then lifting back up with Babai reduction at every
level.  Exact arithmetic uses Python integers; polynomial products go through
Kronecker substitution so the big-integer multiplier does the heavy lifting.
"""

from __future__ import annotations

import math

import numpy as np

from . import fft
from .ntt import Q, is_invertible
from .sampler import gauss_poly

_COEFF_LIMIT = 127  # all four secret polynomials must fit signed bytes


class SolveFailure(Exception):
    """This (f, g) candidate admits no acceptable (F, G); resample."""


# -- exact polynomial arithmetic ----------------------------------------------

def _pack(poly: list[int], width: int) -> int:
    acc = 0
    for c in reversed(poly):
        acc = (acc << width) + c
    return acc


def _unpack_signed(value: int, width: int, count: int) -> list[int]:
    out = []
    mask = (1 << width) - 1
    half = 1 << (width - 1)
    for _ in range(count):
        limb = value & mask
        if limb >= half:
            limb -= 1 << width
        out.append(limb)
        value = (value - limb) >> width
    return out


def poly_mul(a: list[int], b: list[int]) -> list[int]:
    """Product mod (x^n + 1) via Kronecker substitution (exact)."""
    n = len(a)
    wa = max((abs(x) for x in a), default=0)
    wb = max((abs(x) for x in b), default=0)
    if wa == 0 or wb == 0:
        return [0] * n
    width = wa.bit_length() + wb.bit_length() + n.bit_length() + 2
    full = _unpack_signed(_pack(a, width) * _pack(b, width), width, 2 * n)
    return [full[i] - full[i + n] for i in range(n - 1)] + [full[n - 1]]


def galois_conjugate(a: list[int]) -> list[int]:
    """a(-x): the nontrivial automorphism over the half-degree subfield."""
    return [-c if i & 1 else c for i, c in enumerate(a)]


def field_norm(a: list[int]) -> list[int]:
    """N(a) = a(x)a(-x) as an element of the half ring Z[y]/(y^{n/2} + 1)."""
    half = len(a) // 2
    even = a[0::2]
    odd = a[1::2]
    e2 = poly_mul(even, even)
    o2 = poly_mul(odd, odd)
    res = list(e2)
    for i in range(half - 1):
        res[i + 1] -= o2[i]
    res[0] += o2[half - 1]
    return res


def lift(a: list[int]) -> list[int]:
    """a(x^2) in the ring of doubled degree."""
    out = [0] * (2 * len(a))
    out[0::2] = a
    return out


def _xgcd(b: int, n: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while n != 0:
        quot, b, n = b // n, n, b % n
        x0, x1 = x1, x0 - quot * x1
        y0, y1 = y1, y0 - quot * y1
    return b, x0, y0


# -- Babai reduction -----------------------------------------------------------

def _bitsize(a: int) -> int:
    """Bit length of |a| rounded up to a byte multiple (0 for 0)."""
    val = abs(a)
    size = 0
    while val:
        size += 8
        val >>= 8
    return size


def _max_bitsize(*polys: list[int]) -> int:
    return max((_bitsize(c) for p in polys for c in p), default=0)


_STALL_LIMIT = 64  # consecutive rounds without bitsize progress before giving up


def reduce_pair(f: list[int], g: list[int], F: list[int], G: list[int]
                ) -> tuple[list[int], list[int]]:
    """(F, G) -= k * (f, g) with k = round((F f* + G g*) / (f f* + g g*)).

    Only the top 53 bits of each side enter the float FFT, so when f's
    coefficients are narrower than a double's mantissa each round peels at
    most 53 - bits(f) bits off F; the loop runs until F reaches f's scale or
    k vanishes, and only a stall (no bitsize progress) aborts the attempt.
    """
    n = len(f)
    size = max(53, _max_bitsize(f, g))
    f_hi = fft.fft([c >> (size - 53) for c in f])
    g_hi = fft.fft([c >> (size - 53) for c in g])
    denom = f_hi * fft.adj_fft(f_hi) + g_hi * fft.adj_fft(g_hi)

    best = None
    stalled = 0
    while True:
        big = max(53, _max_bitsize(F, G))
        if big < size:
            return F, G
        if best is None or big < best:
            best, stalled = big, 0
        else:
            stalled += 1
            if stalled > _STALL_LIMIT:
                raise SolveFailure("reduction stalled")
        F_hi = fft.fft([c >> (big - 53) for c in F])
        G_hi = fft.fft([c >> (big - 53) for c in G])
        num = F_hi * fft.adj_fft(f_hi) + G_hi * fft.adj_fft(g_hi)
        with np.errstate(all="raise"):
            try:
                k = np.round(fft.ifft(num / denom)).astype(np.int64)
            except FloatingPointError as exc:
                raise SolveFailure("reduction lost precision") from exc
        if not np.any(k):
            return F, G
        k_list = [int(c) for c in k]
        fk = poly_mul(f, k_list)
        gk = poly_mul(g, k_list)
        shift = big - size
        for i in range(n):
            F[i] -= fk[i] << shift
            G[i] -= gk[i] << shift


# -- NTRU equation solver --------------------------------------------------------

def ntru_solve(f: list[int], g: list[int]) -> tuple[list[int], list[int]]:
    if len(f) == 1:
        d, u, v = _xgcd(f[0], g[0])
        if d != 1:
            raise SolveFailure("resultants are not coprime")
        return [-Q * v], [Q * u]
    fp = field_norm(f)
    gp = field_norm(g)
    Fp, Gp = ntru_solve(fp, gp)
    F = poly_mul(lift(Fp), galois_conjugate(g))
    G = poly_mul(lift(Gp), galois_conjugate(f))
    return reduce_pair(f, g, F, G)


# -- acceptance checks -----------------------------------------------------------

def gs_norm_ok(f: list[int], g: list[int]) -> bool:
    """Squared Gram-Schmidt norm of the would-be basis must stay under 1.17^2 q."""
    bound = (1.17 ** 2) * Q
    sq_fg = sum(c * c for c in f) + sum(c * c for c in g)
    if sq_fg > bound:
        return False
    f_t = fft.fft(f)
    g_t = fft.fft(g)
    denom = f_t * fft.adj_fft(f_t) + g_t * fft.adj_fft(g_t)
    ft = fft.adj_fft(g_t) / denom
    gt = fft.adj_fft(f_t) / denom
    sq_orth = (Q ** 2) * (
        np.sum(np.abs(ft) ** 2) + np.sum(np.abs(gt) ** 2)) / len(f)
    return max(sq_fg, sq_orth) <= bound


def ntru_gen(n: int, randombytes) -> tuple[list[int], ...]:
    """Short basis (f, g, F, G) with f*G - g*F = q; f invertible mod q."""
    while True:
        f = gauss_poly(n, Q, randombytes)
        g = gauss_poly(n, Q, randombytes)
        if not gs_norm_ok(f, g):
            continue
        if not is_invertible(f):
            continue
        try:
            F, G = ntru_solve(list(f), list(g))
        except SolveFailure:
            continue
        if _max_abs(F) > _COEFF_LIMIT or _max_abs(G) > _COEFF_LIMIT:
            continue
        if _max_abs(f) > _COEFF_LIMIT or _max_abs(g) > _COEFF_LIMIT:
            continue
        check = poly_mul(f, G)
        gF = poly_mul(g, F)
        residue = [a - b for a, b in zip(check, gF)]
        if residue[0] != Q or any(residue[1:]):
            continue
        return f, g, F, G


def _max_abs(poly: list[int]) -> int:
    return max(abs(c) for c in poly)
