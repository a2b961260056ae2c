"""Discrete Gaussian sampling over the integers.

samplerz draws from D_{Z, mu, sigma} for sigma in [sigmin, 1.8205] using the
standard half-Gaussian base table (72-bit reverse CDT) plus a Bernoulli
rejection with a fixed-point polynomial approximation of exp(-x).  The keygen
coefficient distribution is built on top by summing base samples.
"""

from __future__ import annotations

from math import floor, sqrt

# Largest sigma the base table supports; also the base half-Gaussian's sigma.
MAX_SIGMA = 1.8205
_INV_2SIGMA2 = 1.0 / (2.0 * MAX_SIGMA * MAX_SIGMA)

_LN2 = 0.69314718056
_ILN2 = 1.44269504089

# Reverse cumulative distribution of the half-Gaussian with sigma = MAX_SIGMA,
# scaled by 2^72: P(z > k) = _RCDT[k] / 2^72.
_RCDT = (
    3024686241123004913666,
    1564742784480091954050,
    636254429462080897535,
    199560484645026482916,
    47667343854657281903,
    8595902006365044063,
    1163297957344668388,
    117656387352093658,
    8867391802663976,
    496969357462633,
    20680885154299,
    638331848991,
    14602316184,
    247426747,
    3104126,
    28824,
    198,
    1,
)

# Coefficients of a degree-12 minimax polynomial for exp(-x) on [0, ln 2],
# in 2^63 fixed point, evaluated Horner-style highest order first.
_EXP_COEFFS = (
    0x00000004741183A3,
    0x00000036548CFC06,
    0x0000024FDCBF140A,
    0x0000171D939DE045,
    0x0000D00CF58F6F84,
    0x000680681CF796E3,
    0x002D82D8305B0FEA,
    0x011111110E066FD0,
    0x0555555555070F00,
    0x155555555581FF00,
    0x400000000002B400,
    0x7FFFFFFFFFFF4800,
    0x8000000000000000,
)


def base_sampler(randombytes) -> int:
    """Half-Gaussian sample in {0..18} with sigma = MAX_SIGMA."""
    u = int.from_bytes(randombytes(9), "big")
    z0 = 0
    for v in _RCDT:
        z0 += u < v
    return z0


def _approx_exp(x: float, ccs: float) -> int:
    """Integer approximation of 2^63 * ccs * exp(-x) for x in [0, ln 2]."""
    y = _EXP_COEFFS[0]
    z = int(x * (1 << 63))
    for c in _EXP_COEFFS[1:]:
        y = c - ((z * y) >> 63)
    return (int(ccs * (1 << 63)) * y) >> 63


def _ber_exp(x: float, ccs: float, randombytes) -> bool:
    """Single Bernoulli trial, true with probability ~ ccs * exp(-x)."""
    s = int(x * _ILN2)
    r = x - s * _LN2
    s = min(s, 63)
    z = ((_approx_exp(r, ccs) << 1) - 1) >> s
    w = 0
    for i in range(56, -8, -8):
        w = randombytes(1)[0] - ((z >> i) & 0xFF)
        if w != 0:
            break
    return w < 0


def samplerz(mu: float, sigma: float, sigmin: float, randombytes) -> int:
    """Sample z from the discrete Gaussian D_{Z, mu, sigma}."""
    s = int(floor(mu))
    r = mu - s
    dss = 1.0 / (2.0 * sigma * sigma)
    ccs = sigmin / sigma
    while True:
        z0 = base_sampler(randombytes)
        b = randombytes(1)[0] & 1
        z = b + (2 * b - 1) * z0
        x = ((z - r) ** 2) * dss - (z0 * z0) * _INV_2SIGMA2
        if _ber_exp(x, ccs, randombytes):
            return z + s


# -- keygen coefficient distribution ------------------------------------------

_POOL = 4096  # samples pooled per polynomial; fixes the base sigma below MAX_SIGMA


def keygen_sigma(n: int, q: int) -> float:
    """Per-coefficient sigma for the short basis polynomials."""
    return 1.17 * sqrt(q / (2 * n))


def gauss_poly(n: int, q: int, randombytes) -> list[int]:
    """n Gaussian coefficients at keygen_sigma(n, q), with odd coefficient sum.

    Draws _POOL base samples at sigma0 = keygen_sigma(_POOL/2, q) and sums
    groups of _POOL/n; summing k independent Gaussians scales sigma by sqrt(k).
    Odd parity keeps the polynomial invertible at x=1 and helps the tower-field
    solver succeed at the bottom of its recursion.
    """
    if n > _POOL:
        raise ValueError("degree exceeds sampling pool")
    sigma0 = 1.17 * sqrt(q / (2 * _POOL))
    k = _POOL // n
    while True:
        pool = [samplerz(0.0, sigma0, sigma0 - 0.001, randombytes) for _ in range(_POOL)]
        f = [sum(pool[i * k:(i + 1) * k]) for i in range(n)]
        if sum(f) & 1:
            return f
