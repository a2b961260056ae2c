"""Floating-point FFT over the ring R[x]/(x^n + 1).

A length-n real polynomial is represented in the transform domain by its n
complex evaluations at the 2n-th roots of unity (the roots of x^n + 1), in a
recursive order where slots 2i and 2i+1 always hold evaluations at a +/- pair
of points.  With that ordering, splitting a transform into the transforms of
the even- and odd-index coefficient halves is a local operation on adjacent
slots, which is what the lattice Gaussian sampler needs at every recursion
level.
"""

from __future__ import annotations

import numpy as np

# _POINTS[n][2i] and _POINTS[n][2i+1] are +/- square roots of _POINTS[n//2][i].
_POINTS: dict[int, np.ndarray] = {2: np.array([1j, -1j], dtype=np.complex128)}


def _points(n: int) -> np.ndarray:
    pts = _POINTS.get(n)
    if pts is None:
        s = np.sqrt(_points(n // 2))
        pts = np.empty(n, dtype=np.complex128)
        pts[0::2] = s
        pts[1::2] = -s
        _POINTS[n] = pts
    return pts


def merge_fft(f0: np.ndarray, f1: np.ndarray) -> np.ndarray:
    """Transform of f(x) = f0(x^2) + x*f1(x^2) from the half-size transforms."""
    n = 2 * f0.shape[0]
    s = _points(n)[0::2]
    t = s * f1
    out = np.empty(n, dtype=np.complex128)
    out[0::2] = f0 + t
    out[1::2] = f0 - t
    return out


def split_fft(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of merge_fft: transforms of the even/odd coefficient halves."""
    s = _points(f.shape[0])[0::2]
    f0 = 0.5 * (f[0::2] + f[1::2])
    f1 = 0.5 * (f[0::2] - f[1::2]) / s
    return f0, f1


def fft(f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] == 2:
        return np.array([f[0] + 1j * f[1], f[0] - 1j * f[1]])
    return merge_fft(fft(f[0::2]), fft(f[1::2]))


def ifft(f: np.ndarray) -> np.ndarray:
    """Real coefficients from a transform of a real polynomial."""
    if f.shape[0] == 2:
        a = 0.5 * (f[0] + f[1])
        b = (f[0] - f[1]) / 2j
        return np.array([a.real, b.real])
    f0, f1 = split_fft(f)
    out = np.empty(f.shape[0], dtype=np.float64)
    out[0::2] = ifft(f0)
    out[1::2] = ifft(f1)
    return out


def adj_fft(f: np.ndarray) -> np.ndarray:
    """Transform of the ring adjoint f*(x) = f(x^-1); conjugation on the unit circle."""
    return np.conjugate(f)


def mul_coef(f, g) -> np.ndarray:
    """Negacyclic product in coefficient space, via the FFT (float precision)."""
    return ifft(fft(f) * fft(g))
