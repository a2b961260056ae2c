"""Fast Fourier lattice sampling: LDL tree construction and the nearest-plane
Gaussian sampler over the secret basis, all in the transform domain of fft.py.

The tree for a basis B is the recursive LDL decomposition of G = B B*.  Nodes
are (l10, left, right); at the bottom (transform length 2) the children are
plain floats sigma/||b_i~||, which serve as the per-coordinate sigmas for the
integer sampler.  The two real coordinates behind the final complex slot share
one sigma because the last-level Gram matrix is a real multiple of the
identity.
"""

from __future__ import annotations

import numpy as np

from .fft import adj_fft, merge_fft, split_fft
from .sampler import samplerz

Tree = tuple  # (l10: ndarray, left: Tree | float, right: Tree | float)


def gram(b00, b01, b10, b11):
    """Gram matrix entries of a 2x2 basis, transform domain."""
    g00 = b00 * adj_fft(b00) + b01 * adj_fft(b01)
    g01 = b00 * adj_fft(b10) + b01 * adj_fft(b11)
    g11 = b10 * adj_fft(b10) + b11 * adj_fft(b11)
    return g00, g01, adj_fft(g01), g11


def _ldl_tree(g00, g01, g10, g11) -> Tree:
    l10 = g10 / g00
    d00 = g00
    d11 = g11 - l10 * np.conjugate(l10) * g00
    if g00.shape[0] == 2:
        return (l10, d00, d11)
    d00_e, d00_o = split_fft(d00)
    d11_e, d11_o = split_fft(d11)
    left = _ldl_tree(d00_e, d00_o, adj_fft(d00_o), d00_e)
    right = _ldl_tree(d11_e, d11_o, adj_fft(d11_o), d11_e)
    return (l10, left, right)


def _normalize(node, sigma: float):
    l10, left, right = node
    if isinstance(left, tuple):
        return (l10, _normalize(left, sigma), _normalize(right, sigma))
    # Leaf D-values are real equal pairs; keep sigma / gs_length.
    return (l10, sigma / np.sqrt(left[0].real), sigma / np.sqrt(right[0].real))


def ldl_tree(b00, b01, b10, b11, sigma: float) -> Tree:
    """Normalized sampling tree for the basis rows (b00, b01), (b10, b11)."""
    return _normalize(_ldl_tree(*gram(b00, b01, b10, b11)), sigma)


def _sample_slot(t: complex, sigma_prime: float, sigmin: float, randombytes) -> np.ndarray:
    z_re = samplerz(t.real, sigma_prime, sigmin, randombytes)
    z_im = samplerz(t.imag, sigma_prime, sigmin, randombytes)
    return np.array([z_re + 1j * z_im, z_re - 1j * z_im])


def ff_sampling(t0: np.ndarray, t1: np.ndarray, tree: Tree, sigmin: float,
                randombytes) -> tuple[np.ndarray, np.ndarray]:
    """Integer vector (z0, z1), transform domain, close to the target (t0, t1)."""
    l10, left, right = tree
    if t0.shape[0] == 2:
        z1 = _sample_slot(t1[0], right, sigmin, randombytes)
        tb0 = t0 + (t1 - z1) * l10
        z0 = _sample_slot(tb0[0], left, sigmin, randombytes)
        return z0, z1
    z1 = merge_fft(*ff_sampling(*split_fft(t1), right, sigmin, randombytes))
    tb0 = t0 + (t1 - z1) * l10
    z0 = merge_fft(*ff_sampling(*split_fft(tb0), left, sigmin, randombytes))
    return z0, z1
