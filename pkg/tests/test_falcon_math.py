"""Oracle tests for the lattice machinery: transforms against schoolbook
arithmetic, samplers against exact distributions, and the key equation."""

import numpy as np
import pytest
from scipy import stats

from pqballot.falcon import fft, ntt
from pqballot.falcon.ntrugen import (
    field_norm,
    galois_conjugate,
    lift,
    ntru_gen,
    poly_mul,
)
from pqballot.falcon.rng import BufferedRandom, ShakeStream
from pqballot.falcon.sampler import MAX_SIGMA, base_sampler, gauss_poly, samplerz

rng_np = np.random.default_rng(7)


def school_negacyclic(f, g):
    """Brute-force product mod (x^n + 1); the independent multiplication oracle."""
    n = len(f)
    out = [0] * n
    for i in range(n):
        for j in range(n):
            k = i + j
            if k < n:
                out[k] += f[i] * g[j]
            else:
                out[k - n] -= f[i] * g[j]
    return out


@pytest.mark.parametrize("n", [2, 4, 16, 64, 512])
def test_fft_roundtrip(n):
    f = rng_np.integers(-100, 100, n)
    assert np.allclose(fft.ifft(fft.fft(f)), f, atol=1e-6)


@pytest.mark.parametrize("n", [4, 16, 64])
def test_fft_multiplication_matches_schoolbook(n):
    f = rng_np.integers(-40, 40, n)
    g = rng_np.integers(-40, 40, n)
    assert np.allclose(fft.mul_coef(f, g), school_negacyclic(list(f), list(g)), atol=1e-5)


@pytest.mark.parametrize("n", [4, 64, 256])
def test_split_merge_are_inverse(n):
    f = rng_np.standard_normal(n)
    t = fft.fft(f)
    f0, f1 = fft.split_fft(t)
    assert np.allclose(fft.merge_fft(f0, f1), t)
    assert np.allclose(fft.ifft(f0), f[0::2], atol=1e-9)
    assert np.allclose(fft.ifft(f1), f[1::2], atol=1e-9)


@pytest.mark.parametrize("n", [16, 512, 1024])
def test_ntt_roundtrip(n):
    f = rng_np.integers(0, ntt.Q, n)
    assert np.array_equal(ntt.intt(ntt.ntt(f)), f % ntt.Q)


@pytest.mark.parametrize("n", [8, 64])
def test_ntt_multiplication_matches_schoolbook(n):
    f = rng_np.integers(-200, 200, n)
    g = rng_np.integers(-200, 200, n)
    want = np.array(school_negacyclic(list(f), list(g))) % ntt.Q
    assert np.array_equal(ntt.mul_zq(f, g), want)


def test_ntt_division_inverts_multiplication():
    f = rng_np.integers(0, ntt.Q, 64)
    g = rng_np.integers(1, 50, 64)
    if not ntt.is_invertible(g):
        pytest.skip("rare non-invertible draw")
    h = ntt.div_zq(f, g)
    assert np.array_equal(ntt.mul_zq(h, g), f % ntt.Q)


@pytest.mark.parametrize("n", [4, 32, 128])
def test_poly_mul_matches_schoolbook(n):
    f = [int(x) for x in rng_np.integers(-10**6, 10**6, n)]
    g = [int(x) for x in rng_np.integers(-10**6, 10**6, n)]
    assert poly_mul(f, g) == school_negacyclic(f, g)


def test_poly_mul_handles_huge_coefficients():
    f = [3 ** 400, -(2 ** 555), 1, 0]
    g = [7, 11, -(5 ** 300), 2]
    assert poly_mul(f, g) == school_negacyclic(f, g)


def test_field_norm_is_multiplicative_norm():
    # N(a) == a(x) * a(-x) viewed in the half ring, for random a.
    a = [int(x) for x in rng_np.integers(-20, 20, 16)]
    prod = poly_mul(a, galois_conjugate(a))
    assert all(c == 0 for c in prod[1::2])  # product lies in the subring
    assert field_norm(a) == prod[0::2]


def test_lift_then_evaluate():
    a = [1, 2, 3, 4]
    lifted = lift(a)
    assert lifted == [1, 0, 2, 0, 3, 0, 4, 0]


def chi_square_pvalue(observed, expected, min_expected=10.0):
    """Chi-square GOF with sparse cells pooled so every cell expects >= 10."""
    obs_pool, exp_pool = [], []
    o_acc = e_acc = 0.0
    for o, e in sorted(zip(observed, expected), key=lambda t: -t[1]):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_pool.append(o_acc)
            exp_pool.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc:
        obs_pool[-1] += o_acc
        exp_pool[-1] += e_acc
    obs_pool = np.array(obs_pool)
    exp_pool = np.array(exp_pool)
    chi = float(np.sum((obs_pool - exp_pool) ** 2 / exp_pool))
    return 1 - stats.chi2.cdf(chi, len(exp_pool) - 1)


def test_base_sampler_distribution():
    rng = BufferedRandom(ShakeStream(b"rcdt-check"))
    n_draws = 40000
    counts = np.bincount([base_sampler(rng) for _ in range(n_draws)], minlength=19)
    z = np.arange(19).astype(float)
    p = np.exp(-z * z / (2 * MAX_SIGMA ** 2))
    p /= p.sum()
    assert chi_square_pvalue(counts, p * n_draws) > 0.001


@pytest.mark.parametrize("mu,sigma", [(0.0, 1.5), (0.3, 1.7), (-2.7, 1.3)])
def test_samplerz_matches_discrete_gaussian(mu, sigma):
    rng = BufferedRandom(ShakeStream(f"sz-{mu}-{sigma}".encode()))
    draws = np.array([samplerz(mu, sigma, 1.2, rng) for _ in range(25000)])
    zs = np.arange(int(mu - 9 * sigma), int(mu + 9 * sigma) + 1)
    p = np.exp(-((zs - mu) ** 2) / (2 * sigma ** 2))
    p /= p.sum()
    observed = np.array([(draws == v).sum() for v in zs])
    assert chi_square_pvalue(observed, p * draws.shape[0]) > 0.001, (mu, sigma)


def test_gauss_poly_scale_and_parity():
    rng = BufferedRandom(ShakeStream(b"gp"))
    f = gauss_poly(512, ntt.Q, rng)
    assert len(f) == 512 and sum(f) % 2 == 1
    want = 1.17 * np.sqrt(ntt.Q / 1024)
    assert abs(np.std(f) - want) / want < 0.25


def test_ntru_gen_solves_the_key_equation():
    rng = BufferedRandom(ShakeStream(b"ntru-eq"))
    f, g, F, G = ntru_gen(64, rng)
    residue = [a - b for a, b in zip(poly_mul(f, G), poly_mul(g, F))]
    assert residue[0] == ntt.Q
    assert not any(residue[1:])
    assert max(map(abs, F)) <= 127 and max(map(abs, G)) <= 127
