"""Shared fixtures. Keypair generation is expensive, so production-profile
keys are created once per session (seeded, so byte-stable across runs)."""

import pytest

from pqballot.falcon import FALCON_512, generate_keypair, toy_profile

SEED_A = bytes(range(32))
SEED_B = bytes(range(1, 33))


@pytest.fixture(scope="session")
def keypair512():
    return generate_keypair(FALCON_512, seed=SEED_A)


@pytest.fixture(scope="session")
def keypair512_other():
    return generate_keypair(FALCON_512, seed=SEED_B)


@pytest.fixture(scope="session")
def toy64():
    return generate_keypair(toy_profile(64), seed=SEED_A)
