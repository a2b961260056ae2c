"""Post-quantum signature scheme: keygen, salted signing, verification, encodings."""

from .scheme import (
    FALCON_512,
    FALCON_1024,
    PROFILES,
    KeyPair,
    SecretKey,
    Signature,
    SignatureProfile,
    decode_signature,
    encode_signature,
    generate_keypair,
    hash_to_point,
    load_keypair,
    profile_by_code,
    save_keypair,
    sign,
    sign_with_salt,
    toy_profile,
    verify,
)

__all__ = [
    "FALCON_512",
    "FALCON_1024",
    "PROFILES",
    "KeyPair",
    "SecretKey",
    "Signature",
    "SignatureProfile",
    "decode_signature",
    "encode_signature",
    "generate_keypair",
    "hash_to_point",
    "load_keypair",
    "profile_by_code",
    "save_keypair",
    "sign",
    "sign_with_salt",
    "toy_profile",
    "verify",
]
