"""Crypto services against an independent pure-Python oracle.

Published anchors (FIPS / RFC test vectors) are frozen as hex so the
oracle itself is pinned; beyond that, implementation and oracle must
agree on fixed and randomized inputs, and incremental use must equal
one-shot use.
"""

import random

import pytest

import reference_crypto as ref
from virtee import codes
from virtee.codes import TeeError
from virtee.ta import crypto
from virtee.ta.crypto import Algorithm, CipherOp, DigestOp, MacOp, OpState

# deterministic fixed inputs shared by all "20 vectors" suites
_rng = random.Random(0x5EED)
FIXED_MESSAGES = [b"", b"a", b"abc", b"message digest", b"a" * 63, b"a" * 64,
                  b"a" * 65, bytes(range(256))] + \
                 [_rng.randbytes(n) for n in (1, 7, 16, 31, 55, 56, 57, 64,
                                              100, 256, 1000, 4096)]
assert len(FIXED_MESSAGES) >= 20


# -------------------------------------------------------- published anchors
PUBLISHED = [
    (Algorithm.SHA1, b"abc", "a9993e364706816aba3e25717850c26c9cd0d89d"),
    (Algorithm.SHA1, b"", "da39a3ee5e6b4b0d3255bfef95601890afd80709"),
    (Algorithm.SHA256, b"",
     "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"),
    (Algorithm.SHA256, b"abc",
     "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"),
]


@pytest.mark.parametrize("alg,msg,hexdigest", PUBLISHED)
def test_published_digest_anchors(alg, msg, hexdigest):
    assert crypto.digest_oneshot(alg, msg).hex() == hexdigest
    oracle = ref.sha1 if alg == Algorithm.SHA1 else ref.sha256
    assert oracle(msg).hex() == hexdigest


def test_published_hmac_anchor():
    # RFC 4231 test case 1 and 2
    key1 = b"\x0b" * 20
    expected1 = ("b0344c61d8db38535ca8afceaf0bf12b"
                 "881dc200c9833da726e9376c2e32cff7")
    assert crypto.mac_oneshot(Algorithm.HMAC_SHA256, key1,
                              b"Hi There").hex() == expected1
    assert ref.hmac_sha256(key1, b"Hi There").hex() == expected1
    expected2 = ("5bdcc146bf60754e6a042426089575c7"
                 "5a003f089d2739839dec58b964ec3843")
    assert crypto.mac_oneshot(Algorithm.HMAC_SHA256, b"Jefe",
                              b"what do ya want for nothing?").hex() == expected2


def test_published_aes_anchors():
    # SP 800-38A F.5.1 (AES-128 CTR) and F.2.1 (AES-128 CBC), first block
    key = bytes.fromhex("2b7e151628aed2a6abf7158809cf4f3c")
    ctr_iv = bytes.fromhex("f0f1f2f3f4f5f6f7f8f9fafbfcfdfeff")
    block = bytes.fromhex("6bc1bee22e409f96e93d7e117393172a")
    op = CipherOp(Algorithm.AES_CTR, True, key, ctr_iv)
    assert op.final(block).hex() == "874d6191b620e3261bef6864990db6ce"
    assert ref.aes_ctr(key, ctr_iv, block).hex() == \
        "874d6191b620e3261bef6864990db6ce"

    cbc_iv = bytes.fromhex("000102030405060708090a0b0c0d0e0f")
    op = CipherOp(Algorithm.AES_CBC, True, key, cbc_iv)
    assert op.final(block).hex() == "7649abac8119b246cee98e9b12e9197d"
    assert ref.aes_cbc_encrypt(key, cbc_iv, block).hex() == \
        "7649abac8119b246cee98e9b12e9197d"


# ------------------------------------------------------- oracle equivalence
@pytest.mark.parametrize("msg", FIXED_MESSAGES)
def test_sha1_matches_oracle(msg):
    assert crypto.digest_oneshot(Algorithm.SHA1, msg) == ref.sha1(msg)


@pytest.mark.parametrize("msg", FIXED_MESSAGES)
def test_sha256_matches_oracle(msg):
    assert crypto.digest_oneshot(Algorithm.SHA256, msg) == ref.sha256(msg)


@pytest.mark.parametrize("msg", FIXED_MESSAGES)
def test_hmac_matches_oracle(msg):
    key = b"\x42" * 20
    assert crypto.mac_oneshot(Algorithm.HMAC_SHA256, key, msg) == \
        ref.hmac_sha256(key, msg)


@pytest.mark.parametrize("msg", FIXED_MESSAGES)
@pytest.mark.parametrize("keylen", [16, 32])
def test_ctr_matches_oracle(msg, keylen):
    key = bytes(range(keylen))
    iv = bytes(range(100, 116))
    op = CipherOp(Algorithm.AES_CTR, True, key, iv)
    assert op.final(msg) == ref.aes_ctr(key, iv, msg)


@pytest.mark.parametrize("msg", FIXED_MESSAGES)
@pytest.mark.parametrize("keylen", [16, 32])
def test_cbc_padded_matches_oracle(msg, keylen):
    key = bytes(range(keylen))
    iv = bytes(range(16))
    op = CipherOp(Algorithm.AES_CBC, True, key, iv, padding=True)
    assert op.final(msg) == ref.aes_cbc_encrypt(key, iv, ref.pkcs7_pad(msg))


def test_cbc_unpadded_matches_oracle():
    key, iv = bytes(16), bytes(range(16))
    for msg in FIXED_MESSAGES:
        msg = msg[: len(msg) - len(msg) % 16]
        op = CipherOp(Algorithm.AES_CBC, True, key, iv)
        assert op.final(msg) == ref.aes_cbc_encrypt(key, iv, msg)


# ------------------------------------------------ randomized round trips
def test_randomized_cipher_roundtrips_1000():
    rng = random.Random(0xABCD)
    for i in range(1000):
        key = rng.randbytes(rng.choice((16, 32)))
        iv = rng.randbytes(16)
        alg = rng.choice((Algorithm.AES_CTR, Algorithm.AES_CBC))
        padding = alg == Algorithm.AES_CBC and bool(rng.getrandbits(1))
        n = rng.randrange(0, 200)
        if alg == Algorithm.AES_CBC and not padding:
            n -= n % 16
        plain = rng.randbytes(n)

        enc = CipherOp(alg, True, key, iv, padding=padding)
        ct = enc.final(plain)
        dec = CipherOp(alg, False, key, iv, padding=padding)
        assert dec.final(ct) == plain

        # independent-route check on a sample of cases
        if i % 10 == 0:
            if alg == Algorithm.AES_CTR:
                assert ct == ref.aes_ctr(key, iv, plain)
            elif padding:
                assert ct == ref.aes_cbc_encrypt(key, iv, ref.pkcs7_pad(plain))
            else:
                assert ct == ref.aes_cbc_encrypt(key, iv, plain)


def test_randomized_digest_mac_equivalence_1000():
    rng = random.Random(0x1234)
    for _ in range(1000):
        msg = rng.randbytes(rng.randrange(0, 300))
        assert crypto.digest_oneshot(Algorithm.SHA256, msg) == ref.sha256(msg)
        key = rng.randbytes(rng.randrange(1, 80))
        assert crypto.mac_oneshot(Algorithm.HMAC_SHA256, key, msg) == \
            ref.hmac_sha256(key, msg)


# ------------------------------------------------- incremental == one-shot
def test_incremental_digest_equals_oneshot():
    msg = bytes(range(256)) * 5
    for alg in crypto.DIGEST_ALGORITHMS:
        op = DigestOp(alg)
        for i in range(0, len(msg), 37):
            op.update(msg[i : i + 37])
        assert op.final() == crypto.digest_oneshot(alg, msg)


def test_incremental_mac_equals_oneshot():
    msg, key = bytes(range(256)) * 3, b"key-material"
    op = MacOp(Algorithm.HMAC_SHA256, key)
    for i in range(0, len(msg), 53):
        op.update(msg[i : i + 53])
    assert op.final() == crypto.mac_oneshot(Algorithm.HMAC_SHA256, key, msg)


def test_incremental_ctr_equals_oneshot():
    key, iv, msg = bytes(16), bytes(16), bytes(range(200))
    op = CipherOp(Algorithm.AES_CTR, True, key, iv)
    chunks = b"".join(op.update(msg[i : i + 13]) for i in range(0, len(msg), 13))
    chunks += op.final()
    oneshot = CipherOp(Algorithm.AES_CTR, True, key, iv)
    assert chunks == oneshot.final(msg)


# -------------------------------------------------------------- state model
def test_state_machine_enforced():
    op = DigestOp(Algorithm.SHA256)
    assert op.state is OpState.INITIALIZED
    op.update(b"x")
    assert op.state is OpState.ACTIVE
    op.final()
    assert op.state is OpState.FINISHED
    with pytest.raises(TeeError) as exc:
        op.update(b"y")
    assert exc.value.code == codes.ERROR_BAD_STATE
    with pytest.raises(TeeError):
        op.final()
    op.reset()
    assert op.final(b"abc") == crypto.digest_oneshot(Algorithm.SHA256, b"abc")


def test_mac_compare_final():
    key = b"k" * 16
    tag = crypto.mac_oneshot(Algorithm.HMAC_SHA256, key, b"payload")
    MacOp(Algorithm.HMAC_SHA256, key).compare_final(b"payload", tag)
    with pytest.raises(TeeError) as exc:
        MacOp(Algorithm.HMAC_SHA256, key).compare_final(b"payload", b"\x00" * 32)
    assert exc.value.code == codes.ERROR_MAC_INVALID


def test_bad_padding_reports_mac_invalid():
    key, iv = bytes(16), bytes(16)
    ct = CipherOp(Algorithm.AES_CBC, True, key, iv).final(b"\x01" * 16)
    dec = CipherOp(Algorithm.AES_CBC, False, key, iv, padding=True)
    with pytest.raises(TeeError) as exc:
        dec.final(ct[:-1] + bytes([ct[-1] ^ 1]))
    assert exc.value.code == codes.ERROR_MAC_INVALID


# -------------------------------------------------------------- rejections
def test_unsupported_algorithm_is_signalled(caplog):
    with caplog.at_level("WARNING", logger="virtee.ta.crypto"):
        with pytest.raises(TeeError) as exc:
            DigestOp(0x50000999)
    assert exc.value.code == codes.ERROR_NOT_SUPPORTED
    assert any("not supported" in r.message for r in caplog.records)


def test_cipher_parameter_validation():
    with pytest.raises(TeeError):
        CipherOp(Algorithm.AES_CTR, True, b"short", bytes(16))
    with pytest.raises(TeeError):
        CipherOp(Algorithm.AES_CTR, True, bytes(16), b"shortiv")
    with pytest.raises(TeeError):
        CipherOp(Algorithm.AES_CTR, True, bytes(16), bytes(16), padding=True)
    with pytest.raises(TeeError):
        CipherOp(Algorithm.AES_CBC, True, bytes(16), bytes(16)).final(b"x")
    with pytest.raises(TeeError):
        CipherOp(Algorithm.AES_CBC, False, bytes(16), bytes(16)).final(b"x" * 15)


def test_random_bytes_bounds():
    assert len(crypto.random_bytes(0)) == 0
    assert len(crypto.random_bytes(64)) == 64
    assert crypto.random_bytes(64) != crypto.random_bytes(64)
    with pytest.raises(TeeError):
        crypto.random_bytes(-1)
    with pytest.raises(TeeError):
        crypto.random_bytes(crypto.RANDOM_MAX + 1)
