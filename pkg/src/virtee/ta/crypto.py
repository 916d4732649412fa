"""Core crypto services available to TAs.

Supported subset: SHA-1 and SHA-256 digests, HMAC-SHA-256, AES-128/256
in CTR and CBC (optional PKCS#7 padding), OS-backed random bytes.
Anything else signals not-supported — it never crashes and never
silently succeeds.
"""

from __future__ import annotations

import hashlib
import hmac as _hmac
import logging
import os
from enum import Enum, IntEnum

from cryptography.hazmat.primitives import padding as _padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .. import codes
from ..codes import TeeError

log = logging.getLogger("virtee.ta.crypto")

RANDOM_MAX = 1024 * 1024
AES_BLOCK = 16


class Algorithm(IntEnum):
    """Algorithm identifiers (GP-conventional values)."""

    SHA1 = 0x50000002
    SHA256 = 0x50000004
    HMAC_SHA256 = 0x30000004
    AES_CBC = 0x10000110
    AES_CTR = 0x10000210


DIGEST_ALGORITHMS = (Algorithm.SHA1, Algorithm.SHA256)
MAC_ALGORITHMS = (Algorithm.HMAC_SHA256,)
CIPHER_ALGORITHMS = (Algorithm.AES_CBC, Algorithm.AES_CTR)

AES_KEY_SIZES = (16, 32)

_HASHES = {Algorithm.SHA1: hashlib.sha1, Algorithm.SHA256: hashlib.sha256}


def _not_supported(what) -> TeeError:
    log.warning("crypto algorithm not supported: %#x", int(what))
    return TeeError(codes.ERROR_NOT_SUPPORTED, f"algorithm {int(what):#x}")


class OpState(Enum):
    INITIALIZED = "initialized"
    ACTIVE = "active"
    FINISHED = "finished"


class _StatefulOp:
    """init/update/final state machine shared by all operation kinds."""

    def __init__(self):
        self.state = OpState.INITIALIZED

    def _enter_active(self):
        if self.state is OpState.FINISHED:
            raise TeeError(codes.ERROR_BAD_STATE, "operation finished; reset first")
        self.state = OpState.ACTIVE

    def _enter_finished(self):
        if self.state is OpState.FINISHED:
            raise TeeError(codes.ERROR_BAD_STATE, "operation already finished")
        self.state = OpState.FINISHED


class DigestOp(_StatefulOp):
    def __init__(self, algorithm: int):
        super().__init__()
        if algorithm not in DIGEST_ALGORITHMS:
            raise _not_supported(algorithm)
        self.algorithm = Algorithm(algorithm)
        self._ctx = _HASHES[self.algorithm]()

    def update(self, data: bytes) -> None:
        self._enter_active()
        self._ctx.update(data)

    def final(self, data: bytes = b"") -> bytes:
        self._enter_finished()
        self._ctx.update(data)
        return self._ctx.digest()

    def reset(self) -> None:
        self._ctx = _HASHES[self.algorithm]()
        self.state = OpState.INITIALIZED


class MacOp(_StatefulOp):
    def __init__(self, algorithm: int, key: bytes):
        super().__init__()
        if algorithm not in MAC_ALGORITHMS:
            raise _not_supported(algorithm)
        if not key:
            raise TeeError(codes.ERROR_BAD_PARAMETERS, "empty MAC key")
        self.algorithm = Algorithm(algorithm)
        self._key = bytes(key)
        self._ctx = _hmac.new(self._key, digestmod=hashlib.sha256)

    def update(self, data: bytes) -> None:
        self._enter_active()
        self._ctx.update(data)

    def final(self, data: bytes = b"") -> bytes:
        self._enter_finished()
        self._ctx.update(data)
        return self._ctx.digest()

    def compare_final(self, data: bytes, expected: bytes) -> None:
        tag = self.final(data)
        if not _hmac.compare_digest(tag, bytes(expected)):
            raise TeeError(codes.ERROR_MAC_INVALID, "MAC comparison failed")

    def reset(self) -> None:
        self._ctx = _hmac.new(self._key, digestmod=hashlib.sha256)
        self.state = OpState.INITIALIZED


class CipherOp(_StatefulOp):
    """Symmetric cipher operation.

    CTR streams; CBC buffers input and emits at final so the optional
    PKCS#7 padding can be applied/stripped on the true last block.
    """

    def __init__(self, algorithm: int, encrypt: bool, key: bytes, iv: bytes,
                 padding: bool = False):
        super().__init__()
        if algorithm not in CIPHER_ALGORITHMS:
            raise _not_supported(algorithm)
        key, iv = bytes(key), bytes(iv)
        if len(key) not in AES_KEY_SIZES:
            raise TeeError(codes.ERROR_BAD_PARAMETERS,
                           f"AES key must be 16 or 32 bytes, got {len(key)}")
        if len(iv) != AES_BLOCK:
            raise TeeError(codes.ERROR_BAD_PARAMETERS,
                           f"IV must be {AES_BLOCK} bytes, got {len(iv)}")
        self.algorithm = Algorithm(algorithm)
        self.encrypt = encrypt
        if self.algorithm is Algorithm.AES_CTR and padding:
            raise TeeError(codes.ERROR_BAD_PARAMETERS, "CTR takes no padding")
        self.padding = padding
        self._key, self._iv = key, iv
        self._setup()

    def _setup(self):
        mode = (modes.CTR(self._iv) if self.algorithm is Algorithm.AES_CTR
                else modes.CBC(self._iv))
        cipher = Cipher(algorithms.AES(self._key), mode)
        self._ctx = cipher.encryptor() if self.encrypt else cipher.decryptor()
        self._buffer = bytearray()

    def update(self, data: bytes) -> bytes:
        self._enter_active()
        data = bytes(data)
        if self.algorithm is Algorithm.AES_CTR:
            return self._ctx.update(data)
        self._buffer += data
        return b""

    def final(self, data: bytes = b"") -> bytes:
        self._enter_finished()
        data = bytes(data)
        if self.algorithm is Algorithm.AES_CTR:
            return self._ctx.update(data) + self._ctx.finalize()
        buf = bytes(self._buffer) + data
        if self.encrypt:
            if self.padding:
                padder = _padding.PKCS7(AES_BLOCK * 8).padder()
                buf = padder.update(buf) + padder.finalize()
            elif len(buf) % AES_BLOCK:
                raise TeeError(codes.ERROR_BAD_PARAMETERS,
                               "input not a multiple of the cipher block size")
            return self._ctx.update(buf) + self._ctx.finalize()
        if len(buf) % AES_BLOCK or (self.padding and not buf):
            raise TeeError(codes.ERROR_BAD_PARAMETERS,
                           "ciphertext not a multiple of the cipher block size")
        plain = self._ctx.update(buf) + self._ctx.finalize()
        if self.padding:
            unpadder = _padding.PKCS7(AES_BLOCK * 8).unpadder()
            try:
                plain = unpadder.update(plain) + unpadder.finalize()
            except ValueError:
                raise TeeError(codes.ERROR_MAC_INVALID, "bad padding") from None
        return plain

    def reset(self) -> None:
        self._setup()
        self.state = OpState.INITIALIZED


def random_bytes(n: int) -> bytes:
    if not isinstance(n, int) or n < 0:
        raise TeeError(codes.ERROR_BAD_PARAMETERS, "byte count must be >= 0")
    if n > RANDOM_MAX:
        raise TeeError(codes.ERROR_BAD_PARAMETERS,
                       f"byte count exceeds {RANDOM_MAX}")
    return os.urandom(n)


def digest_oneshot(algorithm: int, data: bytes) -> bytes:
    op = DigestOp(algorithm)
    return op.final(data)


def mac_oneshot(algorithm: int, key: bytes, data: bytes) -> bytes:
    op = MacOp(algorithm, key)
    return op.final(data)
