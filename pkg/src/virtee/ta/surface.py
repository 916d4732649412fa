"""Declared Core API surface.

Every operation a TA can name is listed here and resolves to either a
working implementation or a stub that logs and returns not-supported.
Nothing in the declared surface is ever simply absent; the audit in the
test suite enforces that.
"""

from __future__ import annotations

import logging

from .. import codes
from . import crypto

log = logging.getLogger("virtee.ta.surface")

# Operations with working implementations, mapped to what realizes them.
# Instance-bound services (memory, storage, properties) resolve to the
# names of TAInstanceApi methods; resolve() binds them per instance.
IMPLEMENTED: dict[str, object] = {
    # memory management
    "TEE_Malloc": "alloc",
    "TEE_Free": "free",
    # property access
    "TEE_GetPropertyAsU32": "get_property_u32",
    # digests
    "TEE_DigestInit": crypto.DigestOp,
    "TEE_DigestUpdate": crypto.DigestOp.update,
    "TEE_DigestDoFinal": crypto.DigestOp.final,
    # MACs
    "TEE_MACInit": crypto.MacOp,
    "TEE_MACUpdate": crypto.MacOp.update,
    "TEE_MACComputeFinal": crypto.MacOp.final,
    "TEE_MACCompareFinal": crypto.MacOp.compare_final,
    # symmetric ciphers
    "TEE_CipherInit": crypto.CipherOp,
    "TEE_CipherUpdate": crypto.CipherOp.update,
    "TEE_CipherDoFinal": crypto.CipherOp.final,
    "TEE_ResetOperation": crypto.CipherOp.reset,
    # entropy
    "TEE_GenerateRandom": crypto.random_bytes,
    # trusted storage
    "TEE_CreatePersistentObject": "storage_create",
    "TEE_OpenPersistentObject": "storage_open",
    "TEE_ReadObjectData": "storage_read",
    "TEE_WriteObjectData": "storage_write",
    "TEE_SeekObjectData": "storage_seek",
    "TEE_CloseObject": "storage_close",
    "TEE_CloseAndDeletePersistentObject": "storage_delete",
    # logging
    "TEE_LogPrintf": "log",
}

# Declared but deliberately not implemented: each call routes to a stub
# returning not-supported with a log line.
UNIMPLEMENTED: tuple[str, ...] = (
    # asymmetric crypto
    "TEE_AsymmetricEncrypt",
    "TEE_AsymmetricDecrypt",
    "TEE_AsymmetricSignDigest",
    "TEE_AsymmetricVerifyDigest",
    # authenticated encryption
    "TEE_AEInit",
    "TEE_AEUpdate",
    "TEE_AEUpdateAAD",
    "TEE_AEEncryptFinal",
    "TEE_AEDecryptFinal",
    # key derivation / key objects beyond symmetric use
    "TEE_DeriveKey",
    "TEE_GenerateKey",
    # arithmetic (big-number) API
    "TEE_BigIntInit",
    "TEE_BigIntConvertFromOctetString",
    "TEE_BigIntConvertToOctetString",
    "TEE_BigIntAdd",
    "TEE_BigIntSub",
    "TEE_BigIntMul",
    "TEE_BigIntDiv",
    "TEE_BigIntMod",
    "TEE_BigIntExpMod",
    "TEE_BigIntInvMod",
    "TEE_BigIntCmp",
    "TEE_BigIntShiftRight",
    # misc
    "TEE_GetCancellationFlag",
    "TEE_MaskCancellation",
    "TEE_UnmaskCancellation",
    "TEE_Panic",
    "TEE_GetSystemTime",
    "TEE_Wait",
    "TEE_GetREETime",
)

SURFACE: tuple[str, ...] = tuple(IMPLEMENTED) + UNIMPLEMENTED


def declare_unimplemented(api_name: str) -> int:
    """Record that a declared-but-unimplemented operation was invoked."""
    log.warning("core API operation %s is not supported", api_name)
    return codes.ERROR_NOT_SUPPORTED


def _make_stub(name: str):
    def stub(*args, **kwargs):
        return declare_unimplemented(name)

    stub.__name__ = f"stub_{name}"
    stub.unimplemented = True
    return stub


def resolve(name: str, api=None):
    """Resolve a declared operation name to a callable.

    Instance-bound operations require ``api`` (a TAInstanceApi); without
    one they resolve to the unbound attribute for audit purposes.
    Names outside the declared surface raise KeyError.
    """
    if name in IMPLEMENTED:
        target = IMPLEMENTED[name]
        if isinstance(target, str):
            if api is not None:
                return getattr(api, target)
            from .runtime import TAInstanceApi

            return getattr(TAInstanceApi, target)
        return target
    if name in UNIMPLEMENTED:
        return _make_stub(name)
    raise KeyError(f"{name} is outside the declared core API surface")
