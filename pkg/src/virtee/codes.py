"""GP-style return codes and return origins.

The numeric values mirror the published GlobalPlatform constants
(success = 0, errors in the 0xFFFF00xx range).  The full table is
documented in docs/codes.md.
"""

from __future__ import annotations

from enum import IntEnum

SUCCESS = 0x00000000

ERROR_GENERIC = 0xFFFF0000
ERROR_ACCESS_DENIED = 0xFFFF0001
ERROR_CANCEL = 0xFFFF0002
ERROR_ACCESS_CONFLICT = 0xFFFF0003
ERROR_EXCESS_DATA = 0xFFFF0004
ERROR_BAD_FORMAT = 0xFFFF0005
ERROR_BAD_PARAMETERS = 0xFFFF0006
ERROR_BAD_STATE = 0xFFFF0007
ERROR_ITEM_NOT_FOUND = 0xFFFF0008
ERROR_NOT_IMPLEMENTED = 0xFFFF0009
ERROR_NOT_SUPPORTED = 0xFFFF000A
ERROR_NO_DATA = 0xFFFF000B
ERROR_OUT_OF_MEMORY = 0xFFFF000C
ERROR_BUSY = 0xFFFF000D
ERROR_COMMUNICATION = 0xFFFF000E
ERROR_SECURITY = 0xFFFF000F
ERROR_SHORT_BUFFER = 0xFFFF0010

# TEE internal range
ERROR_MAC_INVALID = 0xFFFF3071
ERROR_TARGET_DEAD = 0xFFFF3024


class Origin(IntEnum):
    """Which layer produced a return code."""

    API = 1
    COMMS = 2
    TEE = 3
    TRUSTED_APP = 4


_NAMES = {
    SUCCESS: "success",
    ERROR_GENERIC: "generic",
    ERROR_ACCESS_DENIED: "access-denied",
    ERROR_CANCEL: "cancel",
    ERROR_ACCESS_CONFLICT: "access-conflict",
    ERROR_EXCESS_DATA: "excess-data",
    ERROR_BAD_FORMAT: "bad-format",
    ERROR_BAD_PARAMETERS: "bad-parameters",
    ERROR_BAD_STATE: "bad-state",
    ERROR_ITEM_NOT_FOUND: "item-not-found",
    ERROR_NOT_IMPLEMENTED: "not-implemented",
    ERROR_NOT_SUPPORTED: "not-supported",
    ERROR_NO_DATA: "no-data",
    ERROR_OUT_OF_MEMORY: "out-of-memory",
    ERROR_BUSY: "busy",
    ERROR_COMMUNICATION: "communication",
    ERROR_SECURITY: "security",
    ERROR_SHORT_BUFFER: "short-buffer",
    ERROR_MAC_INVALID: "mac-invalid",
    ERROR_TARGET_DEAD: "target-dead",
}


def code_name(code: int) -> str:
    return _NAMES.get(code, f"0x{code:08X}")


class TeeError(Exception):
    """Carries a GP return code through TA-side API layers."""

    def __init__(self, code: int, message: str = ""):
        super().__init__(message or code_name(code))
        self.code = code
