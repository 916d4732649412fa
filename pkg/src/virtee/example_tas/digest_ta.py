"""Digest TA: hashes a memory reference and stores/loads small blobs in
its secure-storage namespace."""

from virtee import codes, wire
from virtee.codes import TeeError
from virtee.ta.crypto import Algorithm, DigestOp

TA_ABI_VERSION = 1
TA_PROPERTIES = {
    "uuid": "aaaaaaaa-bbbb-4ccc-8ddd-eeeeeeeeeeee",
    "singleInstance": True,
    "multiSession": True,
    "instanceKeepAlive": True,
}

CMD_HASH = 1
CMD_STORE = 2
CMD_LOAD = 3

RC_BAD_COMMAND = 0xF0020001


def ta_create(api):
    api.log("digest TA created")


def ta_destroy(api):
    api.log("digest TA destroyed")


def ta_open_session(api, session, params):
    return codes.SUCCESS


def ta_close_session(api, session):
    pass


def _memref_read(slot):
    if slot.region_id is not None:
        return bytes(slot.buffer[: slot.length])
    return bytes(slot.data)


def _memref_write(slot, data):
    if slot.length < len(data):
        slot.length = len(data)
        return codes.ERROR_SHORT_BUFFER
    if slot.region_id is not None:
        slot.buffer[: len(data)] = data
    else:
        slot.data = data
    slot.length = len(data)
    return codes.SUCCESS


def ta_invoke_command(api, session, command_id, params):
    s0, s1 = params.slots[0], params.slots[1]

    if command_id == CMD_HASH:
        if not isinstance(s0, wire.MemRefParam) or not isinstance(s1, wire.MemRefParam):
            return codes.ERROR_BAD_PARAMETERS
        digest = DigestOp(Algorithm.SHA256).final(_memref_read(s0))
        return _memref_write(s1, digest)

    if command_id == CMD_STORE:
        if not isinstance(s0, wire.MemRefParam) or not isinstance(s1, wire.MemRefParam):
            return codes.ERROR_BAD_PARAMETERS
        try:
            api.storage_create(
                _memref_read(s0),
                wire.STORAGE_READ | wire.STORAGE_WRITE | wire.STORAGE_OVERWRITE,
                _memref_read(s1),
            ).close()
        except TeeError as exc:
            return exc.code
        return codes.SUCCESS

    if command_id == CMD_LOAD:
        if not isinstance(s0, wire.MemRefParam) or not isinstance(s1, wire.MemRefParam):
            return codes.ERROR_BAD_PARAMETERS
        try:
            handle = api.storage_open(_memref_read(s0))
            data = handle.read(len(handle.data))
            handle.close()
        except TeeError as exc:
            return exc.code
        return _memref_write(s1, data)

    return RC_BAD_COMMAND
