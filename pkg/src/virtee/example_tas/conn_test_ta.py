"""Connection-test TA: echoes parameters, rejects on demand, and
exercises allocation and storage so client plumbing can be probed end
to end."""

from virtee import codes, wire
from virtee.codes import TeeError

TA_ABI_VERSION = 1
TA_PROPERTIES = {
    "uuid": "11111111-2222-3333-4444-555555555555",
    "dataSize": 64 * 1024,
    "singleInstance": True,
    "multiSession": True,
}

CMD_PING = 0
CMD_ECHO_VALUE = 1
CMD_ECHO_MEMREF = 2
CMD_REJECT = 3
CMD_LOAD_OBJECT = 4
CMD_ALLOC = 5
CMD_FREE_ALL = 6

# TA-defined codes
RC_OPEN_REJECTED = 0xF0010000
RC_REJECTED = 0xF0010001
RC_BAD_COMMAND = 0xF0010002

OPEN_REJECT_MAGIC = 0xDEADDEAD

_allocations = []


def ta_create(api):
    api.log("conn-test TA created")


def ta_destroy(api):
    api.log("conn-test TA destroyed")


def ta_open_session(api, session, params):
    first = params.slots[0]
    if isinstance(first, wire.ValueParam) and first.a == OPEN_REJECT_MAGIC:
        return RC_OPEN_REJECTED
    session.ctx = {"invokes": 0}
    return codes.SUCCESS


def ta_close_session(api, session):
    api.log("session closed after %d invokes", session.ctx["invokes"])


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


def _memref_read(slot):
    if slot.region_id is not None:
        return bytes(slot.buffer[: slot.length])
    return bytes(slot.data)


def ta_invoke_command(api, session, command_id, params):
    session.ctx["invokes"] += 1
    s0, s1 = params.slots[0], params.slots[1]

    if command_id == CMD_PING:
        return codes.SUCCESS

    if command_id == CMD_ECHO_VALUE:
        if not isinstance(s0, wire.ValueParam) or not isinstance(s1, wire.ValueParam):
            return codes.ERROR_BAD_PARAMETERS
        s1.a, s1.b = s0.a, s0.b
        return codes.SUCCESS

    if command_id == CMD_ECHO_MEMREF:
        if not isinstance(s0, wire.MemRefParam) or not isinstance(s1, wire.MemRefParam):
            return codes.ERROR_BAD_PARAMETERS
        return _memref_write(s1, _memref_read(s0))

    if command_id == CMD_REJECT:
        return RC_REJECTED

    if command_id == CMD_LOAD_OBJECT:
        if not isinstance(s0, wire.MemRefParam) or not isinstance(s1, wire.MemRefParam):
            return codes.ERROR_BAD_PARAMETERS
        try:
            handle = api.storage_open(_memref_read(s0))
            data = handle.read(len(handle.data))
            handle.close()
        except TeeError as exc:
            return exc.code
        return _memref_write(s1, data)

    if command_id == CMD_ALLOC:
        if not isinstance(s0, wire.ValueParam):
            return codes.ERROR_BAD_PARAMETERS
        try:
            _allocations.append(api.alloc(s0.a))
        except TeeError as exc:
            return exc.code
        return codes.SUCCESS

    if command_id == CMD_FREE_ALL:
        while _allocations:
            api.free(_allocations.pop())
        return codes.SUCCESS

    return RC_BAD_COMMAND
