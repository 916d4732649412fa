"""End-to-end behaviour against a live framework instance."""

import os
import signal
import subprocess
import sys
import time
from pathlib import Path

import pytest

from virtee import client, codes, wire
from virtee.example_tas import CONN_TEST_UUID, DIGEST_UUID, conn_test_ta, digest_ta
from virtee.testbed import wait_gone

HERE = Path(__file__).parent


def ta_pid(ctx, uuid):
    for e in ctx.list_tas():
        if str(e.uuid) == uuid and e.pid:
            return e.pid
    return None


# ----------------------------------------------------------------- sessions
def test_session_lifecycle_and_echo(ctx):
    sess = ctx.open_session(CONN_TEST_UUID)
    sess.invoke_command(conn_test_ta.CMD_PING)

    v_in = client.value(a=123, b=456, direction=wire.Direction.IN)
    v_out = client.value(direction=wire.Direction.OUT)
    sess.invoke_command(conn_test_ta.CMD_ECHO_VALUE, [v_in, v_out])
    assert (v_out.a, v_out.b) == (123, 456)
    sess.close()


def test_ta_return_code_and_origin_pass_through(ctx):
    sess = ctx.open_session(CONN_TEST_UUID)
    with pytest.raises(client.ClientError) as exc:
        sess.invoke_command(conn_test_ta.CMD_REJECT)
    assert exc.value.code == conn_test_ta.RC_REJECTED
    assert exc.value.origin == codes.Origin.TRUSTED_APP
    # the session survives a TA-level rejection
    sess.invoke_command(conn_test_ta.CMD_PING)
    sess.close()


def test_unknown_ta_uuid(ctx):
    with pytest.raises(client.ClientError) as exc:
        ctx.open_session("99999999-9999-4999-8999-999999999999")
    assert exc.value.code == codes.ERROR_ITEM_NOT_FOUND
    assert exc.value.origin == codes.Origin.TEE


def test_open_rejection_from_ta(ctx):
    with pytest.raises(client.ClientError) as exc:
        ctx.open_session(CONN_TEST_UUID, [client.value(
            a=conn_test_ta.OPEN_REJECT_MAGIC, direction=wire.Direction.IN)])
    assert exc.value.code == conn_test_ta.RC_OPEN_REJECTED
    assert exc.value.origin == codes.Origin.TRUSTED_APP


def test_invoke_on_closed_session(ctx):
    sess = ctx.open_session(CONN_TEST_UUID)
    sess.close()
    with pytest.raises(client.ClientError) as exc:
        ctx._invoke(sess, conn_test_ta.CMD_PING, None)
    assert exc.value.code == codes.ERROR_BAD_PARAMETERS
    assert exc.value.origin == codes.Origin.API


def test_multi_session_single_instance(framework, ctx):
    with client.initialize_context(framework.socket_path) as ctx2:
        s1 = ctx.open_session(CONN_TEST_UUID)
        s2 = ctx2.open_session(CONN_TEST_UUID)
        pid = ta_pid(ctx, CONN_TEST_UUID)
        assert pid is not None
        s1.invoke_command(conn_test_ta.CMD_PING)
        s2.invoke_command(conn_test_ta.CMD_PING)
        # singleInstance: both sessions served by one process
        assert ta_pid(ctx2, CONN_TEST_UUID) == pid
        s1.close()
        s2.close()


def test_instance_retires_when_idle(ctx):
    sess = ctx.open_session(CONN_TEST_UUID)
    pid = ta_pid(ctx, CONN_TEST_UUID)
    sess.close()
    # conn-test TA has no keep-alive: the process must go away
    assert wait_gone(pid, 5.0)
    assert ta_pid(ctx, CONN_TEST_UUID) is None


def test_keep_alive_instance_persists(ctx):
    sess = ctx.open_session(DIGEST_UUID)
    pid = ta_pid(ctx, DIGEST_UUID)
    sess.close()
    time.sleep(0.5)
    assert ta_pid(ctx, DIGEST_UUID) == pid  # instanceKeepAlive
    # and state survives: store in one session, load in a later one
    sess2 = ctx.open_session(DIGEST_UUID)
    assert ta_pid(ctx, DIGEST_UUID) == pid
    sess2.close()


def test_short_buffer_reports_required_length(ctx):
    sess = ctx.open_session(CONN_TEST_UUID)
    out = client.tmpref(b"\x00" * 4, direction=wire.Direction.OUT)
    with pytest.raises(client.ClientError) as exc:
        sess.invoke_command(conn_test_ta.CMD_ECHO_MEMREF,
                            [client.tmpref(b"x" * 100, wire.Direction.IN), out])
    assert exc.value.code == codes.ERROR_SHORT_BUFFER
    assert out.length == 100  # required size came back
    sess.close()


# ------------------------------------------------------------ shared memory
def test_shared_memory_roundtrip(ctx):
    sess = ctx.open_session(CONN_TEST_UUID)
    memory = ctx.allocate_shared_memory(8192)
    payload = os.urandom(4096)
    memory.buffer[:4096] = payload
    sess.invoke_command(conn_test_ta.CMD_ECHO_MEMREF, [
        client.memref(memory, 0, 4096, wire.Direction.IN),
        client.memref(memory, 4096, 4096, wire.Direction.OUT),
    ])
    assert bytes(memory.buffer[4096:]) == payload
    memory.release()
    sess.close()


def test_registered_memory_syncs_both_ways(ctx):
    sess = ctx.open_session(CONN_TEST_UUID)
    buf = bytearray(b"A" * 64 + b"\x00" * 64)
    memory = ctx.register_shared_memory(buf)
    sess.invoke_command(conn_test_ta.CMD_ECHO_MEMREF, [
        client.memref(memory, 0, 64, wire.Direction.IN),
        client.memref(memory, 64, 64, wire.Direction.OUT),
    ])
    assert buf[64:] == b"A" * 64  # output copied back into the caller's buffer
    memory.release()
    sess.close()


def test_out_of_bounds_memref_rejected(ctx):
    sess = ctx.open_session(CONN_TEST_UUID)
    memory = ctx.allocate_shared_memory(1024)
    with pytest.raises(client.ClientError) as exc:
        sess.invoke_command(conn_test_ta.CMD_ECHO_MEMREF, [
            client.memref(memory, 512, 1024, wire.Direction.IN),
            client.tmpref(b"\x00" * 16, wire.Direction.OUT),
        ])
    assert exc.value.code == codes.ERROR_BAD_PARAMETERS
    memory.release()
    sess.close()


def test_oversized_region_refused(ctx):
    with pytest.raises(client.ClientError) as exc:
        ctx.allocate_shared_memory(17 * 1024 * 1024)  # above the 16 MiB cap
    assert exc.value.code == codes.ERROR_BAD_PARAMETERS


def test_region_backing_file_lifecycle(ctx):
    memory = ctx.allocate_shared_memory(4096)
    token = memory._region.token
    assert os.path.exists(token)
    memory.release()
    deadline = time.monotonic() + 1.0
    while os.path.exists(token) and time.monotonic() < deadline:
        time.sleep(0.02)
    assert not os.path.exists(token)


# ------------------------------------------------------------ secure storage
def _store(sess, oid, data):
    sess.invoke_command(digest_ta.CMD_STORE,
                        [client.tmpref(oid, wire.Direction.IN),
                         client.tmpref(data, wire.Direction.IN)])


def _load(sess, cmd, oid, size=256):
    out = client.tmpref(b"\x00" * size, direction=wire.Direction.OUT)
    sess.invoke_command(cmd, [client.tmpref(oid, wire.Direction.IN), out])
    return out.data[: out.length]


def test_storage_cross_ta_namespacing(ctx):
    dsess = ctx.open_session(DIGEST_UUID)
    _store(dsess, b"ns-object", b"digest TA data")
    assert _load(dsess, digest_ta.CMD_LOAD, b"ns-object") == b"digest TA data"

    csess = ctx.open_session(CONN_TEST_UUID)
    with pytest.raises(client.ClientError) as exc:
        csess.invoke_command(conn_test_ta.CMD_LOAD_OBJECT, [
            client.tmpref(b"ns-object", wire.Direction.IN),
            client.tmpref(b"\x00" * 64, wire.Direction.OUT)])
    assert exc.value.code == codes.ERROR_ITEM_NOT_FOUND
    csess.close()
    dsess.close()


def test_storage_persists_across_framework_restart(framework):
    with client.initialize_context(framework.socket_path) as ctx:
        sess = ctx.open_session(DIGEST_UUID)
        _store(sess, b"durable", b"still here")
        sess.close()
    framework.restart()
    with client.initialize_context(framework.socket_path) as ctx:
        sess = ctx.open_session(DIGEST_UUID)
        assert _load(sess, digest_ta.CMD_LOAD, b"durable") == b"still here"
        sess.close()


def test_ca_cannot_reach_storage_directly(ctx):
    reply = ctx._roundtrip(wire.StorageGet(b"anything"))
    assert isinstance(reply.body, wire.StorageReply)
    assert reply.body.return_code == codes.ERROR_ACCESS_DENIED


# ------------------------------------------------------------- memory budget
def test_budget_exhaustion_is_not_fatal(ctx):
    sess = ctx.open_session(CONN_TEST_UUID)  # dataSize = 64 KiB
    alloc = lambda n: sess.invoke_command(
        conn_test_ta.CMD_ALLOC, [client.value(a=n, direction=wire.Direction.IN)])
    alloc(32 * 1024)
    with pytest.raises(client.ClientError) as exc:
        alloc(32 * 1024)
    assert exc.value.code == codes.ERROR_OUT_OF_MEMORY
    assert exc.value.origin == codes.Origin.TRUSTED_APP
    # the TA keeps serving
    sess.invoke_command(conn_test_ta.CMD_PING)
    sess.invoke_command(conn_test_ta.CMD_FREE_ALL)
    alloc(32 * 1024)  # fits again after freeing
    sess.invoke_command(conn_test_ta.CMD_FREE_ALL)
    sess.close()


# ------------------------------------------------------------- fault injection
def test_ta_death_reports_target_dead_to_all_clients(framework, ctx):
    with client.initialize_context(framework.socket_path) as ctx2:
        s1 = ctx.open_session(CONN_TEST_UUID)
        s2 = ctx2.open_session(CONN_TEST_UUID)
        pid = ta_pid(ctx, CONN_TEST_UUID)
        os.kill(pid, signal.SIGKILL)
        for c, s in ((ctx, s1), (ctx2, s2)):
            with pytest.raises(client.ClientError) as exc:
                s.invoke_command(conn_test_ta.CMD_PING)
            assert exc.value.code == codes.ERROR_TARGET_DEAD
            assert exc.value.origin == codes.Origin.COMMS
        # closing the dead session and reopening gets a fresh instance
        s1.close()
        fresh = ctx.open_session(CONN_TEST_UUID)
        fresh.invoke_command(conn_test_ta.CMD_PING)
        assert ta_pid(ctx, CONN_TEST_UUID) != pid
        fresh.close()
        s2.close()


def test_ca_kill_releases_all_resources(framework):
    proc = subprocess.Popen(
        [sys.executable, str(HERE / "_ca_victim.py"), str(framework.socket_path)],
        stdout=subprocess.PIPE, text=True)
    line = proc.stdout.readline().split()
    assert line[0] == "READY"
    tokens = line[1:3]
    assert all(os.path.exists(t) for t in tokens)

    with client.initialize_context(framework.socket_path) as audit:
        st = audit.status()
        assert st.session_count == 1 and st.region_count == 2

        proc.kill()
        proc.wait()
        deadline = time.monotonic() + 1.0
        while time.monotonic() < deadline:
            st = audit.status()
            if st.session_count == 0 and st.region_count == 0 and \
                    not any(os.path.exists(t) for t in tokens):
                break
            time.sleep(0.02)
        assert st.session_count == 0
        assert st.region_count == 0
        assert not any(os.path.exists(t) for t in tokens)


def test_supervisor_restarts_after_manager_crash(framework):
    mgr_pid = framework.manager_pid()
    os.kill(mgr_pid, signal.SIGKILL)
    deadline = time.monotonic() + 10.0
    while time.monotonic() < deadline:
        try:
            with client.initialize_context(framework.socket_path,
                                           timeout=1.0) as ctx:
                sess = ctx.open_session(CONN_TEST_UUID)
                sess.invoke_command(conn_test_ta.CMD_PING)
                sess.close()
            break
        except client.ClientError:
            time.sleep(0.1)
    else:
        pytest.fail("framework did not recover after manager crash")
    assert framework.manager_pid() != mgr_pid


# ------------------------------------------------------------ control plane
def test_status_counts(framework, ctx):
    st = ctx.status()
    assert (st.ta_count, st.session_count, st.region_count) == (0, 0, 0)
    sess = ctx.open_session(CONN_TEST_UUID)
    memory = ctx.allocate_shared_memory(1024)
    st = ctx.status()
    assert (st.ta_count, st.session_count, st.region_count) == (1, 1, 1)
    memory.release()
    sess.close()


def test_rescan_picks_up_new_ta(framework, ctx):
    assert len(ctx.list_tas()) == 2
    new_ta = framework.ta_dir / "late_ta.py"
    new_ta.write_text(
        'TA_ABI_VERSION = 1\n'
        'TA_PROPERTIES = {"uuid": "deadbeef-0000-4000-8000-000000000001"}\n'
        'def ta_create(api): pass\n'
        'def ta_destroy(api): pass\n'
        'def ta_open_session(api, session, params): return 0\n'
        'def ta_close_session(api, session): pass\n'
        'def ta_invoke_command(api, session, command_id, params): return 0\n')
    ctx.rescan()
    uuids = {str(e.uuid) for e in ctx.list_tas()}
    assert "deadbeef-0000-4000-8000-000000000001" in uuids
    sess = ctx.open_session("deadbeef-0000-4000-8000-000000000001")
    sess.close()


def test_finalize_context_is_clean(framework):
    ctx = client.initialize_context(framework.socket_path)
    sess = ctx.open_session(CONN_TEST_UUID)
    memory = ctx.allocate_shared_memory(1024)
    ctx.finalize()
    with client.initialize_context(framework.socket_path) as audit:
        deadline = time.monotonic() + 2.0
        while time.monotonic() < deadline:
            st = audit.status()
            if st.session_count == 0 and st.region_count == 0:
                break
            time.sleep(0.05)
        assert st.session_count == 0 and st.region_count == 0
