"""TA-runtime unit tests: memory budget and declared API surface."""

import pytest

from virtee import codes
from virtee.codes import TeeError
from virtee.ta import surface
from virtee.ta.runtime import ALLOC_OVERHEAD, MemoryBudget, TAInstanceApi


# ------------------------------------------------------------ memory budget
def test_budget_charges_overhead():
    b = MemoryBudget(64 * 1024)
    b.take(32 * 1024)
    assert b.in_use == 32 * 1024 + ALLOC_OVERHEAD
    # a second 32 KiB no longer fits once overhead is charged
    with pytest.raises(TeeError) as exc:
        b.take(32 * 1024)
    assert exc.value.code == codes.ERROR_OUT_OF_MEMORY
    b.give(32 * 1024)
    assert b.in_use == 0
    b.take(32 * 1024)  # fits again after the free


def test_budget_exact_fit():
    b = MemoryBudget(1024)
    b.take(1024 - ALLOC_OVERHEAD)
    with pytest.raises(TeeError):
        b.take(1)


def test_budget_accounting_invariant():
    b = MemoryBudget(4096)
    b.take(100)
    with pytest.raises(AssertionError):
        b.give(200)


# --------------------------------------------------------------- API surface
def test_surface_covers_every_declared_name():
    assert set(surface.SURFACE) == set(surface.IMPLEMENTED) | set(
        surface.UNIMPLEMENTED)
    assert not set(surface.IMPLEMENTED) & set(surface.UNIMPLEMENTED)


def test_every_declared_operation_resolves():
    """The totality audit: each declared name resolves to a callable —
    either a real implementation or a logging not-supported stub."""
    unhandled = []
    for name in surface.SURFACE:
        try:
            fn = surface.resolve(name)
        except KeyError:
            unhandled.append(name)
            continue
        if not callable(fn):
            unhandled.append(name)
    assert unhandled == []


def test_implemented_names_are_real_implementations():
    for name in surface.IMPLEMENTED:
        fn = surface.resolve(name)
        assert not getattr(fn, "unimplemented", False), name
        target = surface.IMPLEMENTED[name]
        if isinstance(target, str):
            assert callable(getattr(TAInstanceApi, target))


def test_unimplemented_names_log_and_return_not_supported(caplog):
    for name in surface.UNIMPLEMENTED:
        stub = surface.resolve(name)
        assert getattr(stub, "unimplemented", False), name
        with caplog.at_level("WARNING", logger="virtee.ta.surface"):
            caplog.clear()
            rc = stub("arbitrary", "args")
        assert rc == codes.ERROR_NOT_SUPPORTED, name
        assert any(name in r.message for r in caplog.records), name


def test_unknown_name_is_outside_surface():
    with pytest.raises(KeyError):
        surface.resolve("TEE_DoesNotExist")
