"""Loadable TA module ABI.

A TA module is a Python file exporting, under fixed names:

    TA_ABI_VERSION   — integer, must equal ABI_VERSION
    TA_PROPERTIES    — properties descriptor dict (see properties.py)
    ta_create(api)
    ta_destroy(api)
    ta_open_session(api, session, params) -> return code
    ta_invoke_command(api, session, command_id, params) -> return code
    ta_close_session(api, session)

The layout is documented in docs/ta-abi.md.
"""

from __future__ import annotations

import importlib.util
import itertools
from pathlib import Path

from .properties import PropertiesError, TAProperties, properties_from_descriptor

ABI_VERSION = 1

ENTRY_POINTS = (
    "ta_create",
    "ta_destroy",
    "ta_open_session",
    "ta_invoke_command",
    "ta_close_session",
)

_counter = itertools.count()


class TAModuleError(Exception):
    pass


def load_ta_module(path: str | Path):
    """Import a TA module from a file path; returns (module, TAProperties)."""
    path = Path(path)
    if not path.is_file():
        raise TAModuleError(f"no such module: {path}")
    name = f"virtee_ta_{path.stem}_{next(_counter)}"
    spec = importlib.util.spec_from_file_location(name, path)
    if spec is None or spec.loader is None:
        raise TAModuleError(f"not an importable module: {path}")
    module = importlib.util.module_from_spec(spec)
    try:
        spec.loader.exec_module(module)
    except Exception as exc:
        raise TAModuleError(f"module failed to load: {exc!r}") from exc

    version = getattr(module, "TA_ABI_VERSION", None)
    if version is None:
        raise TAModuleError("module exports no TA_ABI_VERSION")
    if version != ABI_VERSION:
        raise TAModuleError(
            f"abi mismatch: module declares {version}, runtime is {ABI_VERSION}"
        )
    descriptor = getattr(module, "TA_PROPERTIES", None)
    if descriptor is None:
        raise TAModuleError("module exports no TA_PROPERTIES descriptor")
    try:
        props = properties_from_descriptor(descriptor)
    except PropertiesError as exc:
        raise TAModuleError(f"bad properties descriptor: {exc}") from exc
    missing = [ep for ep in ENTRY_POINTS if not callable(getattr(module, ep, None))]
    if missing:
        raise TAModuleError(f"module lacks entry points: {', '.join(missing)}")
    return module, props
