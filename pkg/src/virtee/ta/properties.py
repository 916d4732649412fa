"""TA configuration properties (the gpd.ta.* set plus instance policy)."""

from __future__ import annotations

from dataclasses import dataclass
from uuid import UUID

MIN_DATA_SIZE = 4 * 1024
MIN_STACK_SIZE = 16 * 1024
DEFAULT_DATA_SIZE = 1024 * 1024
DEFAULT_STACK_SIZE = 256 * 1024


class PropertiesError(Exception):
    pass


@dataclass
class TAProperties:
    uuid: UUID
    data_size: int = DEFAULT_DATA_SIZE
    stack_size: int = DEFAULT_STACK_SIZE
    single_instance: bool = True
    multi_session: bool = True
    instance_keep_alive: bool = False


# Descriptor keys use the conventional gpd.ta.* short names.
_KEYS = {
    "uuid": "uuid",
    "dataSize": "data_size",
    "stackSize": "stack_size",
    "singleInstance": "single_instance",
    "multiSession": "multi_session",
    "instanceKeepAlive": "instance_keep_alive",
}


def properties_from_descriptor(descriptor) -> TAProperties:
    """Build validated TAProperties from a module's descriptor dict.

    Missing fields take defaults; uuid is mandatory.
    """
    if not isinstance(descriptor, dict):
        raise PropertiesError("properties descriptor must be a dict")
    unknown = set(descriptor) - set(_KEYS)
    if unknown:
        raise PropertiesError(f"unknown descriptor keys: {sorted(unknown)}")
    if "uuid" not in descriptor:
        raise PropertiesError("descriptor lacks a uuid")
    try:
        uuid = UUID(str(descriptor["uuid"]))
    except ValueError:
        raise PropertiesError(
            f"descriptor uuid is not a valid UUID: {descriptor['uuid']!r}"
        ) from None

    props = TAProperties(uuid=uuid)
    for key, attr in _KEYS.items():
        if key == "uuid" or key not in descriptor:
            continue
        value = descriptor[key]
        if attr in ("data_size", "stack_size"):
            if not isinstance(value, int) or isinstance(value, bool):
                raise PropertiesError(f"{key} must be an integer byte count")
            setattr(props, attr, value)
        else:
            if not isinstance(value, bool):
                raise PropertiesError(f"{key} must be a boolean")
            setattr(props, attr, value)

    if props.data_size < MIN_DATA_SIZE:
        raise PropertiesError(
            f"dataSize {props.data_size} below floor {MIN_DATA_SIZE}"
        )
    if props.stack_size < MIN_STACK_SIZE:
        raise PropertiesError(
            f"stackSize {props.stack_size} below floor {MIN_STACK_SIZE}"
        )
    return props
