"""Installed-TA discovery.

A TA directory holds loadable TA modules; one TAMetadata is produced per
module whose properties descriptor parses, ordered lexicographically by
filename.  Files that are not TA modules are skipped with a warning;
duplicate UUIDs are a hard error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from uuid import UUID

from .ta.module import TAModuleError, load_ta_module
from .ta.properties import TAProperties

log = logging.getLogger("virtee.discovery")


class DiscoveryError(Exception):
    pass


@dataclass
class TAMetadata:
    uuid: UUID
    module_path: Path
    properties: TAProperties


def discover_tas(ta_dir: str | Path) -> list[TAMetadata]:
    ta_dir = Path(ta_dir)
    if not ta_dir.is_dir():
        raise DiscoveryError(f"TA directory does not exist: {ta_dir}")
    found: list[TAMetadata] = []
    by_uuid: dict[UUID, Path] = {}
    for path in sorted(ta_dir.iterdir()):
        if not path.is_file() or path.name.startswith(("_", ".")):
            continue
        if path.suffix != ".py":
            log.warning("skipping %s: not a TA module", path.name)
            continue
        try:
            _, props = load_ta_module(path)
        except TAModuleError as exc:
            log.warning("skipping %s: %s", path.name, exc)
            continue
        if props.uuid in by_uuid:
            raise DiscoveryError(
                f"duplicate TA uuid {props.uuid}: "
                f"{by_uuid[props.uuid]} and {path}"
            )
        by_uuid[props.uuid] = path
        found.append(TAMetadata(props.uuid, path.resolve(), props))
    return found
