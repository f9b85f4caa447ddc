"""Canonical JSON serialization so identical runs produce identical bytes."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import ConcordError


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False)


def dumps_compact(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def read_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ConcordError(f"{path}: invalid JSON ({err})") from err


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
