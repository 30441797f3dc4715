"""Self-describing checkpoint container shared by generator and discriminator.

Files carry a format-version integer, a kind tag, and whatever payload the
owner stores (config echo plus parameter tensors). torch.save produces
byte-identical files for identical payloads, which the reproducibility
checks rely on.
"""
from __future__ import annotations

from pathlib import Path

import torch

from .errors import CheckpointError

FORMAT_VERSION = 1


def save_checkpoint(path, kind: str, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    record = {"format_version": FORMAT_VERSION, "kind": kind}
    overlap = record.keys() & payload.keys()
    if overlap:
        raise CheckpointError(f"payload may not override reserved keys {sorted(overlap)}")
    record.update(payload)
    torch.save(record, path)


def load_checkpoint(path, expect_kind: str | None = None) -> dict:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no such checkpoint: {path}")
    try:
        record = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(record, dict) or "format_version" not in record:
        raise CheckpointError(f"{path} is not a checkpoint container")
    if record["format_version"] != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {record['format_version']} unsupported (want {FORMAT_VERSION})"
        )
    if expect_kind is not None and record.get("kind") != expect_kind:
        raise CheckpointError(f"{path}: kind {record.get('kind')!r}, expected {expect_kind!r}")
    return record
