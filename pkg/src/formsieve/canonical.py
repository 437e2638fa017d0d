"""Canonical JSON serialization and digests shared by certificates and the CLI."""

from __future__ import annotations

import hashlib
import json


def canonical_dumps(obj) -> str:
    """Deterministic JSON: sorted keys, minimal separators, ASCII only."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def digest_of(obj) -> str:
    return sha256_hex(canonical_dumps(obj))
