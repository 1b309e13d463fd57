"""Canonical JSON bytes and content digests.

One serialization everywhere: sorted keys, no whitespace, shortest round-trip
float repr (CPython's json default), NaN/inf rejected. Identical values yield
identical bytes on any platform with IEEE-754 doubles, which is what makes
log hashes comparable across runs.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

HASH_ALGORITHM = "sha256"


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False, allow_nan=False)


def content_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
