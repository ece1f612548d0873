"""Small shared helpers: deterministic seed derivation and stable hashing."""

from __future__ import annotations

import hashlib
import json
from typing import Any

_SEED_SPACE = 2**63


def derive_seed(seed: int, *parts: object) -> int:
    """Derive a child seed from a base seed and a path of identifying parts.

    Stable across platforms and processes (sha256-based, no reliance on
    ``hash()``), so independently seeded components reproduce bit-for-bit.
    """
    material = json.dumps([seed, *[str(p) for p in parts]], separators=(",", ":"))
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % _SEED_SPACE


def stable_json(obj: Any) -> str:
    """Canonical JSON used for fingerprints: sorted keys, compact, no NaN."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def fingerprint(obj: Any) -> str:
    return sha256_hex(stable_json(obj))
