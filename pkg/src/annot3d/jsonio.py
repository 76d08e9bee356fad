"""JSON / JSONL helpers with line-numbered errors and deterministic output.

All writers emit keys in sorted order and use Python's shortest-repr float
formatting, so identical data always serializes to identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any, Iterable, Iterator

import numpy as np

from .errors import InputFormatError


def jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays (recursively) into plain Python types."""
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value


def dumps_canonical(obj: Any) -> str:
    """Deterministic single-line JSON encoding."""
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_hash(obj: Any) -> str:
    """Short provenance hash of a JSON-serializable object."""
    return hashlib.sha256(dumps_canonical(obj).encode("utf-8")).hexdigest()[:16]


def iter_jsonl(text: str, *, source: str = "input") -> Iterator[tuple[int, Any]]:
    """Yield (line_number, record) for each non-empty line of a JSONL string.

    Raises InputFormatError naming the bad line on malformed JSON.
    """
    for idx, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            yield idx, json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"malformed JSON ({exc.msg})", source=source, line=idx) from exc


def dumps_jsonl(records: Iterable[Any]) -> str:
    """Serialize records to deterministic JSONL (one record per line)."""
    lines = [dumps_canonical(rec) for rec in records]
    return "\n".join(lines) + ("\n" if lines else "")


def require_keys(record: Any, keys: Iterable[str], *, source: str, line: int) -> None:
    if not isinstance(record, dict):
        raise InputFormatError("record is not a JSON object", source=source, line=line)
    missing = [k for k in keys if k not in record]
    if missing:
        raise InputFormatError(f"missing keys {missing}", source=source, line=line)
