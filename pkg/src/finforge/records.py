"""Line-delimited record file helpers.

Every external file surface (knowledge points, axioms, templates, format
rules, ground-truth facts, scenarios, store segments, batch exports) is
UTF-8 JSONL: one JSON object per line. Blank lines are ignored; a malformed
line raises with its 1-based line number so operators can fix the file.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import InputError


class MalformedLineError(InputError):
    code = "malformed_line"

    def __init__(self, path: str, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}", detail={"line": line_no})
        self.line_no = line_no


def iter_records(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, record) pairs, validating as it goes."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLineError(str(path), line_no, f"invalid JSON ({exc.msg})")
            if not isinstance(rec, dict):
                raise MalformedLineError(str(path), line_no, "record is not an object")
            yield line_no, rec


def read_records(path: str | Path) -> list[dict]:
    return [rec for _, rec in iter_records(path)]


def write_records(path: str | Path, records: Iterable[dict]) -> int:
    """Write records as JSONL; returns the number written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_compact(rec) + "\n")
            n += 1
    return n


def dumps_compact(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), sort_keys=True)
