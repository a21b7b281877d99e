"""Append-only JSONL store with replay.

Every state change is one appended record; nothing is ever rewritten, so the
current state is exactly the replay of the append sequence (later appends
for the same (kind, id) supersede earlier ones). One segment file per record
kind, a single global sequence, one writer, any number of readers.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Iterator, Optional

from .errors import InputError, StoreError
from .records import MalformedLineError, dumps_compact, iter_records

KINDS = ("task", "gold", "verdict", "adjudication", "stats", "trajectory")

_FILES = {
    "task": "tasks.jsonl",
    "gold": "golds.jsonl",
    "verdict": "verdicts.jsonl",
    "adjudication": "adjudication.jsonl",
    "stats": "stats.jsonl",
    "trajectory": "trajectories.jsonl",
}


class JsonlStore:
    def __init__(self, store_dir: str | Path):
        self.dir = Path(store_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()
        self._sequence = 0
        for _ in self.replay():  # establish the next sequence number
            pass

    def path_for(self, kind: str) -> Path:
        if kind not in KINDS:
            raise InputError(f"unknown record kind {kind!r}")
        return self.dir / _FILES[kind]

    def append(self, kind: str, record_id: str, payload: dict) -> dict:
        """Append one record; returns the stored envelope."""
        path = self.path_for(kind)
        with self._write_lock:
            self._sequence += 1
            envelope = {
                "kind": kind,
                "id": record_id,
                "sequence": self._sequence,
                "payload": payload,
            }
            with path.open("a", encoding="utf-8") as fh:
                fh.write(dumps_compact(envelope) + "\n")
                fh.flush()
        return envelope

    def replay(self) -> Iterator[dict]:
        """Yield every stored envelope in append order (by sequence)."""
        envelopes: list[dict] = []
        for kind in KINDS:
            path = self.path_for(kind)
            if not path.exists():
                continue
            for line_no, rec in iter_records(path):
                for key in ("kind", "id", "sequence", "payload"):
                    if key not in rec:
                        raise MalformedLineError(str(path), line_no, f"missing {key!r}")
                envelopes.append(rec)
        envelopes.sort(key=lambda e: e["sequence"])
        if envelopes:
            seqs = [e["sequence"] for e in envelopes]
            if len(set(seqs)) != len(seqs):
                raise StoreError("duplicate sequence numbers; store is corrupt")
            self._sequence = max(self._sequence, seqs[-1])
        yield from envelopes

    def state(self) -> dict[str, dict[str, dict]]:
        """Materialized state: latest payload per (kind, id)."""
        out: dict[str, dict[str, dict]] = {kind: {} for kind in KINDS}
        for env in self.replay():
            out[env["kind"]][env["id"]] = env["payload"]
        return out

    def latest(self, kind: str, record_id: str) -> Optional[dict]:
        return self.state()[kind].get(record_id)

    def counts(self) -> dict[str, int]:
        state = self.state()
        return {kind: len(ids) for kind, ids in state.items()}


def state_fingerprint(store: JsonlStore) -> str:
    """Canonical digest of the materialized state, for replay comparisons."""
    import hashlib

    blob = json.dumps(store.state(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
