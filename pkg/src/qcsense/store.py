"""Append-only archive partitioned by node and UTC day.

Layout: ``<root>/<node_id>/<YYYY-MM-DD>.log``, one encoded record per line
(see records.FIELD_ORDER for the normative column order). Appends are
idempotent on (node_id, ts): an identical re-append counts as a duplicate,
a differing payload is a conflict. Time intervals are half-open [t0, t1).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

from .errors import ConflictError, InvalidRange, StorageError
from .records import SampleRecord, decode_line, encode_record, format_ts


@dataclass(frozen=True)
class AppendResult:
    added: int
    duplicates: int


class RecordStore:
    """One writer lock per store instance; readers go straight to disk."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._index = {}  # (node_id, date) -> {ts_iso: line}

    def _partition_path(self, node_id: str, date) -> Path:
        return self.root / node_id / f"{date.isoformat()}.log"

    def _load_index(self, node_id: str, date) -> dict:
        key = (node_id, date)
        idx = self._index.get(key)
        if idx is None:
            idx = {}
            path = self._partition_path(node_id, date)
            if path.exists():
                for line in path.read_text().splitlines():
                    if line.strip():
                        idx[line.split(",", 2)[1]] = line
            self._index[key] = idx
        return idx

    def append(self, records) -> AppendResult:
        added = 0
        duplicates = 0
        with self._lock:
            by_partition = {}
            for rec in records:
                rec.validate()
                by_partition.setdefault((rec.node_id, rec.ts.date()), []).append(rec)
            for (node_id, date), batch in sorted(by_partition.items()):
                idx = self._load_index(node_id, date)
                fresh = []
                for rec in batch:
                    line = encode_record(rec)
                    ts_key = format_ts(rec.ts)
                    existing = idx.get(ts_key)
                    if existing is None:
                        idx[ts_key] = line
                        fresh.append(line)
                        added += 1
                    elif existing == line:
                        duplicates += 1
                    else:
                        raise ConflictError(
                            f"record ({node_id}, {ts_key}) already stored with a different payload"
                        )
                if fresh:
                    path = self._partition_path(node_id, date)
                    try:
                        path.parent.mkdir(parents=True, exist_ok=True)
                        with path.open("a") as fh:
                            fh.write("\n".join(fresh) + "\n")
                    except OSError as e:
                        raise StorageError(f"cannot write partition {path}: {e}") from e
        return AppendResult(added=added, duplicates=duplicates)

    def node_ids(self):
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def query(self, node_ids, t0: datetime, t1: datetime):
        """All records with ts in [t0, t1) for the given nodes (None = all),
        sorted by (node_id, ts). Unknown node ids yield no records."""
        if t1 <= t0:
            raise InvalidRange(f"empty query window [{t0}, {t1})")
        if node_ids is None:
            node_ids = self.node_ids()
        out: list[SampleRecord] = []
        for node_id in sorted(set(node_ids)):
            node_dir = self.root / node_id
            if not node_dir.is_dir():
                continue
            date = t0.date()
            last = (t1 - timedelta(milliseconds=1)).date()
            while date <= last:
                path = self._partition_path(node_id, date)
                if path.exists():
                    for i, line in enumerate(path.read_text().splitlines(), start=1):
                        if not line.strip():
                            continue
                        rec = decode_line(line, i)
                        if t0 <= rec.ts < t1:
                            out.append(rec)
                date += timedelta(days=1)
        out.sort(key=lambda r: (r.node_id, r.ts))
        return out

    def count(self, node_ids, t0: datetime, t1: datetime) -> int:
        return len(self.query(node_ids, t0, t1))
