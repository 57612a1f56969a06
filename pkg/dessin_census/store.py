"""File-backed persistence for census runs: record log, unit manifest, diagnostics and checkpoints."""

from __future__ import annotations

import json
import os
import threading
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, TextIO

from .models import CensusRecord, UnitStatus
from .signatures import Signature

RECORDS_FILE = "records.jsonl"
MANIFEST_FILE = "manifest.json"
DIAGNOSTICS_FILE = "diagnostics.jsonl"
CHECKPOINT_DIR = "checkpoints"


class IncompleteStoreError(RuntimeError):
    """Raised when counts are requested before every needed work unit has completed."""

    def __init__(self, missing_units: List[str]) -> None:
        shown = ", ".join(missing_units[:10])
        more = f" and {len(missing_units) - 10} more" if len(missing_units) > 10 else ""
        super().__init__(f"{len(missing_units)} incomplete units: {shown}{more}")
        self.missing_units = missing_units


def _status_to_dict(status: UnitStatus) -> Dict[str, object]:
    return {
        "signature": str(status.signature),
        "index": status.index,
        "genus": status.genus,
        "complete": status.complete,
        "records": status.records,
        "nodes": status.nodes,
        "error": status.error,
    }


def _status_from_dict(payload: Dict[str, object]) -> UnitStatus:
    return UnitStatus(
        signature=Signature.parse(str(payload["signature"])),
        index=int(payload["index"]),  # type: ignore[arg-type]
        genus=int(payload["genus"]),  # type: ignore[arg-type]
        complete=bool(payload.get("complete", False)),
        records=int(payload.get("records", 0)),  # type: ignore[arg-type]
        nodes=int(payload.get("nodes", 0)),  # type: ignore[arg-type]
        error=payload.get("error"),  # type: ignore[arg-type]
    )


def _sort_key(record: CensusRecord):
    return (record.genus or 0, record.signature, record.n, record.canonical_key)


class CensusStore:
    """Census directory ``<root>/<g_max>/`` written through a single lock-guarded writer."""

    def __init__(self, root: Path, g_max: int) -> None:
        self.root = Path(root)
        self.g_max = g_max
        self.path = self.root / str(g_max)
        self.path.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    @contextmanager
    def open_log(self, name: str) -> Iterator[TextIO]:
        with self._lock:
            with (self.path / name).open("a", encoding="utf-8") as handle:
                yield handle

    def _read_lines(self, name: str) -> Iterator[Dict[str, object]]:
        path = self.path / name
        if not path.exists():
            return
        with path.open(encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    yield json.loads(line)

    # region Manifest
    def _load_manifest(self) -> Dict[str, object]:
        path = self.path / MANIFEST_FILE
        if not path.exists():
            return {"g_max": self.g_max, "units": {}, "diagnostics": {}}
        return json.loads(path.read_text(encoding="utf-8"))

    def _save_manifest(self, manifest: Dict[str, object]) -> None:
        path = self.path / MANIFEST_FILE
        temporary = path.with_suffix(".tmp")
        temporary.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(temporary, path)

    def units(self) -> Dict[str, UnitStatus]:
        units = self._load_manifest()["units"]
        return {unit_id: _status_from_dict(payload) for unit_id, payload in sorted(units.items())}  # type: ignore[union-attr]

    def register_units(self, statuses: Iterable[UnitStatus]) -> None:
        with self._lock:
            manifest = self._load_manifest()
            units = manifest["units"]
            for status in statuses:
                units.setdefault(status.unit_id, _status_to_dict(status))  # type: ignore[union-attr]
            self._save_manifest(manifest)

    def update_unit(self, status: UnitStatus) -> None:
        with self._lock:
            manifest = self._load_manifest()
            manifest["units"][status.unit_id] = _status_to_dict(status)  # type: ignore[index]
            self._save_manifest(manifest)

    def missing_units(self, max_genus: Optional[int] = None) -> List[str]:
        limit = self.g_max if max_genus is None else max_genus
        return [
            unit_id
            for unit_id, status in self.units().items()
            if status.genus <= limit and not status.complete
        ]

    def require_complete(self, max_genus: Optional[int] = None) -> None:
        units = self.units()
        if not units:
            raise IncompleteStoreError([f"no census run for g_max={self.g_max}"])
        missing = self.missing_units(max_genus)
        if missing:
            raise IncompleteStoreError(missing)

    # endregion

    # region Records
    def append_records(self, records: Iterable[CensusRecord], unit_id: str) -> int:
        count = 0
        with self.open_log(RECORDS_FILE) as handle:
            for record in records:
                payload = record.to_dict()
                payload["unit"] = unit_id
                handle.write(json.dumps(payload, sort_keys=True) + "\n")
                count += 1
        return count

    def records(self, genus: Optional[int] = None, signature: Optional[Signature] = None) -> List[CensusRecord]:
        """Distinct records sorted by genus, signature, index and key."""

        by_key: Dict[str, CensusRecord] = {}
        for payload in self._read_lines(RECORDS_FILE):
            record = CensusRecord.from_dict(payload)
            if genus is not None and record.genus != genus:
                continue
            if signature is not None and record.signature != signature:
                continue
            by_key.setdefault(record.canonical_key, record)
        return sorted(by_key.values(), key=_sort_key)

    def records_for_unit(self, unit_id: str) -> List[CensusRecord]:
        by_key: Dict[str, CensusRecord] = {}
        for payload in self._read_lines(RECORDS_FILE):
            if payload.get("unit") == unit_id:
                record = CensusRecord.from_dict(payload)
                by_key.setdefault(record.canonical_key, record)
        return sorted(by_key.values(), key=_sort_key)

    def get_record(self, key: str) -> Optional[CensusRecord]:
        for payload in self._read_lines(RECORDS_FILE):
            if payload.get("canonical_key") == key:
                return CensusRecord.from_dict(payload)
        return None

    def canonical_lines(self) -> List[str]:
        """Records without provenance, one JSON line each, in canonical order."""

        lines = []
        for record in self.records():
            payload = record.to_dict()
            payload.pop("run_id")
            payload.pop("created_at")
            lines.append(json.dumps(payload, sort_keys=True))
        return lines

    # endregion

    # region Diagnostics
    def append_diagnostics(self, signature: Signature, max_index: int, records: Iterable[CensusRecord]) -> int:
        count = 0
        with self.open_log(DIAGNOSTICS_FILE) as handle:
            for record in records:
                payload = record.to_dict()
                payload["max_index"] = max_index
                handle.write(json.dumps(payload, sort_keys=True) + "\n")
                count += 1
        with self._lock:
            manifest = self._load_manifest()
            manifest.setdefault("diagnostics", {})[str(signature)] = max_index  # type: ignore[union-attr]
            self._save_manifest(manifest)
        return count

    def diagnostic_runs(self) -> Dict[str, int]:
        return dict(sorted(self._load_manifest().get("diagnostics", {}).items()))  # type: ignore[union-attr]

    def diagnostics(self, signature: Optional[Signature] = None) -> List[CensusRecord]:
        by_key: Dict[str, CensusRecord] = {}
        for payload in self._read_lines(DIAGNOSTICS_FILE):
            record = CensusRecord.from_dict(payload)
            if signature is None or record.signature == signature:
                by_key.setdefault(record.canonical_key, record)
        return sorted(by_key.values(), key=lambda record: (record.signature, record.n, record.canonical_key))

    # endregion

    # region Checkpoints
    def checkpoint_path(self, unit_id: str) -> Path:
        name = unit_id.replace(",", "-").replace("@", "_") + ".ckpt"
        return self.path / CHECKPOINT_DIR / name

    def save_checkpoint(self, unit_id: str, data: bytes) -> Path:
        path = self.checkpoint_path(unit_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        return path

    def load_checkpoint(self, unit_id: str) -> Optional[bytes]:
        path = self.checkpoint_path(unit_id)
        return path.read_bytes() if path.exists() else None

    def clear_checkpoint(self, unit_id: str) -> None:
        self.checkpoint_path(unit_id).unlink(missing_ok=True)

    # endregion

    def sibling_stores(self) -> List["CensusStore"]:
        """Other census directories under the same root, smallest g_max first."""

        result = []
        for child in sorted(self.root.iterdir(), key=lambda path: path.name.zfill(6)):
            if child.is_dir() and child.name.isdigit() and int(child.name) != self.g_max:
                if (child / MANIFEST_FILE).exists():
                    result.append(CensusStore(self.root, int(child.name)))
        return result


__all__ = [
    "CHECKPOINT_DIR",
    "CensusStore",
    "DIAGNOSTICS_FILE",
    "IncompleteStoreError",
    "MANIFEST_FILE",
    "RECORDS_FILE",
]
