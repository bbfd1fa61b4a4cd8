"""Record ingestion and per-unit document assembly."""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import InputError, RecordFormatError
from .geo import Gazetteer, GeoPoint, assign_points

log = logging.getLogger(__name__)

KINDS = ("qa", "microblog")
_SENTENCE_END = re.compile(r"(?<=[.!?])(?=\s|\Z)")


@dataclass(frozen=True)
class RawRecord:
    record_id: str
    kind: str
    text: str
    unit_names: tuple[str, ...] = ()
    location: GeoPoint | None = None
    timestamp: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"record {self.record_id!r}: unknown kind {self.kind!r}")
        if not self.text:
            raise InputError(f"record {self.record_id!r}: empty text")
        if self.kind == "qa" and not self.unit_names:
            raise InputError(f"record {self.record_id!r}: qa record names no unit")
        if self.kind == "microblog" and self.location is None:
            raise InputError(f"record {self.record_id!r}: microblog record has no location")

    def to_json(self) -> dict:
        out: dict = {"record_id": self.record_id, "kind": self.kind, "text": self.text}
        if self.kind == "qa":
            out["unit_names"] = list(self.unit_names)
        if self.location is not None:
            out["lat"] = self.location.lat
            out["lon"] = self.location.lon
        if self.timestamp is not None:
            out["timestamp"] = self.timestamp
        return out


@dataclass(frozen=True)
class UnitDocument:
    unit_id: str
    raw_text: str
    record_ids: tuple[str, ...]
    sentence_count: int


@dataclass
class AssemblyReport:
    skipped_name_pairs: int = 0
    dropped_out_of_range: int = 0
    # per-unit number of contributing records, for histograms
    record_counts: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "skipped_name_pairs": self.skipped_name_pairs,
            "dropped_out_of_range": self.dropped_out_of_range,
        }


def _parse_record(obj, lineno: int, path) -> RawRecord:
    if not isinstance(obj, dict):
        raise RecordFormatError("expected a JSON object", lineno, path)
    for key in ("record_id", "kind", "text"):
        if key not in obj:
            raise RecordFormatError(f"missing field {key!r}", lineno, path)
    kind = obj["kind"]
    if kind not in KINDS:
        raise RecordFormatError(f"unknown kind {kind!r}", lineno, path)
    text = obj["text"]
    if not isinstance(text, str) or not text:
        raise RecordFormatError("field 'text' must be a non-empty string", lineno, path)
    names = obj.get("unit_names", [])
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise RecordFormatError("field 'unit_names' must be a list of strings", lineno, path)
    location = None
    try:
        if kind == "microblog" or ("lat" in obj and "lon" in obj):
            if "lat" not in obj or "lon" not in obj:
                raise RecordFormatError("microblog record needs 'lat' and 'lon'", lineno, path)
            location = GeoPoint(float(obj["lat"]), float(obj["lon"]))
        return RawRecord(
            record_id=str(obj["record_id"]),
            kind=kind,
            text=text,
            unit_names=tuple(names),
            location=location,
            timestamp=obj.get("timestamp"),
        )
    except RecordFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise RecordFormatError(str(exc), lineno, path) from exc


def load_records(path, format: str = "jsonl") -> list[RawRecord]:
    """Read records in file order.

    ``format`` is ``"jsonl"`` (one object per line, blank lines ignored) or
    ``"json"`` (a single array of objects).
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if format == "jsonl":
        out = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordFormatError(f"invalid JSON ({exc.msg})", lineno, path) from exc
            out.append(_parse_record(obj, lineno, path))
        return out
    if format == "json":
        if not text.strip():
            return []
        try:
            items = json.loads(text)
        except json.JSONDecodeError as exc:
            raise RecordFormatError(f"invalid JSON ({exc.msg})", exc.lineno, path) from exc
        if not isinstance(items, list):
            raise RecordFormatError("expected a JSON array", 1, path)
        return [_parse_record(obj, i, path) for i, obj in enumerate(items, start=1)]
    raise InputError(f"unknown record format {format!r}")


def write_records(records: Sequence[RawRecord], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def split_sentences(text: str) -> list[str]:
    """Split at ``.``, ``!`` or ``?`` followed by whitespace or end of text."""
    return [s.strip() for s in _SENTENCE_END.split(text) if s.strip()]


def _build_documents(members: dict[str, list[RawRecord]], g: Gazetteer) -> list[UnitDocument]:
    docs = []
    for uid in g.unit_ids:
        recs = members.get(uid)
        if not recs:
            continue
        raw = "\n".join(r.text for r in recs)
        docs.append(UnitDocument(uid, raw, tuple(r.record_id for r in recs), len(split_sentences(raw))))
    return docs


def assemble_qa_documents(records: Sequence[RawRecord], g: Gazetteer) -> tuple[list[UnitDocument], AssemblyReport]:
    """Concatenate each QA record into the document of every unit it names.

    Names match gazetteer names case-insensitively; unknown names are
    skipped and counted.
    """
    by_name = g.units_by_name()
    members: dict[str, list[RawRecord]] = {}
    report = AssemblyReport()
    for r in records:
        if r.kind != "qa":
            raise InputError(f"record {r.record_id!r} is not a qa record")
        targets: list[str] = []
        for name in r.unit_names:
            ids = by_name.get(name.strip().casefold())
            if ids is None:
                report.skipped_name_pairs += 1
                log.debug("record %s: unknown unit name %r", r.record_id, name)
                continue
            targets.extend(i for i in ids if i not in targets)
        for uid in targets:
            members.setdefault(uid, []).append(r)
    docs = _build_documents(members, g)
    report.record_counts = {d.unit_id: len(d.record_ids) for d in docs}
    if report.skipped_name_pairs:
        log.info("skipped %d record/unit-name pairs with unknown names", report.skipped_name_pairs)
    return docs, report


def assemble_geo_documents(
    records: Sequence[RawRecord], g: Gazetteer, max_km: float = 1.0
) -> tuple[list[UnitDocument], AssemblyReport]:
    """Assign each located record to its nearest unit within ``max_km``."""
    for r in records:
        if r.location is None:
            raise InputError(f"record {r.record_id!r} has no location")
    assigned = assign_points([r.location for r in records], g, max_km)
    members: dict[str, list[RawRecord]] = {}
    report = AssemblyReport()
    for r, uid in zip(records, assigned):
        if uid is None:
            report.dropped_out_of_range += 1
            continue
        members.setdefault(uid, []).append(r)
    docs = _build_documents(members, g)
    report.record_counts = {d.unit_id: len(d.record_ids) for d in docs}
    return docs, report


def filter_min_sentences(docs: Sequence[UnitDocument], min_sentences: int = 40) -> list[UnitDocument]:
    if min_sentences < 0:
        raise InputError("min_sentences must be >= 0")
    return [d for d in docs if d.sentence_count >= min_sentences]


def write_documents(docs: Sequence[UnitDocument], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in docs:
            row = {
                "unit_id": d.unit_id,
                "record_ids": list(d.record_ids),
                "sentence_count": d.sentence_count,
                "raw_text": d.raw_text,
            }
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def read_documents(path) -> list[UnitDocument]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                o = json.loads(line)
                out.append(UnitDocument(o["unit_id"], o["raw_text"], tuple(o["record_ids"]), o["sentence_count"]))
    return out
