"""Event vocabulary, per-patient sequences and CSV ingestion."""

from __future__ import annotations

import csv
import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence as Seq

import numpy as np

DEFAULT_EXPLANT = "EXP"
RVAD_EXPLANT = "REXP"

_CODE_RE = re.compile(r"^[A-Z][A-Z0-9_]*$")
_COLOR_RE = re.compile(r"^#[0-9A-Fa-f]{6}$")


class IngestError(ValueError):
    """Raised for malformed or inconsistent event input."""


@dataclass(frozen=True)
class EventType:
    code: str
    label: str
    terminal: bool = False
    color: str = "#7F7F7F"

    def __post_init__(self):
        if not self.code or not _CODE_RE.match(self.code):
            raise ValueError(f"invalid event code {self.code!r}")
        if not _COLOR_RE.match(self.color):
            raise ValueError(f"invalid color {self.color!r} for {self.code}")


class EventAlphabet:
    """Closed vocabulary of event types, iterated in alphabetical code order.

    The iteration order doubles as the tie-break order for events recorded
    at the same time, and as the integer encoding used by the kernels.
    """

    def __init__(self, types: Iterable[EventType]):
        types = sorted(types, key=lambda t: t.code)
        codes = [t.code for t in types]
        if len(set(codes)) != len(codes):
            dup = sorted({c for c in codes if codes.count(c) > 1})
            raise ValueError(f"duplicate event codes: {dup}")
        if not any(not t.terminal for t in types):
            raise ValueError("alphabet needs at least one non-terminal type")
        self.types: tuple[EventType, ...] = tuple(types)
        self._by_code = {t.code: t for t in types}
        self._index = {t.code: i for i, t in enumerate(types)}

    def __iter__(self):
        return iter(self.types)

    def __len__(self):
        return len(self.types)

    def __contains__(self, code):
        return code in self._by_code

    def __getitem__(self, code: str) -> EventType:
        return self._by_code[code]

    def __eq__(self, other):
        return isinstance(other, EventAlphabet) and self.types == other.types

    def __hash__(self):
        return hash(self.types)

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(t.code for t in self.types)

    def index(self, code: str) -> int:
        return self._index[code]

    def is_terminal(self, code: str) -> bool:
        return self._by_code[code].terminal

    @classmethod
    def from_json(cls, path) -> "EventAlphabet":
        with open(path, encoding="utf-8") as fh:
            rows = json.load(fh)
        return cls.from_records(rows)

    @classmethod
    def from_records(cls, rows) -> "EventAlphabet":
        types = []
        for row in rows:
            types.append(
                EventType(
                    code=row["code"],
                    label=row.get("label", row["code"]),
                    terminal=bool(row.get("terminal", False)),
                    color=row.get("color", "#7F7F7F"),
                )
            )
        return cls(types)

    @classmethod
    def default(cls) -> "EventAlphabet":
        ref = resources.files("trajmine") / "data" / "default_alphabet.json"
        with ref.open("r", encoding="utf-8") as fh:
            return cls.from_records(json.load(fh))

    def to_records(self) -> list[dict]:
        return [
            {"code": t.code, "label": t.label, "terminal": t.terminal, "color": t.color}
            for t in self.types
        ]


@dataclass(frozen=True)
class EventRecord:
    patient_id: str
    code: str
    time_months: float
    device_role: str | None = None

    def __post_init__(self):
        if not self.time_months >= 0:
            raise ValueError(f"negative or NaN time {self.time_months} for {self.patient_id}")


@dataclass(frozen=True)
class Sequence:
    patient_id: str
    events: tuple[str, ...]
    times: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.times is not None:
            object.__setattr__(self, "times", tuple(float(t) for t in self.times))
            if len(self.times) != len(self.events):
                raise ValueError("times and events differ in length")
        if not self.events:
            raise ValueError(f"empty sequence for patient {self.patient_id}")

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def to_records(self) -> list[EventRecord]:
        times = self.times if self.times is not None else range(len(self.events))
        return [EventRecord(self.patient_id, c, float(t)) for c, t in zip(self.events, times)]

    def render(self, sep="->") -> str:
        return sep.join(self.events)


@dataclass(frozen=True)
class SequenceBank:
    alphabet: EventAlphabet
    sequences: tuple[Sequence, ...]
    _encoded: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(self.sequences))
        seen = set()
        for s in self.sequences:
            if s.patient_id in seen:
                raise ValueError(f"duplicate patient id {s.patient_id!r}")
            seen.add(s.patient_id)
            for pos, c in enumerate(s.events, start=1):
                if c not in self.alphabet:
                    raise ValueError(f"code {c!r} of patient {s.patient_id!r} not in alphabet")
                if pos < len(s) and self.alphabet.is_terminal(c):
                    raise ValueError(f"terminal {c!r} before the end of patient {s.patient_id!r}")

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def __getitem__(self, i):
        return self.sequences[i]

    @property
    def patient_ids(self) -> list[str]:
        return [s.patient_id for s in self.sequences]

    def subset(self, indices: Iterable[int]) -> "SequenceBank":
        return SequenceBank(self.alphabet, tuple(self.sequences[i] for i in indices))

    def encoded(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat int32 code array plus offsets (length n+1), cached."""
        if not self._encoded:
            idx = self.alphabet._index
            lengths = np.fromiter((len(s) for s in self.sequences), dtype=np.int64, count=len(self))
            offsets = np.zeros(len(self) + 1, dtype=np.int64)
            np.cumsum(lengths, out=offsets[1:])
            flat = np.fromiter(
                (idx[c] for s in self.sequences for c in s.events), dtype=np.int32, count=int(offsets[-1])
            )
            self._encoded.append((flat, offsets))
        return self._encoded[0]

    def n_events(self) -> int:
        return sum(len(s) for s in self.sequences)


def remap_rvad_explant(records: Seq[EventRecord], explant_code=DEFAULT_EXPLANT, rvad_code=RVAD_EXPLANT):
    """Recode explants of a right-ventricular device to the non-terminal REXP code."""
    out = []
    for r in records:
        if r.code == explant_code and r.device_role is not None and r.device_role.upper() == "RVAD":
            r = EventRecord(r.patient_id, rvad_code, r.time_months, r.device_role)
        out.append(r)
    return out


def build_sequence(records: Seq[EventRecord], alphabet: EventAlphabet) -> Sequence:
    """Order one patient's records into a sequence.

    Sort key is (time, terminal-last, code). Everything after the first
    terminal event is dropped.
    """
    if not records:
        raise IngestError("cannot build a sequence from zero records")
    pids = {r.patient_id for r in records}
    if len(pids) != 1:
        raise IngestError(f"records span several patients: {sorted(pids)}")
    for r in records:
        if r.code not in alphabet:
            raise IngestError(f"unknown event code {r.code!r}")

    ordered = sorted(records, key=lambda r: (r.time_months, alphabet.is_terminal(r.code), r.code))
    events, times = [], []
    for r in ordered:
        events.append(r.code)
        times.append(r.time_months)
        if alphabet.is_terminal(r.code):
            break
    return Sequence(ordered[0].patient_id, tuple(events), tuple(times))


def _patient_key(pid: str):
    # numeric ids sort numerically, the rest lexically after them
    return (0, int(pid), "") if pid.isdigit() else (1, 0, pid)


def read_records(path) -> list[tuple[int, EventRecord]]:
    """Parse an event CSV into (line number, record) pairs."""
    path = Path(path)
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: empty file, header required") from None
        required = ["patient_id", "code", "time_months"]
        if header[:3] != required or len(header) > 4 or (len(header) == 4 and header[3] != "device_role"):
            raise IngestError(f"{path}:1: bad header {header}, expected patient_id,code,time_months[,device_role]")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            pid, code, t = (c.strip() for c in row[:3])
            role = row[3].strip() or None if len(row) == 4 else None
            if not pid:
                raise IngestError(f"{path}:{lineno}: empty patient_id")
            try:
                tm = float(t)
            except ValueError:
                raise IngestError(f"{path}:{lineno}: bad time_months {t!r}") from None
            if not tm >= 0:
                raise IngestError(f"{path}:{lineno}: time_months must be >= 0, got {t!r}")
            if role is not None and role.upper() not in ("LVAD", "RVAD"):
                raise IngestError(f"{path}:{lineno}: device_role must be LVAD or RVAD, got {role!r}")
            records.append((lineno, EventRecord(pid, code, tm, role)))
    return records


def ingest(path, alphabet: EventAlphabet | None = None) -> SequenceBank:
    """Read an event CSV into a bank with one sequence per patient."""
    alphabet = alphabet or EventAlphabet.default()
    numbered = read_records(path)
    records = remap_rvad_explant([r for _, r in numbered])
    by_patient = defaultdict(list)
    for (lineno, _), r in zip(numbered, records):
        if r.code not in alphabet:
            raise IngestError(f"{path}:{lineno}: unknown event code {r.code!r}")
        by_patient[r.patient_id].append(r)
    seqs = [build_sequence(by_patient[pid], alphabet) for pid in sorted(by_patient, key=_patient_key)]
    return SequenceBank(alphabet, tuple(seqs))


def write_events_csv(bank: SequenceBank, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patient_id", "code", "time_months"])
        for s in bank:
            times = s.times if s.times is not None else range(len(s))
            for c, t in zip(s.events, times):
                w.writerow([s.patient_id, c, f"{t:g}"])


def bank_to_json(bank: SequenceBank) -> dict:
    return {
        "alphabet": bank.alphabet.to_records(),
        "sequences": [
            {"patient_id": s.patient_id, "events": list(s.events),
             "times": list(s.times) if s.times is not None else None}
            for s in bank
        ],
    }
