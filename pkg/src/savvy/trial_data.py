"""Per-trial adverse-event records: parsing, validation, event schemes, descriptives.

The raw interchange format is a five-column CSV

    ae_id,patient_id,group,time,event_type

with one row per (adverse event, patient) pair, time in days and event type
coded 0=censored, 1=adverse event, 2=hard competing event (death before the
AE), 3=soft competing event (follow-up ending events such as treatment
discontinuation).  Rows that cannot enter the analysis are collected in an
exclusion log instead of being repaired or imputed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import IntegrityError, ParseError, ValidationError

CSV_HEADER = ("ae_id", "patient_id", "group", "time", "event_type")

# raw event-type codes
CENSORED, AE, HARD_COMPETING, SOFT_COMPETING = 0, 1, 2, 3
# analysis codes after scheme remapping (censored stays 0)
EVENT, COMPETING = 1, 2

ALL_EVENTS = "all_events"
DEATH_ONLY = "death_only"
COMPOSITE_ALL_EVENTS = "composite_all_events"
COMPOSITE_DEATH_ONLY = "composite_death_only"
SCHEMES = (ALL_EVENTS, DEATH_ONLY, COMPOSITE_ALL_EVENTS, COMPOSITE_DEATH_ONLY)

# Schemes that retain a competing-event state.  The composite schemes fold
# the competing event into the event of interest, so no code 2 remains.
SCHEMES_WITH_COMPETING = (ALL_EVENTS, DEATH_ONLY)

_SCHEME_MAP = {
    ALL_EVENTS: {CENSORED: 0, AE: 1, HARD_COMPETING: 2, SOFT_COMPETING: 2},
    DEATH_ONLY: {CENSORED: 0, AE: 1, HARD_COMPETING: 2, SOFT_COMPETING: 0},
    COMPOSITE_ALL_EVENTS: {CENSORED: 0, AE: 1, HARD_COMPETING: 1, SOFT_COMPETING: 1},
    COMPOSITE_DEATH_ONLY: {CENSORED: 0, AE: 1, HARD_COMPETING: 1, SOFT_COMPETING: 0},
}

GROUPS = ("A", "B")


@dataclass(frozen=True)
class EventRecord:
    """One validated first-event observation.

    ``group`` is the canonical treatment code: "A" experimental, "B" control.
    ``raw`` keeps the original CSV fields so validated rows can be written
    back byte-for-byte.
    """

    ae_id: int
    patient_id: str
    group: str
    time: float
    event_type: int
    raw: tuple | None = None


@dataclass(frozen=True)
class TrialDataset:
    """Validated per-patient first-event data for one trial.

    ``exclusion_log`` holds one ``(row_number, raw_fields, reason)`` triple per
    rejected input row; row numbers count the header as line 1.
    """

    savvy_id: str
    records: tuple
    exclusion_log: tuple = ()
    group_labels: dict = field(default_factory=dict)

    def ae_ids(self):
        return sorted({r.ae_id for r in self.records})

    def records_for(self, ae_id):
        return tuple(r for r in self.records if r.ae_id == ae_id)

    def to_csv(self) -> str:
        """Serialize the validated rows (original field bytes, canonical column order)."""
        lines = [",".join(CSV_HEADER)]
        for r in self.records:
            fields = r.raw if r.raw is not None else (
                str(r.ae_id), r.patient_id, r.group, repr(r.time), str(r.event_type))
            lines.append(",".join(fields))
        return "\n".join(lines) + "\n"

    def exclusions_csv(self) -> str:
        lines = ["row_number,reason"]
        for row_number, _raw, reason in self.exclusion_log:
            lines.append(f"{row_number},{reason}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class AnalysisDataset:
    """One adverse event of a trial with event types remapped by a scheme.

    Event types are analysis codes: 0 censored, 1 event of interest,
    2 competing event (absent for the composite schemes).
    """

    savvy_id: str
    ae_id: int
    scheme: str
    records: tuple

    @property
    def has_competing(self) -> bool:
        return self.scheme in SCHEMES_WITH_COMPETING

    def group_arrays(self, group):
        """Times and analysis codes of one treatment group as numpy arrays."""
        recs = [r for r in self.records if r.group == group]
        times = np.array([r.time for r in recs], dtype=float)
        codes = np.array([r.event_type for r in recs], dtype=np.int64)
        return times, codes

    def group_size(self, group) -> int:
        return sum(1 for r in self.records if r.group == group)


def parse_trial_csv(content: str, savvy_id: str, experimental: str = "A") -> TrialDataset:
    """Parse and validate a Table-format trial CSV.

    Rows with missing fields, non-positive times or an unknown event type go
    to the exclusion log; an unreadable header, a row with the wrong number of
    columns, or duplicate (ae_id, patient_id) pairs abort the parse.

    ``experimental`` names the value of the ``group`` column that denotes the
    experimental arm; it is mapped to "A", the remaining label to "B".
    """
    reader = csv.reader(io.StringIO(content))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input: no header row")
    header = [h.strip().lstrip("﻿").lower() for h in header]
    if tuple(header) != CSV_HEADER:
        raise ParseError(
            f"unreadable header: expected {','.join(CSV_HEADER)}, got {','.join(header)}")

    rows = []          # (row_number, fields)
    exclusions = []
    for row_number, fields in enumerate(reader, start=2):
        if not fields or (len(fields) == 1 and fields[0].strip() == ""):
            continue  # blank line
        if len(fields) != len(CSV_HEADER):
            raise ParseError(
                f"row {row_number}: expected {len(CSV_HEADER)} columns, got {len(fields)}")
        rows.append((row_number, tuple(f.strip() for f in fields)))

    parsed = []        # (row_number, fields, ae_id, pid, label, time, etype)
    for row_number, fields in rows:
        ae_s, pid, label, time_s, etype_s = fields
        if any(f == "" for f in fields):
            exclusions.append((row_number, fields, "missing data"))
            continue
        try:
            ae_id = int(ae_s)
        except ValueError:
            exclusions.append((row_number, fields, "invalid ae_id"))
            continue
        if ae_id <= 0:
            exclusions.append((row_number, fields, "invalid ae_id"))
            continue
        try:
            time = float(time_s)
        except ValueError:
            exclusions.append((row_number, fields, "invalid time"))
            continue
        if not np.isfinite(time):
            exclusions.append((row_number, fields, "invalid time"))
            continue
        if time < 0:
            exclusions.append((row_number, fields, "negative event time"))
            continue
        if time == 0:
            exclusions.append((row_number, fields, "zero event time"))
            continue
        try:
            etype = int(etype_s)
        except ValueError:
            exclusions.append((row_number, fields, "event type not in {0,1,2,3}"))
            continue
        if etype not in (CENSORED, AE, HARD_COMPETING, SOFT_COMPETING):
            exclusions.append((row_number, fields, "event type not in {0,1,2,3}"))
            continue
        parsed.append((row_number, fields, ae_id, pid, label, time, etype))

    labels = sorted({p[4] for p in parsed})
    if len(labels) > 2:
        raise IntegrityError(f"more than two treatment group labels: {labels}")
    if labels and experimental not in labels and len(labels) == 2:
        raise IntegrityError(
            f"experimental group label {experimental!r} not found; labels present: {labels}")

    seen = set()
    records = []
    for _row_number, fields, ae_id, pid, label, time, etype in parsed:
        key = (ae_id, pid)
        if key in seen:
            raise IntegrityError(f"duplicate (ae_id, patient_id) pair: {key}")
        seen.add(key)
        group = "A" if label == experimental else "B"
        records.append(EventRecord(ae_id, pid, group, time, etype, raw=fields))

    control = [lab for lab in labels if lab != experimental]
    group_labels = {"A": experimental}
    if control:
        group_labels["B"] = control[0]
    return TrialDataset(savvy_id, tuple(records),
                        tuple((rn, f, reason) for rn, f, reason in exclusions),
                        group_labels)


def apply_event_scheme(dataset: TrialDataset, scheme: str, ae_id=None) -> AnalysisDataset:
    """Remap the raw event types of one adverse event under an analysis scheme.

    all_events           hard and soft competing events become one competing state
    death_only           hard stays competing, soft becomes censored
    composite_all_events AE + hard + soft fold into the event of interest
    composite_death_only AE + hard fold into the event, soft becomes censored
    """
    if isinstance(dataset, AnalysisDataset):
        raise TypeError("dataset is already scheme-remapped; re-application is not defined")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    ids = dataset.ae_ids()
    if ae_id is None:
        if len(ids) != 1:
            raise ValidationError(f"dataset has AEs {ids}; ae_id must be given")
        ae_id = ids[0]
    if ae_id not in ids:
        raise ValidationError(f"ae_id {ae_id} not present in trial {dataset.savvy_id}")
    mapping = _SCHEME_MAP[scheme]
    records = tuple(replace(r, event_type=mapping[r.event_type], raw=None)
                    for r in dataset.records_for(ae_id))
    return AnalysisDataset(dataset.savvy_id, ae_id, scheme, records)


_TYPE_NAMES = {0: "censored", 1: "event", 2: "competing"}


@dataclass(frozen=True)
class DescriptiveSummary:
    """Counts and event-time statistics per event type, per group and overall.

    ``cells`` maps (group, type) to a dict with ``count``, ``mean_time``,
    ``median_time``, ``min_time``, ``max_time``; group is "A", "B" or
    "overall", type is "censored"/"event"/"competing"/"all".  Time statistics
    are None for empty strata.
    """

    cells: dict

    def count(self, group, event_type="all"):
        return self.cells[(group, event_type)]["count"]

    def to_dict(self):
        out = {}
        for group in ("A", "B", "overall"):
            out[group] = {etype: dict(self.cells[(group, etype)])
                          for etype in ("censored", "event", "competing", "all")}
        return out


def _stats(times):
    if len(times) == 0:
        return {"count": 0, "mean_time": None, "median_time": None,
                "min_time": None, "max_time": None}
    arr = np.asarray(times, dtype=float)
    return {"count": int(arr.size),
            "mean_time": float(arr.mean()),
            "median_time": float(np.median(arr)),
            "min_time": float(arr.min()),
            "max_time": float(arr.max())}


def describe(dataset: AnalysisDataset) -> DescriptiveSummary:
    """Descriptive summary of an analysis dataset, per event type and group."""
    if not dataset.records:
        raise ValidationError("empty dataset")
    cells = {}
    for group in ("A", "B", "overall"):
        recs = [r for r in dataset.records if group == "overall" or r.group == group]
        for code, name in _TYPE_NAMES.items():
            cells[(group, name)] = _stats([r.time for r in recs if r.event_type == code])
        cells[(group, "all")] = _stats([r.time for r in recs])
    return DescriptiveSummary(cells)
