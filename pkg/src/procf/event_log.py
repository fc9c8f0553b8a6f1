"""Event-log data model, CSV parsing and prefix slicing.

Canonical input is a CSV with one row per event and fixed column roles::

    case_id, activity, timestamp, ev_<name>..., case_<name>...

plus a JSON schema sidecar declaring attribute types, the activity
alphabet, and the mapping from terminal activities to outcome labels.
Timestamps are ISO-8601; ties are broken by file order (stable sort).

Attributes are referred to everywhere by their CSV column name
(``ev_amount``, ``case_tier``), which keeps event-level and case-level
names from colliding.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from procf.errors import LogFormatError, PrefixLengthError, SchemaError

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class AttrSpec:
    """Declared type of one event- or case-level attribute."""

    name: str            # canonical column name (ev_* / case_*)
    kind: str            # "numeric" | "categorical"
    scope: str           # "event" | "case"
    default: object = None
    levels: tuple = None  # declared categorical levels, optional

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"attribute {self.name}: unknown type {self.kind!r}")

    def coerce(self, raw: str):
        if self.kind == NUMERIC:
            try:
                return float(raw)
            except ValueError:
                raise SchemaError(f"attribute {self.name}: expected numeric, got {raw!r}")
        return str(raw)

    def default_value(self, resolved_levels=None):
        if self.default is not None:
            return float(self.default) if self.kind == NUMERIC else str(self.default)
        if self.kind == NUMERIC:
            return 0.0
        levels = self.levels or resolved_levels or ()
        return levels[0] if levels else ""


@dataclass(frozen=True)
class LogSchema:
    """Declared structure of an event log."""

    activities: tuple
    event_attrs: tuple   # AttrSpec, declaration order
    case_attrs: tuple    # AttrSpec, declaration order
    outcome_map: dict    # terminal activity -> outcome label

    def __post_init__(self):
        if len(set(self.activities)) != len(self.activities):
            raise SchemaError("duplicate activity in alphabet")
        for terminal in self.outcome_map:
            if terminal not in self.activities:
                raise SchemaError(f"outcome terminal {terminal!r} not in activity alphabet")
        if len(self.outcome_labels) < 2:
            raise SchemaError("outcome mapping must cover at least two labels")

    @property
    def attrs(self) -> tuple:
        return self.event_attrs + self.case_attrs

    @property
    def outcome_labels(self) -> tuple:
        seen = []
        for label in self.outcome_map.values():
            if label not in seen:
                seen.append(label)
        return tuple(seen)

    @property
    def terminal_activities(self) -> tuple:
        return tuple(self.outcome_map)

    @classmethod
    def from_json(cls, source) -> "LogSchema":
        if isinstance(source, (str, Path)) and "\n" not in str(source):
            with open(source, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        elif isinstance(source, str):
            doc = json.loads(source)
        else:
            doc = source

        def specs(section: str, scope: str, prefix: str):
            out = []
            for name, spec in doc.get(section, {}).items():
                if isinstance(spec, str):
                    spec = {"type": spec}
                out.append(AttrSpec(
                    name=f"{prefix}{name}",
                    kind=spec["type"],
                    scope=scope,
                    default=spec.get("default"),
                    levels=tuple(spec["levels"]) if "levels" in spec else None,
                ))
            return tuple(out)

        return cls(
            activities=tuple(doc["activities"]),
            event_attrs=specs("event_attrs", "event", "ev_"),
            case_attrs=specs("case_attrs", "case", "case_"),
            outcome_map=dict(doc["outcome"]),
        )

    def to_json(self) -> dict:
        def section(specs, prefix):
            out = {}
            for s in specs:
                entry = {"type": s.kind}
                if s.default is not None:
                    entry["default"] = s.default
                if s.levels is not None:
                    entry["levels"] = list(s.levels)
                out[s.name[len(prefix):]] = entry
            return out

        return {
            "activities": list(self.activities),
            "event_attrs": section(self.event_attrs, "ev_"),
            "case_attrs": section(self.case_attrs, "case_"),
            "outcome": dict(self.outcome_map),
        }


@dataclass(frozen=True)
class Event:
    activity: str
    case_id: str
    timestamp: datetime
    attrs: tuple  # ((name, value), ...) in schema order

    def attr(self, name):
        for key, value in self.attrs:
            if key == name:
                return value
        raise KeyError(name)


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: tuple
    case_attrs: tuple  # ((name, value), ...) in schema order
    outcome: str

    def __post_init__(self):
        if len(self.events) < 1:
            raise LogFormatError(f"case {self.case_id}: trace has zero events")
        for ev in self.events:
            if ev.case_id != self.case_id:
                raise LogFormatError(f"case {self.case_id}: event with foreign case id {ev.case_id}")
        for prev, cur in zip(self.events, self.events[1:]):
            if cur.timestamp < prev.timestamp:
                raise LogFormatError(f"case {self.case_id}: timestamps not nondecreasing")

    def __len__(self):
        return len(self.events)

    def activity_sequence(self) -> tuple:
        return tuple(ev.activity for ev in self.events)


@dataclass(frozen=True)
class Prefix:
    case_id: str
    events: tuple
    case_attrs: tuple
    k: int

    def __len__(self):
        return len(self.events)

    def activity_sequence(self) -> tuple:
        return tuple(ev.activity for ev in self.events)


@dataclass(frozen=True)
class EventLog:
    traces: tuple
    schema: LogSchema
    ranges: dict = field(compare=False)   # numeric attr -> (min, max)
    levels: dict = field(compare=False)   # categorical attr -> resolved levels

    def trace_by_case(self, case_id: str) -> Trace:
        for trace in self.traces:
            if trace.case_id == case_id:
                return trace
        raise KeyError(case_id)

    def range_width(self, name: str) -> float:
        lo, hi = self.ranges[name]
        return (hi - lo) if hi > lo else 1.0


def take_prefix(source, k: int) -> Prefix:
    """First k events of a trace or prefix, 0 < k < len(source).

    Slicing composes: take_prefix(take_prefix(t, k), j) == take_prefix(t, j)
    whenever j < k.
    """
    if not 0 < k < len(source):
        raise PrefixLengthError(
            f"case {source.case_id}: prefix length must satisfy 0 < k < {len(source)}, got {k}"
        )
    return Prefix(
        case_id=source.case_id,
        events=source.events[:k],
        case_attrs=source.case_attrs,
        k=k,
    )


# ---------------------------------------------------------------------------
# CSV parsing / serialization
# ---------------------------------------------------------------------------

_FIXED_COLUMNS = ("case_id", "activity", "timestamp")


def _expected_header(schema: LogSchema) -> list:
    return list(_FIXED_COLUMNS) + [s.name for s in schema.event_attrs] + [s.name for s in schema.case_attrs]


def parse_log(source, schema: LogSchema) -> "EventLog":
    """Parse a CSV event stream into an EventLog.

    ``source`` is a path, a file object, or CSV text. Events are grouped by
    case id and stably sorted by timestamp within a case; each trace's
    outcome label comes from the last terminal activity it contains.
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "," not in source):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise LogFormatError("empty input, expected a header row")
    expected = _expected_header(schema)
    if header != expected:
        raise LogFormatError(f"header mismatch: expected {expected}, got {header}", line=1)

    n_event_attrs = len(schema.event_attrs)
    by_case = {}        # case_id -> list of (order, Event)
    case_attr_rows = {}  # case_id -> tuple of case attr values
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(expected):
            raise LogFormatError(f"expected {len(expected)} fields, got {len(row)}", line=line_no)
        case_id, activity, ts_raw = row[0], row[1], row[2]
        if activity not in schema.activities:
            raise LogFormatError(f"unknown activity {activity!r}", line=line_no)
        try:
            timestamp = datetime.fromisoformat(ts_raw)
        except ValueError:
            raise LogFormatError(f"bad timestamp {ts_raw!r}", line=line_no)
        try:
            ev_values = tuple(
                (spec.name, spec.coerce(raw))
                for spec, raw in zip(schema.event_attrs, row[3:3 + n_event_attrs])
            )
            case_values = tuple(
                (spec.name, spec.coerce(raw))
                for spec, raw in zip(schema.case_attrs, row[3 + n_event_attrs:])
            )
        except SchemaError as exc:
            raise LogFormatError(str(exc), line=line_no)

        event = Event(activity=activity, case_id=case_id, timestamp=timestamp, attrs=ev_values)
        by_case.setdefault(case_id, []).append(event)
        prior = case_attr_rows.setdefault(case_id, case_values)
        if prior != case_values:
            raise LogFormatError(f"case {case_id}: inconsistent case attributes", line=line_no)

    traces = []
    for case_id, events in by_case.items():
        events = sorted(events, key=lambda ev: ev.timestamp)  # stable: ties keep file order
        outcome = None
        for ev in events:
            if ev.activity in schema.outcome_map:
                outcome = schema.outcome_map[ev.activity]
        if outcome is None:
            raise LogFormatError(
                f"case {case_id}: no terminal activity among {sorted(schema.outcome_map)}"
            )
        traces.append(Trace(
            case_id=case_id,
            events=tuple(events),
            case_attrs=case_attr_rows[case_id],
            outcome=outcome,
        ))

    ranges, levels = _profile(traces, schema)
    return EventLog(traces=tuple(traces), schema=schema, ranges=ranges, levels=levels)


def _profile(traces, schema: LogSchema):
    """Numeric min/max and resolved categorical levels over the whole log."""
    ranges = {}
    observed = {}
    for spec in schema.attrs:
        if spec.kind == CATEGORICAL:
            observed[spec.name] = set()

    def see(spec, value):
        if spec.kind == NUMERIC:
            lo, hi = ranges.get(spec.name, (value, value))
            ranges[spec.name] = (min(lo, value), max(hi, value))
        else:
            observed[spec.name].add(value)

    for trace in traces:
        for spec, (_, value) in zip(schema.case_attrs, trace.case_attrs):
            see(spec, value)
        for ev in trace.events:
            for spec, (_, value) in zip(schema.event_attrs, ev.attrs):
                see(spec, value)

    for spec in schema.attrs:
        if spec.kind == NUMERIC and spec.name not in ranges:
            ranges[spec.name] = (0.0, 0.0)

    levels = {}
    for spec in schema.attrs:
        if spec.kind == CATEGORICAL:
            if spec.levels is not None:
                levels[spec.name] = tuple(spec.levels)
            else:
                levels[spec.name] = tuple(sorted(observed[spec.name]))
            if not levels[spec.name]:
                levels[spec.name] = ("",)
    return ranges, levels


def serialize_log(log: EventLog) -> str:
    """CSV text that parses back to an equal EventLog."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_expected_header(log.schema))

    def fmt(spec, value):
        if spec.kind == NUMERIC:
            return repr(float(value))
        return value

    for trace in log.traces:
        case_cells = [fmt(spec, value) for spec, (_, value) in zip(log.schema.case_attrs, trace.case_attrs)]
        for ev in trace.events:
            ev_cells = [fmt(spec, value) for spec, (_, value) in zip(log.schema.event_attrs, ev.attrs)]
            writer.writerow([trace.case_id, ev.activity, ev.timestamp.isoformat()] + ev_cells + case_cells)
    return buf.getvalue()
