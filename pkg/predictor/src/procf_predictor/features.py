"""Event-log parsing and feature rows per the engine's published contract.

Column layout (must match the engine handshake exactly):
  1. ``count:<activity>`` per alphabet activity, alphabet order, raw counts;
  2. per schema attribute (event attrs then case attrs, declaration order):
     numeric -> one column, min-max scaled by the log-wide range and clamped
     to [0, 1] (constant attributes use width 1); categorical -> one
     ``name=level`` column per level (declared levels, else sorted observed).

Event attributes are last-state encoded over the prefix; a trace's outcome
label is the mapping of its last terminal activity.
"""

import csv
import io
import json

import numpy as np


class Schema:
    def __init__(self, doc: dict):
        self.activities = list(doc["activities"])
        self.event_attrs = [("ev_" + name, spec if isinstance(spec, dict) else {"type": spec})
                            for name, spec in doc.get("event_attrs", {}).items()]
        self.case_attrs = [("case_" + name, spec if isinstance(spec, dict) else {"type": spec})
                           for name, spec in doc.get("case_attrs", {}).items()]
        self.outcome = dict(doc["outcome"])

    @classmethod
    def load(cls, path) -> "Schema":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    @property
    def attrs(self):
        return self.event_attrs + self.case_attrs


class Log:
    """Parsed traces: per case an ordered event list plus case attributes."""

    def __init__(self, schema: Schema, cases: dict, outcomes: dict):
        self.schema = schema
        self.cases = cases        # case_id -> list of (activity, {attr: value})
        self.outcomes = outcomes  # case_id -> outcome label

    @classmethod
    def load(cls, path, schema: Schema) -> "Log":
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        expected = (["case_id", "activity", "timestamp"]
                    + [name for name, _ in schema.event_attrs]
                    + [name for name, _ in schema.case_attrs])
        if header != expected:
            raise ValueError(f"unexpected header {header}, wanted {expected}")

        n_ev = len(schema.event_attrs)
        rows_by_case = {}
        case_attrs = {}
        for row in reader:
            if not row:
                continue
            case_id, activity, timestamp = row[0], row[1], row[2]
            ev_values = {}
            for (name, spec), raw in zip(schema.event_attrs, row[3:3 + n_ev]):
                ev_values[name] = float(raw) if spec["type"] == "numeric" else raw
            ca = {}
            for (name, spec), raw in zip(schema.case_attrs, row[3 + n_ev:]):
                ca[name] = float(raw) if spec["type"] == "numeric" else raw
            rows_by_case.setdefault(case_id, []).append((timestamp, activity, ev_values))
            case_attrs[case_id] = ca

        cases = {}
        outcomes = {}
        for case_id, rows in rows_by_case.items():
            rows.sort(key=lambda r: r[0])
            events = [(activity, values) for _, activity, values in rows]
            label = None
            for activity, _ in events:
                if activity in schema.outcome:
                    label = schema.outcome[activity]
            if label is None:
                raise ValueError(f"case {case_id} has no terminal activity")
            cases[case_id] = (events, case_attrs[case_id])
            outcomes[case_id] = label
        return cls(schema, cases, outcomes)


class Encoder:
    """Flat feature rows with the engine's exact column layout."""

    def __init__(self, schema: Schema, log: Log):
        self.schema = schema
        self.ranges = {}
        self.levels = {}
        for name, spec in schema.attrs:
            values = self._observed(log, name)
            if spec["type"] == "numeric":
                self.ranges[name] = (min(values), max(values)) if values else (0.0, 0.0)
            else:
                self.levels[name] = (list(spec["levels"]) if "levels" in spec
                                     else sorted(set(values)))
        self.columns = [f"count:{a}" for a in schema.activities]
        for name, spec in schema.attrs:
            if spec["type"] == "numeric":
                self.columns.append(name)
            else:
                self.columns.extend(f"{name}={level}" for level in self.levels[name])

    @staticmethod
    def _observed(log: Log, name: str):
        out = []
        for events, case_attrs in log.cases.values():
            if name.startswith("case_"):
                out.append(case_attrs[name])
            else:
                out.extend(values[name] for _, values in events)
        return out

    def _default(self, name: str, spec: dict):
        if "default" in spec:
            return float(spec["default"]) if spec["type"] == "numeric" else str(spec["default"])
        if spec["type"] == "numeric":
            return 0.0
        levels = self.levels.get(name) or [""]
        return levels[0]

    def prefix_row(self, events, case_attrs, k: int) -> list:
        head = events[:k]
        row = []
        counts = {a: 0 for a in self.schema.activities}
        for activity, _ in head:
            counts[activity] += 1
        row.extend(float(counts[a]) for a in self.schema.activities)

        for name, spec in self.schema.attrs:
            if name.startswith("case_"):
                value = case_attrs[name]
            else:
                value = None
                for _, values in head:
                    if name in values:
                        value = values[name]
                if value is None:
                    value = self._default(name, spec)
            if spec["type"] == "numeric":
                lo, hi = self.ranges[name]
                width = hi - lo if hi > lo else 1.0
                row.append(min(1.0, max(0.0, (float(value) - lo) / width)))
            else:
                for level in self.levels[name]:
                    row.append(1.0 if value == level else 0.0)
        return row

    def training_rows(self, log: Log, prefix_lengths=None):
        """One row per (trace, valid prefix length), labeled with the outcome."""
        X, y = [], []
        for case_id in sorted(log.cases):
            events, case_attrs = log.cases[case_id]
            lengths = prefix_lengths or range(1, len(events))
            for k in lengths:
                if not 0 < k < len(events):
                    continue
                X.append(self.prefix_row(events, case_attrs, k))
                y.append(log.outcomes[case_id])
        return np.asarray(X, dtype=np.float64), y
