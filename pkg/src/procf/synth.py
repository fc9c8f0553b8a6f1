"""Seeded synthetic event-log generation for tests and desk-scale runs.

A ProcessSpec is a small control-flow grammar (sequence, XOR choice,
bounded repeat) plus attribute samplers and an outcome rule table. Every
generated trace is a walk of the grammar followed by exactly one terminal
activity chosen by the first matching outcome rule.
"""

from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from procf.errors import ProcessSpecError
from procf.event_log import (
    CATEGORICAL,
    NUMERIC,
    AttrSpec,
    Event,
    EventLog,
    LogSchema,
    Trace,
    _profile,
)


@dataclass(frozen=True)
class Act:
    name: str


@dataclass(frozen=True)
class Choice:
    branches: tuple          # tuple of step-tuples
    weights: tuple = None    # uniform when None


@dataclass(frozen=True)
class Repeat:
    body: tuple
    prob: float              # probability of each extra iteration
    max_repeats: int = 3


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def draw(self, rng):
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class Pick:
    levels: tuple
    weights: tuple = None

    def draw(self, rng):
        p = None
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            p = w / w.sum()
        return str(rng.choice(list(self.levels), p=p))


@dataclass(frozen=True)
class OutcomeRule:
    """First-match rule on case attributes or activity counts.

    ``attr`` is a canonical case attribute name or ``count:<activity>``;
    op is one of <=, >, ==, !=.
    """

    attr: str
    op: str
    value: object
    terminal: str

    def matches(self, case_attrs: dict, counts: dict) -> bool:
        if self.attr.startswith("count:"):
            actual = counts.get(self.attr[len("count:"):], 0)
        else:
            actual = case_attrs[self.attr]
        if self.op == "<=":
            return actual <= self.value
        if self.op == ">":
            return actual > self.value
        if self.op == "==":
            return actual == self.value
        if self.op == "!=":
            return actual != self.value
        raise ProcessSpecError(f"unknown outcome-rule op {self.op!r}")


@dataclass(frozen=True)
class ProcessSpec:
    flow: tuple                      # steps before the terminal activity
    event_attr_dists: dict           # ev_<name> -> sampler
    case_attr_dists: dict            # case_<name> -> sampler
    outcome_rules: tuple             # OutcomeRule, first match wins
    default_terminal: str
    outcome_map: dict                # terminal activity -> label
    start: datetime = field(default=datetime(2024, 1, 1, 8, 0, 0), compare=False)

    def __post_init__(self):
        targets = {rule.terminal for rule in self.outcome_rules} | {self.default_terminal}
        for terminal in self.outcome_map:
            if terminal not in targets:
                raise ProcessSpecError(f"outcome terminal {terminal!r} unreachable by any rule")
        for terminal in targets:
            if terminal not in self.outcome_map:
                raise ProcessSpecError(f"rule targets undeclared terminal {terminal!r}")

    def alphabet(self) -> tuple:
        names = []

        def walk(steps):
            for step in steps:
                if isinstance(step, Act):
                    if step.name not in names:
                        names.append(step.name)
                elif isinstance(step, Choice):
                    for branch in step.branches:
                        walk(branch)
                elif isinstance(step, Repeat):
                    walk(step.body)
                else:
                    raise ProcessSpecError(f"unknown step {step!r}")

        walk(self.flow)
        return tuple(names) + tuple(t for t in self.outcome_map if t not in names)

    def to_schema(self) -> LogSchema:
        def specs(dists, scope, prefix):
            out = []
            for name, dist in dists.items():
                kind = NUMERIC if isinstance(dist, Uniform) else CATEGORICAL
                levels = dist.levels if isinstance(dist, Pick) else None
                out.append(AttrSpec(name=name, kind=kind, scope=scope,
                                    levels=tuple(levels) if levels else None))
            return tuple(out)

        return LogSchema(
            activities=self.alphabet(),
            event_attrs=specs(self.event_attr_dists, "event", "ev_"),
            case_attrs=specs(self.case_attr_dists, "case", "case_"),
            outcome_map=dict(self.outcome_map),
        )


def _walk(steps, rng, out):
    for step in steps:
        if isinstance(step, Act):
            out.append(step.name)
        elif isinstance(step, Choice):
            p = None
            if step.weights is not None:
                w = np.asarray(step.weights, dtype=float)
                p = w / w.sum()
            idx = int(rng.choice(len(step.branches), p=p))
            _walk(step.branches[idx], rng, out)
        elif isinstance(step, Repeat):
            _walk(step.body, rng, out)
            repeats = 0
            while repeats < step.max_repeats and rng.random() < step.prob:
                _walk(step.body, rng, out)
                repeats += 1
    return out


def generate_synthetic_log(spec: ProcessSpec, n_traces: int, seed: int) -> EventLog:
    """Deterministic log of ``n_traces`` walks of the spec's grammar."""
    if n_traces <= 0:
        raise ProcessSpecError(f"n_traces must be positive, got {n_traces}")
    schema = spec.to_schema()
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    traces = []
    for i in range(n_traces):
        case_id = f"c{i:05d}"
        case_attrs = tuple(
            (name, dist.draw(rng)) for name, dist in spec.case_attr_dists.items()
        )
        activities = _walk(spec.flow, rng, [])
        counts = {}
        for a in activities:
            counts[a] = counts.get(a, 0) + 1

        attrs_map = dict(case_attrs)
        terminal = spec.default_terminal
        for rule in spec.outcome_rules:
            if rule.matches(attrs_map, counts):
                terminal = rule.terminal
                break
        activities.append(terminal)

        t = spec.start
        events = []
        for activity in activities:
            t = t + timedelta(minutes=1 + int(rng.integers(0, 10)))
            ev_attrs = tuple(
                (name, dist.draw(rng)) for name, dist in spec.event_attr_dists.items()
            )
            events.append(Event(activity=activity, case_id=case_id, timestamp=t, attrs=ev_attrs))
        traces.append(Trace(
            case_id=case_id,
            events=tuple(events),
            case_attrs=case_attrs,
            outcome=spec.outcome_map[terminal],
        ))

    ranges, levels = _profile(traces, schema)
    return EventLog(traces=tuple(traces), schema=schema, ranges=ranges, levels=levels)


def demo_order_process() -> ProcessSpec:
    """Order-handling process behind the bundled desk-scale experiments.

    Two XOR choices (check path, closing path), an optional bounded rework
    loop, two event attributes and three case attributes; outcomes correlate
    with credit, tier and rework count. Walks are 6 to 10 events long.
    """
    return ProcessSpec(
        flow=(
            Act("Receive"),
            Act("Triage"),
            Choice(branches=((Act("FastCheck"),), (Act("FullCheck"), Act("QA"))),
                   weights=(0.55, 0.45)),
            Act("Prepare"),
            Choice(branches=((), (Repeat(body=(Act("Rework"),), prob=0.4, max_repeats=1),)),
                   weights=(0.6, 0.4)),
            Choice(branches=((Act("Ship"), Act("Notify")), (Act("Notify"),)),
                   weights=(0.7, 0.3)),
        ),
        event_attr_dists={
            "ev_amount": Uniform(10.0, 500.0),
            "ev_channel": Pick(("web", "phone", "branch"), weights=(0.5, 0.3, 0.2)),
        },
        case_attr_dists={
            "case_credit": Uniform(300.0, 850.0),
            "case_tier": Pick(("bronze", "silver", "gold"), weights=(0.4, 0.35, 0.25)),
            "case_region": Pick(("north", "south", "east", "west")),
        },
        outcome_rules=(
            OutcomeRule("case_credit", "<=", 450.0, "Rejected"),
            OutcomeRule("count:Rework", ">", 1, "Canceled"),
            OutcomeRule("case_tier", "==", "bronze", "Canceled"),
        ),
        default_terminal="Done",
        outcome_map={"Done": "completed", "Canceled": "canceled", "Rejected": "rejected"},
    )


DEMO_ORACLE = {
    "rules": [
        {"if": [["case_credit", "<=", 0.28]], "then": "rejected"},
        {"if": [["count:Rework", ">", 1.5]], "then": "canceled"},
        {"if": [["case_tier=bronze", ">", 0.5], ["ev_amount", ">", 0.65]], "then": "canceled"},
        {"if": [["ev_channel=branch", ">", 0.5], ["case_credit", "<=", 0.4]], "then": "rejected"},
    ],
    "default": "completed",
}


def accepts(spec: ProcessSpec, sequence: tuple) -> bool:
    """Replay check: is ``sequence`` a walk of the grammar plus one terminal?"""
    if not sequence or sequence[-1] not in spec.outcome_map:
        return False
    body = tuple(sequence[:-1])

    def ends(steps, start: int) -> set:
        positions = {start}
        for step in steps:
            positions = _step_ends(step, positions)
            if not positions:
                return positions
        return positions

    def _step_ends(step, starts: set) -> set:
        out = set()
        for pos in starts:
            if isinstance(step, Act):
                if pos < len(body) and body[pos] == step.name:
                    out.add(pos + 1)
            elif isinstance(step, Choice):
                for branch in step.branches:
                    out |= ends(branch, pos)
            elif isinstance(step, Repeat):
                reached = ends(step.body, pos)
                out |= reached
                for _ in range(step.max_repeats):
                    nxt = set()
                    for p in reached:
                        nxt |= ends(step.body, p)
                    nxt -= out
                    if not nxt:
                        break
                    out |= nxt
                    reached = nxt
        return out

    return len(body) in ends(spec.flow, 0)
