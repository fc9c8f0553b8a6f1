"""Gene-level encoding of trace prefixes and the flat feature matrix.

An encoded instance keeps the control flow bundled as a single gene
(activity sequence plus its per-activity frequency histogram, updated
only together) next to one gene per declared attribute: event attributes
carry their last observed value in the prefix, case attributes are copied.

The flat representation consumed by predictors and the surrogate tree
lays out columns as: one count column per alphabet activity, then per
schema attribute either one min-max-scaled numeric column or a one-hot
group. Count columns stay raw so tree splits read as activity counts.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from procf._kernels import levenshtein_ids
from procf.errors import SchemaError
from procf.event_log import CATEGORICAL, NUMERIC, LogSchema, Prefix

log = logging.getLogger(__name__)

REAL = "real"
SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class ControlFlowGene:
    """Activity sequence and its histogram, moved as one unit."""

    sequence: tuple
    freq_vector: tuple

    @classmethod
    def from_sequence(cls, sequence, alphabet) -> "ControlFlowGene":
        counts = {a: 0 for a in alphabet}
        for activity in sequence:
            if activity not in counts:
                raise SchemaError(f"activity {activity!r} not in alphabet")
            counts[activity] += 1
        return cls(sequence=tuple(sequence), freq_vector=tuple(counts[a] for a in alphabet))


@dataclass(frozen=True)
class AttrGene:
    name: str
    value: object          # float for numeric, str for categorical
    kind: str              # "event" | "case"
    absent: bool = field(default=False, compare=False)


@dataclass(frozen=True)
class EncodedInstance:
    control_flow: ControlFlowGene
    attr_genes: tuple
    provenance: str = field(default=REAL, compare=False)

    @property
    def genes(self) -> tuple:
        return (self.control_flow,) + self.attr_genes

    def with_genes(self, genes, provenance=SYNTHETIC) -> "EncodedInstance":
        return EncodedInstance(control_flow=genes[0], attr_genes=tuple(genes[1:]),
                               provenance=provenance)


def encode(prefix: Prefix, schema: LogSchema) -> EncodedInstance:
    """Encode a prefix: histogrammed control flow, last-state event attrs."""
    gene = ControlFlowGene.from_sequence(prefix.activity_sequence(), schema.activities)

    attr_genes = []
    for spec in schema.event_attrs:
        value, seen = None, False
        for ev in prefix.events:
            for name, v in ev.attrs:
                if name == spec.name:
                    value, seen = v, True
        if not seen:
            value = spec.default_value()
        _check_type(spec, value)
        attr_genes.append(AttrGene(name=spec.name, value=value, kind="event", absent=not seen))
    case_map = dict(prefix.case_attrs)
    for spec in schema.case_attrs:
        if spec.name not in case_map:
            raise SchemaError(f"prefix of case {prefix.case_id} missing case attribute {spec.name}")
        value = case_map[spec.name]
        _check_type(spec, value)
        attr_genes.append(AttrGene(name=spec.name, value=value, kind="case"))

    return EncodedInstance(control_flow=gene, attr_genes=tuple(attr_genes), provenance=REAL)


def _check_type(spec, value):
    if spec.kind == NUMERIC and not isinstance(value, (int, float)):
        raise SchemaError(f"attribute {spec.name}: expected numeric value, got {value!r}")
    if spec.kind == CATEGORICAL and not isinstance(value, str):
        raise SchemaError(f"attribute {spec.name}: expected categorical value, got {value!r}")


# ---------------------------------------------------------------------------
# Flat feature matrix
# ---------------------------------------------------------------------------

COUNT = "count"
NUM = "num"
CAT = "cat"


@dataclass(frozen=True)
class Column:
    kind: str              # "count" | "num" | "cat"
    name: str              # activity name or attribute name
    level: str = None      # categorical level for one-hot columns
    lo: float = 0.0        # raw range of numeric columns
    hi: float = 1.0

    @property
    def display(self) -> str:
        if self.kind == COUNT:
            return f"count:{self.name}"
        if self.kind == CAT:
            return f"{self.name}={self.level}"
        return self.name

    def denormalize(self, scaled: float) -> float:
        width = self.hi - self.lo if self.hi > self.lo else 1.0
        return self.lo + scaled * width


@dataclass(frozen=True)
class FeatureMatrix:
    data: np.ndarray
    columns: tuple

    def __post_init__(self):
        assert self.data.ndim == 2 and self.data.shape[1] == len(self.columns)

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def display_names(self) -> tuple:
        return tuple(col.display for col in self.columns)


class FeatureCodec:
    """Fixed column layout for one run, derived from schema + log profile."""

    def __init__(self, schema: LogSchema, ranges: dict, levels: dict):
        self.schema = schema
        self.ranges = dict(ranges)
        self.levels = dict(levels)
        cols = [Column(kind=COUNT, name=a) for a in schema.activities]
        for spec in schema.attrs:
            if spec.kind == NUMERIC:
                lo, hi = self.ranges.get(spec.name, (0.0, 1.0))
                cols.append(Column(kind=NUM, name=spec.name, lo=float(lo), hi=float(hi)))
            else:
                for level in self.levels.get(spec.name, ()):
                    cols.append(Column(kind=CAT, name=spec.name, level=level))
        self.columns = tuple(cols)
        self._index = {col.display: i for i, col in enumerate(self.columns)}

    @classmethod
    def from_log(cls, event_log) -> "FeatureCodec":
        return cls(event_log.schema, event_log.ranges, event_log.levels)

    def column_index(self, display_name: str) -> int:
        return self._index[display_name]

    def flatten(self, instances) -> FeatureMatrix:
        """Flatten encoded instances into the run's column layout.

        Numerics are min-max scaled by the log ranges and clamped to [0,1];
        categoricals are one-hot with unknown levels mapped to all zeros.
        """
        n = len(instances)
        data = np.zeros((n, len(self.columns)), dtype=np.float64)
        n_acts = len(self.schema.activities)
        if n:
            data[:, :n_acts] = np.array(
                [inst.control_flow.freq_vector for inst in instances], dtype=np.float64
            )

        col = n_acts
        for j, spec in enumerate(self.schema.attrs):
            if spec.kind == NUMERIC:
                lo, hi = self.ranges.get(spec.name, (0.0, 1.0))
                width = hi - lo if hi > lo else 1.0
                for i, inst in enumerate(instances):
                    scaled = (float(inst.attr_genes[j].value) - lo) / width
                    data[i, col] = min(1.0, max(0.0, scaled))
                col += 1
            else:
                levels = self.levels.get(spec.name, ())
                offset = {level: k for k, level in enumerate(levels)}
                for i, inst in enumerate(instances):
                    value = inst.attr_genes[j].value
                    k = offset.get(value)
                    if k is None:
                        log.warning("unknown level %r for %s; one-hot left all-zero",
                                    value, spec.name)
                    else:
                        data[i, col + k] = 1.0
                col += len(levels)
        return FeatureMatrix(data=data, columns=self.columns)

    def flatten_one(self, instance) -> np.ndarray:
        return self.flatten([instance]).data[0]


# ---------------------------------------------------------------------------
# Mixed-type distance between two instances
# ---------------------------------------------------------------------------

def _seq_ids(a, b):
    vocab = {}
    for token in a:
        vocab.setdefault(token, len(vocab))
    for token in b:
        vocab.setdefault(token, len(vocab))
    return (np.array([vocab[t] for t in a], dtype=np.int64),
            np.array([vocab[t] for t in b], dtype=np.int64))


def normalized_levenshtein(a, b) -> float:
    """Edit distance between token sequences scaled by the longer length."""
    ia, ib = _seq_ids(tuple(a), tuple(b))
    return levenshtein_ids(ia, ib) / max(len(ia), len(ib), 1)


def distance(x: EncodedInstance, z: EncodedInstance, ranges: dict) -> float:
    """Per-gene mixed distance in [0, 1].

    Control flow contributes a length-normalized edit distance; categorical
    genes contribute simple matching; numeric genes contribute the absolute
    difference of range-clamped values scaled by the log range. All genes
    weigh equally.
    """
    if len(x.attr_genes) != len(z.attr_genes):
        raise SchemaError("instances do not share a schema")
    total = normalized_levenshtein(x.control_flow.sequence, z.control_flow.sequence)
    for gx, gz in zip(x.attr_genes, z.attr_genes):
        if gx.name != gz.name:
            raise SchemaError(f"gene order mismatch: {gx.name} vs {gz.name}")
        if isinstance(gx.value, str) or isinstance(gz.value, str):
            total += 0.0 if gx.value == gz.value else 1.0
        else:
            lo, hi = ranges.get(gx.name, (0.0, 1.0))
            width = hi - lo if hi > lo else 1.0
            vx = min(hi, max(lo, float(gx.value))) if hi > lo else float(gx.value)
            vz = min(hi, max(lo, float(gz.value))) if hi > lo else float(gz.value)
            total += min(abs(vx - vz) / width, 1.0)
    return total / (1 + len(x.attr_genes))
