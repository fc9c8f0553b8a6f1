"""Factual and counterfactual rules read off the surrogate tree.

A rule is the conjunction of a root-to-leaf path after merging every
condition that touches the same column: numeric and count columns keep
their tightest bounds, one-hot columns collapse to ``attr = level`` or
``attr != level``. Counterfactual leaves are ranked by how few merged
conditions the explained instance violates, i.e. by the least change
needed to reach the other outcome.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from procf.encoding import CAT, COUNT, NUM, EncodedInstance, FeatureCodec
from procf.errors import ProcfError
from procf.neighborhood import InitialPool
from procf.surrogate import Leaf, Split, SurrogateTree, route

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Condition:
    attr: str          # display attribute ("CreditScore", "count:Rework", ...)
    op: str            # "<=", ">", "==", "!="
    value: object      # raw-unit display value (float, int, or level)
    col: int           # feature-matrix column index
    bound: float       # matrix-space threshold used for evaluation

    def satisfied_by(self, row) -> bool:
        v = row[self.col]
        if self.op == "<=":
            return v <= self.bound
        if self.op == ">":
            return v > self.bound
        if self.op == "==":
            return v > self.bound
        return v <= self.bound

    def render(self) -> str:
        op = {"<=": "<=", ">": ">", "==": "=", "!=": "!="}[self.op]
        value = self.value
        if isinstance(value, float) and value == int(value):
            value = int(value)
        return f"{self.attr} {op} {value}"


@dataclass(frozen=True)
class Rule:
    conditions: tuple
    outcome: str
    support: int
    violated: tuple = ()     # indices into conditions not satisfied by x

    @property
    def n_violations(self) -> int:
        return len(self.violated)

    def render(self) -> str:
        body = " AND ".join(c.render() for c in self.conditions) or "(always)"
        return f"{{{body}}} -> {self.outcome}"

    def to_json(self) -> dict:
        return {
            "conditions": [
                {"attr": c.attr, "op": c.op, "value": c.value,
                 "violated": i in self.violated}
                for i, c in enumerate(self.conditions)
            ],
            "outcome": self.outcome,
            "support": self.support,
            "violations": self.n_violations,
        }


def _merge_path(steps, columns) -> tuple:
    """Merge raw (column, went_left, threshold) steps into conditions."""
    order = []
    bounds = {}   # col -> {"hi": float|None, "lo": float|None}
    for col, went_left, threshold in steps:
        if col not in bounds:
            bounds[col] = {"hi": None, "lo": None}
            order.append(col)
        entry = bounds[col]
        if went_left:
            entry["hi"] = threshold if entry["hi"] is None else min(entry["hi"], threshold)
        else:
            entry["lo"] = threshold if entry["lo"] is None else max(entry["lo"], threshold)

    conditions = []
    for col in order:
        spec = columns[col]
        hi, lo = bounds[col]["hi"], bounds[col]["lo"]
        if spec.kind == CAT:
            # a one-hot path cannot bound the same level from both sides
            if lo is not None:
                conditions.append(Condition(attr=spec.name, op="==", value=spec.level,
                                            col=col, bound=lo))
            if hi is not None:
                conditions.append(Condition(attr=spec.name, op="!=", value=spec.level,
                                            col=col, bound=hi))
            continue
        if lo is not None:
            value = math.floor(lo) if spec.kind == COUNT else spec.denormalize(lo)
            attr = spec.display if spec.kind == COUNT else spec.name
            conditions.append(Condition(attr=attr, op=">", value=value, col=col, bound=lo))
        if hi is not None:
            value = math.floor(hi) if spec.kind == COUNT else spec.denormalize(hi)
            attr = spec.display if spec.kind == COUNT else spec.name
            conditions.append(Condition(attr=attr, op="<=", value=value, col=col, bound=hi))
    return tuple(conditions)


def _leaf_paths(tree: SurrogateTree):
    """Every (steps, leaf) pair in deterministic left-first order."""
    out = []

    def walk(node, steps):
        if isinstance(node, Leaf):
            out.append((tuple(steps), node))
            return
        walk(node.left, steps + [(node.column, True, node.threshold)])
        walk(node.right, steps + [(node.column, False, node.threshold)])

    walk(tree.root, [])
    return out


def extract_factual(tree: SurrogateTree, x_row: np.ndarray) -> Rule:
    """Merged conditions of x's own root-to-leaf path."""
    steps = []
    node = tree.root
    while isinstance(node, Split):
        went_left = x_row[node.column] <= node.threshold
        steps.append((node.column, went_left, node.threshold))
        node = node.left if went_left else node.right
    conditions = _merge_path(steps, tree.columns)
    violated = tuple(i for i, c in enumerate(conditions) if not c.satisfied_by(x_row))
    if violated:
        raise ProcfError("internal: factual path produced violated conditions")
    return Rule(conditions=conditions, outcome=node.label, support=node.support)


def extract_counterfactuals(tree: SurrogateTree, x_row: np.ndarray, max_rules: int = 3):
    """Rules of other-class leaves with the fewest conditions x violates.

    Ties break toward larger leaf support, then fewer conditions, then
    path order.
    """
    factual_label = route(tree, x_row).label
    candidates = []
    for path_index, (steps, leaf) in enumerate(_leaf_paths(tree)):
        if leaf.label == factual_label:
            continue
        conditions = _merge_path(steps, tree.columns)
        violated = tuple(i for i, c in enumerate(conditions) if not c.satisfied_by(x_row))
        rule = Rule(conditions=conditions, outcome=leaf.label,
                    support=leaf.support, violated=violated)
        candidates.append((rule.n_violations, -leaf.support, len(conditions), path_index, rule))
    candidates.sort(key=lambda item: item[:4])
    return [rule for *_, rule in candidates[:max_rules]]


# ---------------------------------------------------------------------------
# Concrete counterfactual instances
# ---------------------------------------------------------------------------

def sample_counterfactual_instances(
    rule: Rule,
    x: EncodedInstance,
    pool: InitialPool,
    n: int,
    rng,
    codec: FeatureCodec,
):
    """Copies of x minimally edited so that every rule condition holds.

    Genes that already satisfy their conditions stay untouched. Control-flow
    conditions are met only by swapping in a whole pool gene whose histogram
    satisfies them; rules no pool gene can meet yield an empty list.
    """
    columns = codec.columns
    count_conds = [c for c in rule.conditions if columns[c.col].kind == COUNT]
    by_attr = {}
    for c in rule.conditions:
        if columns[c.col].kind != COUNT:
            by_attr.setdefault(columns[c.col].name, []).append(c)

    # control-flow candidates
    alphabet_index = {a: i for i, a in enumerate(codec.schema.activities)}

    def gene_ok(gene) -> bool:
        for cond in count_conds:
            freq = gene.freq_vector[alphabet_index[columns[cond.col].name]]
            ok = freq <= cond.bound if cond.op == "<=" else freq > cond.bound
            if not ok:
                return False
        return True

    cf_keep = gene_ok(x.control_flow)
    cf_candidates = [g for g in pool.cf_pool if gene_ok(g)]
    if not cf_keep and not cf_candidates:
        log.warning("rule %s unsatisfiable: no pool control flow meets its count conditions",
                    rule.render())
        return []

    # per-attribute targets; keep/alter decisions use the same matrix-space
    # evaluation as the violation counts
    x_row = codec.flatten_one(x)
    plans = {}
    for attr, conds in by_attr.items():
        gene = next(g for g in x.attr_genes if g.name == attr)
        spec_col = columns[next(c.col for c in conds)]
        if all(c.satisfied_by(x_row) for c in conds):
            continue
        if spec_col.kind == NUM:
            lo_range, hi_range = codec.ranges.get(attr, (0.0, 1.0))
            hi = min([hi_range] + [c.value for c in conds if c.op == "<="])
            lo = max([c.value for c in conds if c.op == ">"], default=None)
            effective_lo = lo_range if lo is None else max(lo, lo_range)
            if (lo is not None and effective_lo >= hi) or effective_lo > hi:
                log.warning("rule %s unsatisfiable: empty interval for %s", rule.render(), attr)
                return []
            plans[attr] = ("num", effective_lo, hi, lo is not None)
        else:
            required = {c.value for c in conds if c.op == "=="}
            excluded = {c.value for c in conds if c.op == "!="}
            if len(required) > 1 or (required & excluded):
                log.warning("rule %s unsatisfiable: conflicting levels for %s", rule.render(), attr)
                return []
            if required:
                allowed = sorted(required)
            else:
                allowed = [l for l in codec.levels.get(attr, ()) if l not in excluded]
            if not allowed:
                log.warning("rule %s unsatisfiable: no level left for %s", rule.render(), attr)
                return []
            plans[attr] = ("cat", allowed)

    out = []
    for _ in range(n):
        instance = None
        for _attempt in range(16):  # redraw on ulp-edge boundary draws
            genes = list(x.genes)
            if count_conds and not cf_keep:
                genes[0] = cf_candidates[int(rng.integers(0, len(cf_candidates)))]
            for i, gene in enumerate(x.attr_genes, start=1):
                plan = plans.get(gene.name)
                if plan is None:
                    continue
                if plan[0] == "num":
                    _, lo, hi, lo_exclusive = plan
                    if lo_exclusive:
                        value = lo + (hi - lo) * (1.0 - rng.random())  # in (lo, hi]
                    else:
                        value = lo + (hi - lo) * rng.random()
                    genes[i] = type(gene)(name=gene.name, value=float(value), kind=gene.kind)
                else:
                    allowed = plan[1]
                    genes[i] = type(gene)(name=gene.name,
                                          value=allowed[int(rng.integers(0, len(allowed)))],
                                          kind=gene.kind)
            candidate = x.with_genes(genes)
            row = codec.flatten_one(candidate)
            if all(c.satisfied_by(row) for c in rule.conditions):
                instance = candidate
                break
        if instance is None:
            raise ProcfError(f"internal: could not satisfy rule {rule.render()} by sampling")
        out.append(instance)
    return out


# ---------------------------------------------------------------------------
# Explanation record and cross-instance aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Explanation:
    case_id: str
    prefix_length: int
    predicted_label: str
    factual: Rule
    counterfactuals: tuple
    fidelity: object                  # FidelityReport
    importance: dict = field(compare=False)
    neighborhood_summary: dict = field(compare=False, default=None)
    config: dict = field(compare=False, default=None)
    counterfactual_samples: tuple = field(compare=False, default=())
    counterfactual_sample_agreement: float = field(compare=False, default=None)

    def to_json(self) -> dict:
        return {
            "case_id": self.case_id,
            "prefix_length": self.prefix_length,
            "predicted_label": self.predicted_label,
            "factual": self.factual.to_json(),
            "counterfactuals": [r.to_json() for r in self.counterfactuals],
            "fidelity": self.fidelity.to_json(),
            "importance": {k: self.importance[k] for k in sorted(self.importance)},
            "neighborhood": self.neighborhood_summary,
            "counterfactual_samples": list(self.counterfactual_samples),
            "counterfactual_sample_agreement": self.counterfactual_sample_agreement,
            "config": self.config,
        }


def top_attributes(importance_vector: dict) -> tuple:
    """Attributes tied at the maximum importance (empty for all-zero)."""
    if not importance_vector:
        return ()
    best = max(importance_vector.values())
    if best <= 0:
        return ()
    return tuple(sorted(name for name, v in importance_vector.items() if v == best))


def aggregate_importance(explanations, top_k: int = 5) -> dict:
    """Per prefix length: how often each attribute tops an explanation.

    Counts are normalized by the number of explanations of that length;
    the top_k attributes are returned in descending frequency.
    """
    if not explanations:
        raise ProcfError("aggregate_importance needs at least one explanation")
    by_length = {}
    attrs_by_length = {}
    for expl in explanations:
        k = expl.prefix_length
        by_length.setdefault(k, []).append(top_attributes(expl.importance))
        attrs_by_length.setdefault(k, set()).update(expl.importance)

    out = {}
    for k in sorted(by_length):
        tops = by_length[k]
        counts = {attr: 0.0 for attr in attrs_by_length[k]}
        for top in tops:
            for attr in top:
                counts[attr] += 1.0
        n = len(tops)
        ranking = sorted(((attr, c / n) for attr, c in counts.items()),
                         key=lambda item: (-item[1], item[0]))
        out[k] = ranking[:top_k]
    return out
