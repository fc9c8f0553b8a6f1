"""Synthetic neighborhood generation around a prefix to be explained.

Stage 0 seeds the gene pool with real prefixes whose control flow lies
within an edit-distance threshold of the instance under explanation.
Stage 1 then runs one genetic population per outcome class; crossover and
mutation treat the control-flow gene as a single unit drawn only from the
stage-0 pool, so every synthetic control flow was observed in the log.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from procf._kernels import levenshtein_ids
from procf.encoding import (
    SYNTHETIC,
    AttrGene,
    EncodedInstance,
    FeatureCodec,
    distance,
    encode,
    normalized_levenshtein,
)
from procf.errors import SchemaError
from procf.event_log import NUMERIC, EventLog, take_prefix
from procf.seeding import substream


@dataclass(frozen=True)
class GaConfig:
    """Genetic-search parameters; one population of ``population`` per class."""

    population: int = 600
    generations: int = 15
    crossover_prob: float = 0.2
    mutation_prob: float = 0.7
    similarity_threshold: int = 2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError(f"crossover_prob must be in [0,1], got {self.crossover_prob}")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError(f"mutation_prob must be in [0,1], got {self.mutation_prob}")
        if self.population < 4:
            raise ValueError(f"population must be >= 4, got {self.population}")
        if self.generations < 1:
            raise ValueError(f"generations must be >= 1, got {self.generations}")
        if self.similarity_threshold < 0:
            raise ValueError("similarity_threshold must be nonnegative")


def levenshtein(a, b) -> int:
    """Minimum insert/delete/substitute edits between two token sequences."""
    vocab = {}
    for token in tuple(a) + tuple(b):
        vocab.setdefault(token, len(vocab))
    ia = np.array([vocab[t] for t in a], dtype=np.int64)
    ib = np.array([vocab[t] for t in b], dtype=np.int64)
    return int(levenshtein_ids(ia, ib))


class EmpiricalDist:
    """Observed value multiset of one attribute; draws are frequency-weighted."""

    def __init__(self, values, kind: str):
        self.kind = kind
        if kind == NUMERIC:
            self.values = np.asarray(list(values), dtype=np.float64)
        else:
            self.values = np.asarray(list(values), dtype=object)
        if self.values.size == 0:
            raise ValueError("empirical distribution needs at least one observation")

    def draw(self, rng):
        value = self.values[int(rng.integers(0, self.values.size))]
        return float(value) if self.kind == NUMERIC else str(value)


@dataclass(frozen=True)
class InitialPool:
    """Stage-0 material: similar real prefixes and log-wide attribute values."""

    x: EncodedInstance
    instances: tuple                # similar-prefix encodings, x included
    cf_pool: tuple                  # distinct ControlFlowGenes of the instances
    attr_empirical: dict = field(compare=False)  # attr name -> EmpiricalDist


def build_initial_pool(x: EncodedInstance, log: EventLog, k: int, cfg: GaConfig) -> InitialPool:
    """Encode every length-k prefix of the log within the edit threshold of x."""
    schema = log.schema
    x_seq = x.control_flow.sequence
    instances = [x]
    genes = {x.control_flow.sequence: x.control_flow}
    for trace in log.traces:
        if len(trace) <= k:
            continue
        prefix = take_prefix(trace, k)
        seq = prefix.activity_sequence()
        if levenshtein(x_seq, seq) > cfg.similarity_threshold:
            continue
        inst = encode(prefix, schema)
        instances.append(inst)
        genes.setdefault(inst.control_flow.sequence, inst.control_flow)

    attr_empirical = {}
    for spec in schema.event_attrs:
        values = [value for trace in log.traces for ev in trace.events
                  for name, value in ev.attrs if name == spec.name]
        if not values:
            values = [spec.default_value(log.levels.get(spec.name))]
        attr_empirical[spec.name] = EmpiricalDist(values, spec.kind)
    for spec in schema.case_attrs:
        values = [value for trace in log.traces
                  for name, value in trace.case_attrs if name == spec.name]
        if not values:
            values = [spec.default_value(log.levels.get(spec.name))]
        attr_empirical[spec.name] = EmpiricalDist(values, spec.kind)

    return InitialPool(
        x=x,
        instances=tuple(instances),
        cf_pool=tuple(genes.values()),
        attr_empirical=attr_empirical,
    )


def fitness(x: EncodedInstance, z: EncodedInstance, target: str, z_label: str, ranges: dict) -> float:
    """Score in [0, 2]: right class, close to x, but not x itself."""
    score = (1.0 if z_label == target else 0.0) + (1.0 - distance(x, z, ranges))
    if z == x:
        score -= 1.0
    return score


def crossover(parent1: EncodedInstance, parent2: EncodedInstance, rng):
    """Two-point crossover over the gene list [control_flow, attr_1, ...].

    The control-flow gene moves as one unit: its sequence and frequency
    vector are never separated.
    """
    g1 = list(parent1.genes)
    g2 = list(parent2.genes)
    if len(g1) != len(g2):
        raise SchemaError("parents do not share a schema")
    cuts = rng.integers(0, len(g1) + 1, size=2)
    lo, hi = int(min(cuts)), int(max(cuts))
    g1[lo:hi], g2[lo:hi] = g2[lo:hi], g1[lo:hi]
    return parent1.with_genes(g1), parent2.with_genes(g2)


def mutate(instance: EncodedInstance, pool: InitialPool, p_m: float, rng) -> EncodedInstance:
    """Replace each gene independently with probability p_m.

    The control-flow gene is redrawn from the stage-0 pool; attribute genes
    are redrawn from the log's empirical value distributions.
    """
    genes = list(instance.genes)
    coins = rng.random(len(genes))
    if coins[0] < p_m:
        genes[0] = pool.cf_pool[int(rng.integers(0, len(pool.cf_pool)))]
    for i, gene in enumerate(instance.attr_genes, start=1):
        if coins[i] < p_m:
            value = pool.attr_empirical[gene.name].draw(rng)
            genes[i] = AttrGene(name=gene.name, value=value, kind=gene.kind)
    return instance.with_genes(genes)


@dataclass(frozen=True)
class Neighborhood:
    """Labeled synthetic set Z with per-class membership and a split."""

    instances: tuple
    labels: tuple
    by_class: dict = field(compare=False)   # label -> tuple of indices
    reachable: tuple = ()
    train_idx: tuple = ()
    test_idx: tuple = ()

    def class_sizes(self) -> dict:
        return {label: len(idx) for label, idx in self.by_class.items()}


def _lev_cache(x: EncodedInstance, pool: InitialPool) -> dict:
    cache = {}
    for gene in pool.cf_pool:
        cache[gene.sequence] = normalized_levenshtein(x.control_flow.sequence, gene.sequence)
    return cache


def _population_fitness(x, population, labels, target, ranges, lev_cache):
    """Vector of Eq-style fitness scores; edit distances come from the cache."""
    n_attrs = len(x.attr_genes)
    scores = np.empty(len(population), dtype=np.float64)
    for i, (z, z_label) in enumerate(zip(population, labels)):
        seq = z.control_flow.sequence
        lev = lev_cache.get(seq)
        if lev is None:
            lev = normalized_levenshtein(x.control_flow.sequence, seq)
            lev_cache[seq] = lev
        total = lev
        for gx, gz in zip(x.attr_genes, z.attr_genes):
            if isinstance(gx.value, str):
                total += 0.0 if gx.value == gz.value else 1.0
            else:
                lo, hi = ranges.get(gx.name, (0.0, 1.0))
                width = hi - lo if hi > lo else 1.0
                vx = min(hi, max(lo, float(gx.value))) if hi > lo else float(gx.value)
                vz = min(hi, max(lo, float(gz.value))) if hi > lo else float(gz.value)
                total += min(abs(vx - vz) / width, 1.0)
        d = total / (1 + n_attrs)
        score = (1.0 if z_label == target else 0.0) + (1.0 - d)
        if z == x:
            score -= 1.0
        scores[i] = score
    return scores


def select_top_half(population, scores):
    """Indices of the ceil(N/2) highest-fitness members, stable on ties."""
    keep = math.ceil(len(population) / 2)
    order = np.argsort(-scores, kind="stable")
    return [int(i) for i in order[:keep]]


def generate_neighborhood(
    x: EncodedInstance,
    pool: InitialPool,
    predictor,
    cfg: GaConfig,
    codec: FeatureCodec,
    on_generation=None,
) -> Neighborhood:
    """Run one genetic population per outcome class and pool the results.

    Each generation is labeled with a single batched predictor call, scored
    against the class target, truncated to its top half, recombined with
    probability ``crossover_prob`` and mutated per gene with probability
    ``mutation_prob``. Final populations are binned by their actual
    black-box label; exact duplicates collapse before the stratified
    80/20 split.
    """
    ranges = codec.ranges
    outcome_set = tuple(predictor.outcome_set)
    lev_cache = _lev_cache(x, pool)
    n = cfg.population

    collected = []   # (instance, label) in deterministic order
    for target in outcome_set:
        rng = substream(cfg.seed, "ga", target)
        idx = rng.integers(0, len(pool.instances), size=n)
        population = [replace(pool.instances[int(i)], provenance=SYNTHETIC) for i in idx]

        for generation in range(cfg.generations):
            labels = predictor.predict_batch(codec.flatten(population))
            scores = _population_fitness(x, population, labels, target, ranges, lev_cache)
            selected = select_top_half(population, scores)
            if on_generation is not None:
                on_generation({
                    "target": target,
                    "generation": generation,
                    "population": population,
                    "labels": labels,
                    "scores": scores,
                    "selected": selected,
                })
            parents = [population[i] for i in selected]
            bred = []
            while len(bred) < n:
                pick = rng.integers(0, len(parents), size=2)
                p1, p2 = parents[int(pick[0])], parents[int(pick[1])]
                if rng.random() < cfg.crossover_prob:
                    c1, c2 = crossover(p1, p2, rng)
                else:
                    c1, c2 = replace(p1, provenance=SYNTHETIC), replace(p2, provenance=SYNTHETIC)
                bred.append(c1)
                bred.append(c2)
            del bred[n:]
            population = [mutate(child, pool, cfg.mutation_prob, rng) for child in bred]

        final_labels = predictor.predict_batch(codec.flatten(population))
        if on_generation is not None:
            on_generation({
                "target": target,
                "generation": cfg.generations,
                "population": population,
                "labels": final_labels,
                "scores": None,
                "selected": None,
            })
        collected.extend(zip(population, final_labels))

    # exact duplicates collapse to their first occurrence
    seen = set()
    instances, labels = [], []
    for inst, label in collected:
        key = inst.genes
        if key in seen:
            continue
        seen.add(key)
        instances.append(inst)
        labels.append(label)

    by_class = {label: tuple(i for i, l in enumerate(labels) if l == label)
                for label in outcome_set}
    reachable = tuple(label for label in outcome_set if by_class[label])

    split_rng = substream(cfg.seed, "split")
    train_idx, test_idx = [], []
    for label in outcome_set:
        members = list(by_class[label])
        if not members:
            continue
        perm = split_rng.permutation(len(members))
        n_train = math.ceil(0.8 * len(members))
        train_idx.extend(members[int(i)] for i in perm[:n_train])
        test_idx.extend(members[int(i)] for i in perm[n_train:])

    return Neighborhood(
        instances=tuple(instances),
        labels=tuple(labels),
        by_class=by_class,
        reachable=reachable,
        train_idx=tuple(sorted(train_idx)),
        test_idx=tuple(sorted(test_idx)),
    )
