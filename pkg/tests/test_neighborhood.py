import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from procf.blackbox import RuleOracle
from procf.encoding import AttrGene, ControlFlowGene, EncodedInstance, distance, encode
from procf.event_log import take_prefix
from procf.neighborhood import (
    EmpiricalDist,
    GaConfig,
    build_initial_pool,
    crossover,
    fitness,
    generate_neighborhood,
    levenshtein,
    mutate,
    select_top_half,
)
from oracles import levenshtein_recursive

SMALL_CFG = GaConfig(population=20, generations=3, similarity_threshold=2, seed=11)


def tiny_oracle():
    return RuleOracle(rules=[([("ev_amount", ">", 0.5)], "ok")], default_label="bad")


@pytest.fixture()
def tiny_pool(tiny_x, tiny_log):
    return build_initial_pool(tiny_x, tiny_log, k=2, cfg=SMALL_CFG)


# --- levenshtein -------------------------------------------------------------

def test_levenshtein_identity():
    assert levenshtein(("A", "B", "C"), ("A", "B", "C")) == 0


def test_levenshtein_single_deletion():
    assert levenshtein(("A", "B", "C"), ("A", "C")) == 1


def test_levenshtein_empty_vs_two():
    assert levenshtein((), ("A", "B")) == 2


@given(st.lists(st.sampled_from("abc"), max_size=7), st.lists(st.sampled_from("abc"), max_size=7))
@settings(deadline=None)
def test_levenshtein_matches_recursive_oracle(a, b):
    assert levenshtein(tuple(a), tuple(b)) == levenshtein_recursive(a, b)


# --- initial pool ------------------------------------------------------------

def test_pool_threshold_zero_keeps_equal_sequences(tiny_x, tiny_log):
    cfg = GaConfig(population=20, generations=1, similarity_threshold=0, seed=1)
    pool = build_initial_pool(tiny_x, tiny_log, k=2, cfg=cfg)
    for inst in pool.instances:
        assert inst.control_flow.sequence == tiny_x.control_flow.sequence


def test_pool_large_threshold_takes_all_prefixes(tiny_x, tiny_log):
    cfg = GaConfig(population=20, generations=1, similarity_threshold=99, seed=1)
    pool = build_initial_pool(tiny_x, tiny_log, k=2, cfg=cfg)
    eligible = sum(1 for t in tiny_log.traces if len(t) > 2)
    assert len(pool.instances) == eligible + 1  # x itself is prepended


def test_pool_degenerates_to_x(tiny_log):
    # k = 3: only c1 (length 4) has a strictly longer trace; ask for a far sequence
    x = EncodedInstance(
        control_flow=ControlFlowGene.from_sequence(
            ("End_bad", "End_bad", "End_bad"), tiny_log.schema.activities),
        attr_genes=encode(take_prefix(tiny_log.traces[0], 3), tiny_log.schema).attr_genes,
    )
    cfg = GaConfig(population=20, generations=1, similarity_threshold=0, seed=1)
    pool = build_initial_pool(x, tiny_log, k=3, cfg=cfg)
    assert pool.instances == (x,)
    assert pool.cf_pool == (x.control_flow,)


def test_pool_respects_threshold(tiny_x, tiny_log):
    pool = build_initial_pool(tiny_x, tiny_log, k=2, cfg=SMALL_CFG)
    for gene in pool.cf_pool:
        assert levenshtein(gene.sequence, tiny_x.control_flow.sequence) <= 2


# --- fitness -----------------------------------------------------------------

def test_fitness_of_x_itself(tiny_x, tiny_log):
    assert fitness(tiny_x, tiny_x, "ok", "ok", tiny_log.ranges) == 1.0
    assert fitness(tiny_x, tiny_x, "ok", "bad", tiny_log.ranges) == 0.0


def test_fitness_right_class_close_instance(tiny_x, tiny_log):
    z = EncodedInstance(
        control_flow=tiny_x.control_flow,
        attr_genes=tiny_x.attr_genes[:-1] + (AttrGene("case_tier", "silver", "case"),),
    )
    d = distance(tiny_x, z, tiny_log.ranges)
    assert fitness(tiny_x, z, "ok", "ok", tiny_log.ranges) == pytest.approx(2.0 - d)


def test_fitness_worked_values(tiny_x, tiny_log):
    # fabricate labels/distances: z != x, right class, d = 0.25 -> 1.75
    z = EncodedInstance(
        control_flow=tiny_x.control_flow,
        attr_genes=(
            AttrGene("ev_amount", 7.0, "event"),  # range (1, 9): |9-7|/8 = 0.25 -> d = 0.25/2...
            tiny_x.attr_genes[1],
        ),
    )
    # with 2 attr genes and identical control flow, d = (0 + 0.25 + 0)/3
    assert fitness(tiny_x, z, "ok", "ok", tiny_log.ranges) == pytest.approx(2.0 - 0.25 / 3)
    # wrong class and maximal distance floors at 0
    far = EncodedInstance(
        control_flow=ControlFlowGene.from_sequence(
            ("End_bad",) * 8, tiny_log.schema.activities),
        attr_genes=(AttrGene("ev_amount", 1.0, "event"),
                    AttrGene("case_tier", "zzz", "case")),
    )
    assert fitness(tiny_x, far, "ok", "bad", tiny_log.ranges) >= 0.0


# --- crossover ---------------------------------------------------------------

class FixedCuts:
    """rng stub returning preset cut points."""

    def __init__(self, cuts):
        self.cuts = np.asarray(cuts)

    def integers(self, low, high, size=None):
        return self.cuts


def genes_of(inst):
    return [inst.control_flow] + list(inst.attr_genes)


def test_crossover_swaps_control_flow_bundle(tiny_pool):
    a, b = tiny_pool.instances[0], tiny_pool.instances[-1]
    c1, c2 = crossover(a, b, FixedCuts([0, 1]))  # segment = gene 0 only
    assert c1.control_flow == b.control_flow
    assert c2.control_flow == a.control_flow
    assert c1.attr_genes == a.attr_genes
    assert c2.attr_genes == b.attr_genes
    # bundle integrity: histogram still matches sequence
    for child in (c1, c2):
        rebuilt = ControlFlowGene.from_sequence(child.control_flow.sequence,
                                                ("A", "B", "C", "End_ok", "End_bad"))
        assert rebuilt.freq_vector == child.control_flow.freq_vector


def test_crossover_empty_segment_copies_parents(tiny_pool):
    a, b = tiny_pool.instances[0], tiny_pool.instances[-1]
    c1, c2 = crossover(a, b, FixedCuts([1, 1]))
    assert c1 == a and c2 == b


def test_crossover_identical_parents(tiny_pool, rng):
    a = tiny_pool.instances[0]
    c1, c2 = crossover(a, a, rng)
    assert c1 == a and c2 == a


# --- mutate ------------------------------------------------------------------

def test_mutate_zero_probability_is_identity(tiny_pool, rng):
    inst = tiny_pool.instances[0]
    assert mutate(inst, tiny_pool, 0.0, rng) == inst


def test_mutate_probability_one_forces_pool_draw(tiny_x, tiny_log, rng):
    cfg = GaConfig(population=20, generations=1, similarity_threshold=0, seed=5)
    pool = build_initial_pool(tiny_x, tiny_log, k=2, cfg=cfg)
    only_gene = pool.cf_pool[0]
    mutated = mutate(tiny_x, pool, 1.0, rng)
    assert mutated.control_flow == only_gene


def test_mutate_closure_over_pool(tiny_pool, rng):
    genes = set(g.sequence for g in tiny_pool.cf_pool)
    inst = tiny_pool.instances[0]
    for _ in range(200):
        inst = mutate(inst, tiny_pool, 0.7, rng)
        assert inst.control_flow.sequence in genes


def test_mutate_draws_from_empirical(tiny_pool, rng):
    observed_amounts = set(tiny_pool.attr_empirical["ev_amount"].values.tolist())
    observed_tiers = set(tiny_pool.attr_empirical["case_tier"].values.tolist())
    inst = tiny_pool.instances[0]
    for _ in range(100):
        inst = mutate(inst, tiny_pool, 1.0, rng)
        assert inst.attr_genes[0].value in observed_amounts
        assert inst.attr_genes[1].value in observed_tiers


def test_empirical_dist_is_frequency_weighted():
    dist = EmpiricalDist([1.0, 1.0, 1.0, 5.0], kind="numeric")
    rng = np.random.default_rng(0)
    draws = [dist.draw(rng) for _ in range(2000)]
    assert 0.65 <= draws.count(1.0) / len(draws) <= 0.85


# --- selection and the full generation loop -----------------------------------

def test_selection_matches_sort_oracle(rng):
    population = list(range(10))
    scores = rng.random(10)
    picked = select_top_half(population, scores)
    expected = sorted(range(10), key=lambda i: -scores[i])[:5]
    assert sorted(picked) == sorted(expected)
    assert len(picked) == 5


def test_selection_stable_on_ties():
    scores = np.array([1.0, 0.5, 1.0, 0.5])
    assert select_top_half([0, 1, 2, 3], scores) == [0, 2]


def test_generate_neighborhood_contract(tiny_x, tiny_pool, tiny_codec):
    oracle = tiny_oracle()
    seen_sizes = []
    pool_genes = set(g.sequence for g in tiny_pool.cf_pool)

    def hook(event):
        seen_sizes.append(len(event["population"]))
        for inst in event["population"]:
            assert inst.control_flow.sequence in pool_genes
        if event["scores"] is not None:
            scores = event["scores"]
            picked = event["selected"]
            worst_picked = min(scores[i] for i in picked)
            best_left = max((scores[i] for i in range(len(scores)) if i not in set(picked)),
                            default=-1)
            assert worst_picked >= best_left

    nb = generate_neighborhood(tiny_x, tiny_pool, oracle, SMALL_CFG, tiny_codec,
                               on_generation=hook)
    assert set(seen_sizes) == {SMALL_CFG.population}
    # every instance's label is its actual black-box prediction
    matrix = tiny_codec.flatten(nb.instances)
    assert list(nb.labels) == oracle.predict_batch(matrix)
    # split partitions the indices
    assert sorted(nb.train_idx + nb.test_idx) == list(range(len(nb.instances)))
    # no duplicates survive
    assert len({inst.genes for inst in nb.instances}) == len(nb.instances)


def test_constant_predictor_reaches_single_class(tiny_x, tiny_pool, tiny_codec):
    constant = RuleOracle(rules=[], default_label="ok", labels=["ok", "bad"])
    nb = generate_neighborhood(tiny_x, tiny_pool, constant, SMALL_CFG, tiny_codec)
    assert nb.reachable == ("ok",)
    assert nb.by_class["bad"] == ()
    assert all(label == "ok" for label in nb.labels)


def test_generate_neighborhood_deterministic(tiny_x, tiny_pool, tiny_codec):
    oracle = tiny_oracle()
    nb1 = generate_neighborhood(tiny_x, tiny_pool, oracle, SMALL_CFG, tiny_codec)
    nb2 = generate_neighborhood(tiny_x, tiny_pool, oracle, SMALL_CFG, tiny_codec)
    assert nb1.instances == nb2.instances
    assert nb1.labels == nb2.labels
    assert nb1.train_idx == nb2.train_idx


def test_stratified_split_proportions(tiny_x, tiny_pool, tiny_codec):
    oracle = tiny_oracle()
    cfg = GaConfig(population=40, generations=2, similarity_threshold=2, seed=3)
    nb = generate_neighborhood(tiny_x, tiny_pool, oracle, cfg, tiny_codec)
    import math
    for label, members in nb.by_class.items():
        if not members:
            continue
        train_members = [i for i in members if i in set(nb.train_idx)]
        assert len(train_members) == math.ceil(0.8 * len(members))


# --- fitness bounds property ---------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_fitness_bounds_property(tiny_log, data):
    schema = tiny_log.schema
    seq = data.draw(st.lists(st.sampled_from(schema.activities), min_size=1, max_size=5))
    seq2 = data.draw(st.lists(st.sampled_from(schema.activities), min_size=1, max_size=5))

    def inst(seq, amount, tier):
        return EncodedInstance(
            control_flow=ControlFlowGene.from_sequence(tuple(seq), schema.activities),
            attr_genes=(AttrGene("ev_amount", amount, "event"),
                        AttrGene("case_tier", tier, "case")),
        )

    x = inst(seq, data.draw(st.floats(0, 10, allow_nan=False)), data.draw(st.sampled_from(["gold", "silver"])))
    z = inst(seq2, data.draw(st.floats(0, 10, allow_nan=False)), data.draw(st.sampled_from(["gold", "silver"])))
    target = data.draw(st.sampled_from(["ok", "bad"]))
    z_label = data.draw(st.sampled_from(["ok", "bad"]))
    value = fitness(x, z, target, z_label, tiny_log.ranges)
    assert 0.0 <= value <= 2.0
    assert fitness(x, x, target, z_label, tiny_log.ranges) in (0.0, 1.0)
