import numpy as np
import pytest

from procf.encoding import Column, FeatureMatrix
from procf.explanation import (
    Condition,
    Explanation,
    Rule,
    aggregate_importance,
    extract_counterfactuals,
    extract_factual,
    sample_counterfactual_instances,
    top_attributes,
)
from procf.neighborhood import GaConfig, build_initial_pool
from procf.surrogate import (
    Leaf,
    Split,
    SurrogateTree,
    TreeConfig,
    fit_tree,
    tree_predict,
)
from oracles import brute_counterfactual_minimum


# --- the loan-decision fixture tree -------------------------------------------

LOAN_COLUMNS = (
    Column(kind="num", name="CreditScore", lo=0.0, hi=646.0),
    Column(kind="cat", name="Case_LoanGoal", level="Existing loan takeover"),
    Column(kind="cat", name="Case_LoanGoal", level="Home improvement"),
    Column(kind="cat", name="Case_ApplicationType", level="New credit"),
    Column(kind="cat", name="Case_ApplicationType", level="Limit raise"),
)


def loan_tree() -> SurrogateTree:
    leaf = lambda label, n: Leaf(label=label, support=n, histogram={label: n})
    root = Split(
        column=0, threshold=0.5, n=92, decrease=0.2,
        left=Split(
            column=1, threshold=0.5, n=52, decrease=0.15,
            left=leaf("A_Denied", 10),
            right=Split(
                column=3, threshold=0.5, n=42, decrease=0.1,
                left=leaf("A_Pending", 12),
                right=leaf("A_Denied", 30),
            ),
        ),
        right=leaf("A_Pending", 40),
    )
    return SurrogateTree(root=root, columns=LOAN_COLUMNS, classes=("A_Denied", "A_Pending"))


X_LOAN = np.array([0.0, 1.0, 0.0, 1.0, 0.0])  # CreditScore 0, Existing loan takeover, New credit


def as_tuples(rule):
    return [(c.attr, c.op, c.value) for c in rule.conditions]


def test_factual_rule_matches_published_example():
    rule = extract_factual(loan_tree(), X_LOAN)
    assert rule.outcome == "A_Denied"
    assert as_tuples(rule) == [
        ("CreditScore", "<=", 323.0),
        ("Case_LoanGoal", "==", "Existing loan takeover"),
        ("Case_ApplicationType", "==", "New credit"),
    ]
    assert rule.violated == ()
    assert rule.support == 30


def test_first_counterfactual_is_credit_score_flip():
    rules = extract_counterfactuals(loan_tree(), X_LOAN, max_rules=3)
    assert rules, "expected counterfactual rules"
    first = rules[0]
    assert first.outcome == "A_Pending"
    assert as_tuples(first) == [("CreditScore", ">", 323.0)]
    assert first.n_violations == 1


def test_second_counterfactual_flips_application_type():
    rules = extract_counterfactuals(loan_tree(), X_LOAN, max_rules=3)
    second = rules[1]
    assert second.outcome == "A_Pending"
    assert as_tuples(second) == [
        ("CreditScore", "<=", 323.0),
        ("Case_LoanGoal", "==", "Existing loan takeover"),
        ("Case_ApplicationType", "!=", "New credit"),
    ]
    assert second.n_violations == 1
    assert [i for i in second.violated] == [2]


def test_counterfactual_outcomes_differ_from_factual():
    factual = extract_factual(loan_tree(), X_LOAN)
    for rule in extract_counterfactuals(loan_tree(), X_LOAN, max_rules=10):
        assert rule.outcome != factual.outcome


# --- merging and edge cases -----------------------------------------------------

def test_single_leaf_tree_gives_empty_rule():
    tree = SurrogateTree(root=Leaf(label="P", support=4, histogram={"P": 4}),
                         columns=LOAN_COLUMNS, classes=("P",))
    rule = extract_factual(tree, X_LOAN)
    assert rule.conditions == ()
    assert rule.outcome == "P"
    assert extract_counterfactuals(tree, X_LOAN) == []


def test_repeated_upper_bounds_merge_to_tightest():
    columns = (Column(kind="num", name="u", lo=0.0, hi=1.0),)
    leaf = lambda label, n: Leaf(label=label, support=n, histogram={label: n})
    tree = SurrogateTree(
        root=Split(column=0, threshold=10.0, n=12, decrease=0.1,
                   left=Split(column=0, threshold=5.0, n=8, decrease=0.1,
                              left=leaf("P", 3), right=leaf("N", 5)),
                   right=leaf("N", 4)),
        columns=columns, classes=("N", "P"),
    )
    rule = extract_factual(tree, np.array([3.0]))
    assert as_tuples(rule) == [("u", "<=", 5.0)]
    counter = extract_counterfactuals(tree, np.array([3.0]), max_rules=2)
    # nearest N leaf: 5 < u <= 10, one violated condition (u > 5)
    assert as_tuples(counter[0]) == [("u", ">", 5.0), ("u", "<=", 10.0)]
    assert counter[0].n_violations == 1


def test_count_conditions_render_as_integers():
    columns = (Column(kind="count", name="Rework"),)
    leaf = lambda label, n: Leaf(label=label, support=n, histogram={label: n})
    tree = SurrogateTree(
        root=Split(column=0, threshold=1.5, n=10, decrease=0.1,
                   left=leaf("ok", 6), right=leaf("late", 4)),
        columns=columns, classes=("late", "ok"),
    )
    rule = extract_factual(tree, np.array([0.0]))
    assert as_tuples(rule) == [("count:Rework", "<=", 1)]
    counter = extract_counterfactuals(tree, np.array([0.0]))
    assert as_tuples(counter[0]) == [("count:Rework", ">", 1)]


def test_minimality_matches_brute_force_on_random_trees(rng):
    for _ in range(30):
        n = int(rng.integers(20, 60))
        rows = rng.random((n, 3))
        labels = [str(l) for l in rng.integers(0, 3, size=n)]
        columns = tuple(Column(kind="num", name=f"f{j}", lo=0.0, hi=1.0) for j in range(3))
        matrix = FeatureMatrix(data=rows, columns=columns)
        tree = fit_tree(matrix, labels, TreeConfig(max_depth=6, min_samples_leaf=1))
        x_row = rng.random(3)
        rules = extract_counterfactuals(tree, x_row, max_rules=1)
        expected = brute_counterfactual_minimum(tree, x_row)
        if expected is None:
            assert rules == []
        else:
            assert rules[0].n_violations == expected


# --- counterfactual instance sampling -------------------------------------------

@pytest.fixture()
def tiny_pool(tiny_x, tiny_log):
    return build_initial_pool(tiny_x, tiny_log, k=2,
                              cfg=GaConfig(population=20, generations=1,
                                           similarity_threshold=2, seed=0))


def cond(codec, display, op, value, bound):
    return Condition(attr=display, op=op, value=value,
                     col=codec.column_index(display), bound=bound)


def test_sampling_single_gene_edit(tiny_codec, tiny_x, tiny_pool, rng):
    # ev_amount range is (1, 9); require raw value > 5 (scaled 0.5)
    rule = Rule(conditions=(cond(tiny_codec, "ev_amount", ">", 5.0, 0.5),),
                outcome="bad", support=1)
    drawn = sample_counterfactual_instances(rule, tiny_x, tiny_pool, 20, rng, tiny_codec)
    assert len(drawn) == 20
    for inst in drawn:
        assert inst.control_flow == tiny_x.control_flow
        assert inst.attr_genes[1] == tiny_x.attr_genes[1]
        assert 5.0 < inst.attr_genes[0].value <= 9.0


def test_sampling_empty_rule_copies_x(tiny_codec, tiny_x, tiny_pool, rng):
    rule = Rule(conditions=(), outcome="bad", support=1)
    drawn = sample_counterfactual_instances(rule, tiny_x, tiny_pool, 5, rng, tiny_codec)
    assert drawn == [tiny_x] * 5


def test_sampling_satisfied_conditions_keep_x_genes(tiny_codec, tiny_x, tiny_pool, rng):
    # x's amount is 9 -> already > 5; nothing changes
    rule = Rule(conditions=(cond(tiny_codec, "ev_amount", ">", 5.0, 0.5),),
                outcome="bad", support=1)
    drawn = sample_counterfactual_instances(rule, tiny_x, tiny_pool, 3, rng, tiny_codec)
    assert all(inst == tiny_x for inst in drawn)


def test_sampling_control_flow_from_pool(tiny_codec, tiny_x, tiny_pool, rng):
    # x is (A, B); require one C: only (A, C) qualifies in the pool
    rule = Rule(conditions=(cond(tiny_codec, "count:C", ">", 0, 0.5),),
                outcome="bad", support=1)
    drawn = sample_counterfactual_instances(rule, tiny_x, tiny_pool, 10, rng, tiny_codec)
    assert len(drawn) == 10
    for inst in drawn:
        assert inst.control_flow.sequence == ("A", "C")
        assert inst.control_flow in tiny_pool.cf_pool
        assert inst.attr_genes == tiny_x.attr_genes


def test_sampling_categorical_exclusion(tiny_codec, tiny_x, tiny_pool, rng):
    rule = Rule(conditions=(cond(tiny_codec, "case_tier=gold", "!=", "gold", 0.5),),
                outcome="bad", support=1)
    drawn = sample_counterfactual_instances(rule, tiny_x, tiny_pool, 5, rng, tiny_codec)
    for inst in drawn:
        assert inst.attr_genes[1].value == "silver"


def test_sampling_unsatisfiable_control_flow(tiny_codec, tiny_x, tiny_pool, rng, caplog):
    rule = Rule(conditions=(cond(tiny_codec, "count:End_ok", ">", 0, 0.5),),
                outcome="bad", support=1)
    with caplog.at_level("WARNING"):
        drawn = sample_counterfactual_instances(rule, tiny_x, tiny_pool, 5, rng, tiny_codec)
    assert drawn == []
    assert "unsatisfiable" in caplog.text


def test_sampling_unsatisfiable_numeric_interval(tiny_codec, tiny_x, tiny_pool, rng, caplog):
    rule = Rule(conditions=(cond(tiny_codec, "ev_amount", ">", 9.0, 1.0),),
                outcome="bad", support=1)
    with caplog.at_level("WARNING"):
        drawn = sample_counterfactual_instances(rule, tiny_x, tiny_pool, 5, rng, tiny_codec)
    assert drawn == []


def test_sampled_instances_verify_against_rule(tiny_codec, tiny_x, tiny_pool, rng):
    rule = Rule(conditions=(cond(tiny_codec, "ev_amount", "<=", 3.0, 0.25),
                            cond(tiny_codec, "case_tier=silver", "==", "silver", 0.5)),
                outcome="bad", support=1)
    drawn = sample_counterfactual_instances(rule, tiny_x, tiny_pool, 25, rng, tiny_codec)
    for inst in drawn:
        row = tiny_codec.flatten_one(inst)
        assert all(c.satisfied_by(row) for c in rule.conditions)


def test_sampled_instances_reach_counterfactual_leaf(tiny_codec, tiny_log, tiny_x, tiny_pool, rng):
    # consistency with the surrogate by construct: sampled instances route
    # into the counterfactual rule's leaf
    from procf.blackbox import RuleOracle
    from procf.neighborhood import GaConfig, generate_neighborhood

    oracle = RuleOracle(rules=[([("ev_amount", ">", 0.5)], "ok")], default_label="bad")
    cfg = GaConfig(population=40, generations=3, similarity_threshold=2, seed=2)
    nb = generate_neighborhood(tiny_x, tiny_pool, oracle, cfg, tiny_codec)
    matrix = tiny_codec.flatten(nb.instances)
    tree = fit_tree(matrix, list(nb.labels), TreeConfig(max_depth=4, min_samples_leaf=2))
    x_row = tiny_codec.flatten_one(tiny_x)
    rules = extract_counterfactuals(tree, x_row, max_rules=1)
    if not rules:
        pytest.skip("single-class surrogate on this draw")
    drawn = sample_counterfactual_instances(rules[0], tiny_x, tiny_pool, 10, rng, tiny_codec)
    predictions = tree_predict(tree, tiny_codec.flatten(drawn))
    assert predictions == [rules[0].outcome] * len(drawn)


# --- aggregation -----------------------------------------------------------------

def fake_explanation(k, imp):
    dummy = Rule(conditions=(), outcome="x", support=0)
    return Explanation(case_id="c", prefix_length=k, predicted_label="x",
                       factual=dummy, counterfactuals=(), fidelity=None,
                       importance=imp)


def test_top_attributes_argmax_set():
    assert top_attributes({"u": 0.7, "v": 0.3}) == ("u",)
    assert top_attributes({"u": 0.5, "v": 0.5}) == ("u", "v")
    assert top_attributes({"u": 0.0}) == ()


def test_aggregate_single_concentrated():
    ranking = aggregate_importance([fake_explanation(5, {"u": 1.0})], top_k=3)
    assert ranking[5][0] == ("u", 1.0)


def test_aggregate_two_explanations_split():
    explanations = [fake_explanation(5, {"u": 0.8, "v": 0.2}),
                    fake_explanation(5, {"u": 0.1, "v": 0.9})]
    ranking = dict(aggregate_importance(explanations, top_k=5)[5])
    assert ranking["u"] == 0.5
    assert ranking["v"] == 0.5


def test_aggregate_truncates_to_top_k():
    imps = [{f"a{i}": 1.0 if i == j else 0.0 for i in range(7)} for j in range(7)]
    explanations = [fake_explanation(4, imp) for imp in imps]
    ranking = aggregate_importance(explanations, top_k=5)[4]
    assert len(ranking) == 5
    freqs = [f for _, f in ranking]
    assert freqs == sorted(freqs, reverse=True)


def test_aggregate_groups_by_prefix_length():
    explanations = [fake_explanation(3, {"u": 1.0}), fake_explanation(7, {"v": 1.0})]
    ranking = aggregate_importance(explanations, top_k=2)
    assert ranking[3][0] == ("u", 1.0)
    assert ranking[7][0] == ("v", 1.0)
