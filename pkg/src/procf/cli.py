"""Command-line front end.

Subcommands: ``explain`` one case prefix, ``evaluate`` surrogate fidelity
over held-out prefixes, ``importance`` aggregate attribute rankings.
Artifacts are JSON/CSV files that embed the full run configuration and
seed; all randomness flows from the single ``--seed`` through named
substreams, so a seed reproduces a run byte for byte.

Exit codes: 0 success, 1 predictor or pipeline failure, 2 user-input error.
Env: PROCF_LOG_LEVEL sets logging, PROCF_NO_NUMBA forces the numpy kernels.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass

from procf.blackbox import ExternalPredictor, RuleOracle
from procf.encoding import FeatureCodec, FeatureMatrix, encode
from procf.errors import LogFormatError, PredictorError, ProcfError, SchemaError
from procf.event_log import LogSchema, parse_log, take_prefix
from procf.explanation import (
    Explanation,
    aggregate_importance,
    extract_counterfactuals,
    extract_factual,
    sample_counterfactual_instances,
)
from procf.neighborhood import GaConfig, build_initial_pool, generate_neighborhood
from procf.seeding import subseed, substream
from procf.surrogate import (
    FidelityReport,
    TreeConfig,
    fidelity,
    fit_tree,
    importance,
    tree_to_json,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PIPELINE = 1
EXIT_USAGE = 2


class UserInputError(ProcfError):
    """Bad command-line input: unknown case, invalid length, missing file."""


@dataclass
class RunConfig:
    log_path: str
    schema_path: str
    oracle: str = None
    predictor_cmd: str = None
    population: int = 600
    generations: int = 15
    p_c: float = 0.2
    p_m: float = 0.7
    sim_threshold: int = 2
    max_depth: int = 8
    min_samples_leaf: int = 5
    max_rules: int = 3
    seed: int = 0
    out: str = "out"
    timeout: float = 30.0

    def to_json(self) -> dict:
        return {
            "log": self.log_path,
            "schema": self.schema_path,
            "oracle": self.oracle,
            "predictor_cmd": self.predictor_cmd,
            "population": self.population,
            "generations": self.generations,
            "p_c": self.p_c,
            "p_m": self.p_m,
            "sim_threshold": self.sim_threshold,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "max_rules": self.max_rules,
            "seed": self.seed,
            "out": self.out,
        }

    def ga_config(self, *stream_tags) -> GaConfig:
        return GaConfig(
            population=self.population,
            generations=self.generations,
            crossover_prob=self.p_c,
            mutation_prob=self.p_m,
            similarity_threshold=self.sim_threshold,
            seed=subseed(self.seed, "run", *stream_tags),
        )

    def tree_config(self) -> TreeConfig:
        return TreeConfig(max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf)


def _require_file(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise UserInputError(f"{what} not found: {path}")
    return path


def _load_inputs(cfg: RunConfig):
    schema = LogSchema.from_json(_require_file(cfg.schema_path, "schema file"))
    event_log = parse_log(_require_file(cfg.log_path, "log file"), schema)
    codec = FeatureCodec.from_log(event_log)
    return event_log, codec


def _make_predictor(cfg: RunConfig, codec: FeatureCodec):
    if cfg.oracle:
        return RuleOracle.from_json(_require_file(cfg.oracle, "oracle file"))
    return ExternalPredictor(cfg.predictor_cmd,
                             columns=[c.display for c in codec.columns],
                             timeout=cfg.timeout)


def _submatrix(matrix: FeatureMatrix, idx) -> FeatureMatrix:
    return FeatureMatrix(data=matrix.data[list(idx)], columns=matrix.columns)


def run_pipeline(event_log, codec, predictor, cfg: RunConfig, case_id: str, k: int) -> tuple:
    """Full explanation pipeline for one prefix; returns (Explanation, tree)."""
    try:
        trace = event_log.trace_by_case(case_id)
    except KeyError:
        raise UserInputError(f"case {case_id!r} not found in the log")
    if not 0 < k < len(trace):
        raise UserInputError(
            f"prefix length must satisfy 0 < k < {len(trace)} for case {case_id}, got {k}"
        )

    x = encode(take_prefix(trace, k), event_log.schema)
    ga_cfg = cfg.ga_config(case_id, k)
    pool = build_initial_pool(x, event_log, k, ga_cfg)
    nb = generate_neighborhood(x, pool, predictor, ga_cfg, codec)

    matrix = codec.flatten(nb.instances)
    train = _submatrix(matrix, nb.train_idx)
    train_labels = [nb.labels[i] for i in nb.train_idx]
    test = _submatrix(matrix, nb.test_idx)
    test_labels = [nb.labels[i] for i in nb.test_idx]

    tree = fit_tree(train, train_labels, cfg.tree_config())
    if test.n_rows:
        report = fidelity(tree, test_labels, test)
    else:
        report = FidelityReport(fidelity=float("nan"), test_size=0, per_class={})

    x_row = codec.flatten_one(x)
    predicted = predictor.predict_batch(codec.flatten([x]))[0]
    factual = extract_factual(tree, x_row)
    counterfactuals = extract_counterfactuals(tree, x_row, max_rules=cfg.max_rules)
    imp = importance(tree)

    # concrete instances for the top counterfactual rule; the surrogate
    # agrees with them by construction, the black box is measured only
    samples = ()
    sample_agreement = None
    if counterfactuals:
        drawn = sample_counterfactual_instances(
            counterfactuals[0], x, pool, n=3,
            rng=substream(cfg.seed, "cf-sample", case_id, k), codec=codec,
        )
        if drawn:
            b_labels = predictor.predict_batch(codec.flatten(drawn))
            samples = tuple(
                {
                    "sequence": list(inst.control_flow.sequence),
                    "attrs": {g.name: g.value for g in inst.attr_genes},
                    "blackbox_label": label,
                }
                for inst, label in zip(drawn, b_labels)
            )
            wanted = counterfactuals[0].outcome
            sample_agreement = sum(1 for l in b_labels if l == wanted) / len(b_labels)

    explanation = Explanation(
        case_id=case_id,
        prefix_length=k,
        predicted_label=predicted,
        factual=factual,
        counterfactuals=tuple(counterfactuals),
        fidelity=report,
        importance=imp,
        neighborhood_summary={
            "sizes": {label: len(nb.by_class[label]) for label in sorted(nb.by_class)},
            "reachable": sorted(nb.reachable),
            "train_size": len(nb.train_idx),
            "test_size": len(nb.test_idx),
        },
        config=cfg.to_json(),
        counterfactual_samples=samples,
        counterfactual_sample_agreement=sample_agreement,
    )
    return explanation, tree


def _write_json(path: str, doc) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True))
        fh.write("\n")


def _holdout_traces(event_log, seed: int):
    """Seeded 20% of traces reserved for evaluation, ordered by case id."""
    traces = sorted(event_log.traces, key=lambda t: t.case_id)
    rng = substream(seed, "holdout")
    perm = rng.permutation(len(traces))
    n_eval = max(1, math.floor(0.2 * len(traces)))
    chosen = sorted(int(i) for i in perm[:n_eval])
    return [traces[i] for i in chosen]


def _eval_prefixes(event_log, lengths, max_prefixes: int, seed: int):
    """Jobs ordered by (prefix length, case id), independent of flag order."""
    holdout = _holdout_traces(event_log, seed)
    jobs = []
    for k in sorted(set(lengths)):
        eligible = [t.case_id for t in holdout if len(t) > k]
        jobs.append((k, eligible[:max_prefixes] if max_prefixes else eligible))
    return jobs


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_explain(cfg: RunConfig, case_id: str, k: int) -> int:
    event_log, codec = _load_inputs(cfg)
    predictor = _make_predictor(cfg, codec)
    try:
        explanation, tree = run_pipeline(event_log, codec, predictor, cfg, case_id, k)
    finally:
        if hasattr(predictor, "close"):
            predictor.close()

    _write_json(os.path.join(cfg.out, "explanation.json"), explanation.to_json())
    tree_doc = tree_to_json(tree)
    tree_doc["config"] = cfg.to_json()
    _write_json(os.path.join(cfg.out, "tree.json"), tree_doc)

    print(f"case {case_id} prefix {k}: black box predicts {explanation.predicted_label}")
    print(f"factual: {explanation.factual.render()}")
    for i, rule in enumerate(explanation.counterfactuals, start=1):
        print(f"counterfactual #{i} ({rule.n_violations} change(s)): {rule.render()}")
    if not explanation.counterfactuals:
        print("counterfactual: none (single-class surrogate)")
    fid = explanation.fidelity
    print(f"fidelity: {fid.fidelity:.4f} on {fid.test_size} held-out neighbors")
    print(f"artifacts: {os.path.join(cfg.out, 'explanation.json')}, "
          f"{os.path.join(cfg.out, 'tree.json')}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, lengths, max_prefixes: int = 0) -> int:
    if not lengths:
        raise UserInputError("evaluate needs at least one prefix length")
    event_log, codec = _load_inputs(cfg)
    predictor = _make_predictor(cfg, codec)

    rows = []
    detail = []
    try:
        for k, case_ids in _eval_prefixes(event_log, lengths, max_prefixes, cfg.seed):
            fidelities = []
            for case_id in case_ids:
                explanation, _ = run_pipeline(event_log, codec, predictor, cfg, case_id, k)
                fidelities.append(explanation.fidelity.fidelity)
                detail.append({
                    "case_id": case_id,
                    "prefix_length": k,
                    "fidelity": explanation.fidelity.fidelity,
                })
            mean = sum(fidelities) / len(fidelities) if fidelities else None
            rows.append((k, len(fidelities), mean))
    finally:
        if hasattr(predictor, "close"):
            predictor.close()

    total = sum(n for _, n, _ in rows)
    weighted = (
        sum(n * mean for _, n, mean in rows if n) / total if total else None
    )

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["prefix_length", "n_prefixes", "mean_fidelity"])
    for k, n, mean in rows:
        writer.writerow([k, n, "" if mean is None else f"{mean:.6f}"])
    writer.writerow(["weighted_avg", total, "" if weighted is None else f"{weighted:.6f}"])

    os.makedirs(cfg.out, exist_ok=True)
    csv_path = os.path.join(cfg.out, "fidelity.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
    _write_json(os.path.join(cfg.out, "evaluate.json"), {
        "config": cfg.to_json(),
        "prefix_lengths": list(lengths),
        "per_prefix": detail,
        "weighted_fidelity": weighted,
    })
    print(buf.getvalue(), end="")
    return EXIT_OK


def cmd_importance(cfg: RunConfig, lengths, top_k: int = 5, max_prefixes: int = 0) -> int:
    if not lengths:
        raise UserInputError("importance needs at least one prefix length")
    event_log, codec = _load_inputs(cfg)
    predictor = _make_predictor(cfg, codec)

    explanations = []
    try:
        for k, case_ids in _eval_prefixes(event_log, lengths, max_prefixes, cfg.seed):
            for case_id in case_ids:
                explanation, _ = run_pipeline(event_log, codec, predictor, cfg, case_id, k)
                explanations.append(explanation)
    finally:
        if hasattr(predictor, "close"):
            predictor.close()

    if not explanations:
        raise UserInputError("no prefixes matched the requested lengths")
    ranking = aggregate_importance(explanations, top_k=top_k)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["prefix_length", "attribute", "frequency"])
    for k in sorted(ranking):
        for attr, freq in ranking[k]:
            writer.writerow([k, attr, f"{freq:.6f}"])

    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "importance.csv"), "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
    _write_json(os.path.join(cfg.out, "importance.json"), {
        "config": cfg.to_json(),
        "ranking": {str(k): [[a, f] for a, f in v] for k, v in ranking.items()},
    })
    print(buf.getvalue(), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--log", required=True, help="event log CSV")
    parser.add_argument("--schema", required=True, help="schema sidecar JSON")
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--oracle", help="built-in rule oracle JSON file")
    group.add_argument("--predictor-cmd", help="command line of a wire-protocol predictor")
    parser.add_argument("--population", type=int, default=600)
    parser.add_argument("--generations", type=int, default=15)
    parser.add_argument("--p-c", type=float, default=0.2, dest="p_c",
                        help="crossover probability")
    parser.add_argument("--p-m", type=float, default=0.7, dest="p_m",
                        help="per-gene mutation probability")
    parser.add_argument("--sim-threshold", type=int, default=2,
                        help="max edit distance for the initial pool")
    parser.add_argument("--max-depth", type=int, default=8)
    parser.add_argument("--min-samples-leaf", type=int, default=5)
    parser.add_argument("--max-rules", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out", help="artifact directory")
    parser.add_argument("--timeout", type=float, default=30.0,
                        help="external predictor timeout in seconds")


def _config_from(args) -> RunConfig:
    return RunConfig(
        log_path=args.log,
        schema_path=args.schema,
        oracle=args.oracle,
        predictor_cmd=args.predictor_cmd,
        population=args.population,
        generations=args.generations,
        p_c=args.p_c,
        p_m=args.p_m,
        sim_threshold=args.sim_threshold,
        max_depth=args.max_depth,
        min_samples_leaf=args.min_samples_leaf,
        max_rules=args.max_rules,
        seed=args.seed,
        out=args.out,
        timeout=args.timeout,
    )


def _parse_lengths(raw: str):
    try:
        lengths = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise UserInputError(f"bad prefix length list {raw!r}; expected e.g. 3,5")
    if any(k <= 0 for k in lengths):
        raise UserInputError("prefix lengths must be positive")
    return lengths


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="procf",
        description="Local factual/counterfactual rule explanations for process outcome predictors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_explain = sub.add_parser("explain", help="explain one case prefix")
    _common_flags(p_explain)
    p_explain.add_argument("--case", required=True, help="case id to explain")
    p_explain.add_argument("--prefix-len", required=True, type=int)

    p_eval = sub.add_parser("evaluate", help="fidelity table over held-out prefixes")
    _common_flags(p_eval)
    p_eval.add_argument("--prefix-len", required=True,
                        help="comma-separated prefix lengths, e.g. 3,5")
    p_eval.add_argument("--max-prefixes", type=int, default=0,
                        help="cap prefixes per length (0 = all)")

    p_imp = sub.add_parser("importance", help="aggregate attribute importance ranking")
    _common_flags(p_imp)
    p_imp.add_argument("--prefix-len", required=True,
                       help="comma-separated prefix lengths, e.g. 3,5")
    p_imp.add_argument("--top-k", type=int, default=5)
    p_imp.add_argument("--max-prefixes", type=int, default=0)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("PROCF_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")

    args = build_parser().parse_args(argv)
    cfg = _config_from(args)
    try:
        if args.command == "explain":
            return cmd_explain(cfg, args.case, args.prefix_len)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, _parse_lengths(args.prefix_len), args.max_prefixes)
        return cmd_importance(cfg, _parse_lengths(args.prefix_len),
                              top_k=args.top_k, max_prefixes=args.max_prefixes)
    except (UserInputError, LogFormatError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PredictorError as exc:
        print(f"predictor error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except ProcfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
