"""procf: local rule explanations for process outcome predictors.

Pipeline: slice an event log into a trace prefix, grow a synthetic
neighborhood around it with a control-flow-constrained genetic algorithm,
fit a local decision-tree surrogate on the black-box labels, and read
factual and counterfactual rules off the tree.
"""

from procf.event_log import EventLog, LogSchema, parse_log, serialize_log, take_prefix
from procf.encoding import EncodedInstance, FeatureCodec, encode, distance
from procf.blackbox import RuleOracle, ExternalPredictor
from procf.neighborhood import GaConfig, build_initial_pool, generate_neighborhood, levenshtein
from procf.surrogate import TreeConfig, fit_tree, tree_predict, fidelity, importance
from procf.explanation import extract_factual, extract_counterfactuals, sample_counterfactual_instances

__version__ = "0.1.0"

__all__ = [
    "EventLog",
    "LogSchema",
    "parse_log",
    "serialize_log",
    "take_prefix",
    "EncodedInstance",
    "FeatureCodec",
    "encode",
    "distance",
    "RuleOracle",
    "ExternalPredictor",
    "GaConfig",
    "build_initial_pool",
    "generate_neighborhood",
    "levenshtein",
    "TreeConfig",
    "fit_tree",
    "tree_predict",
    "fidelity",
    "importance",
    "extract_factual",
    "extract_counterfactuals",
    "sample_counterfactual_instances",
]
