"""Python bindings for the pcnas search engine."""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    Error,
    EvaluationError,
    ParseError,
    StructuralError,
    cardinality,
    compute_costs,
    hypervolume,
    non_dominated_sort,
    normalize_genome,
    supernet_genome,
    surrogate_batch_accuracies,
    surrogate_error,
)

__all__ = [
    "ConfigError",
    "Error",
    "EvaluationError",
    "ParseError",
    "StructuralError",
    "cardinality",
    "compute_costs",
    "evaluate",
    "genome_dict",
    "hypervolume",
    "non_dominated_sort",
    "normalize_genome",
    "reference_supernet",
    "run_search",
    "supernet_genome",
    "surrogate_batch_accuracies",
    "surrogate_error",
]


def genome_dict(genome):
    """Object form of a genome given as a canonical string."""
    return _json.loads(_core.genome_json(genome))


def reference_supernet():
    return _json.loads(_core.reference_supernet_json())


def evaluate(genome, run_seed=0, policy=None):
    text = _json.dumps(policy) if policy is not None else ""
    return _json.loads(_core.evaluate(genome, run_seed, text))


def run_search(config, supernet=None):
    """Runs a single-stage search; `config` uses the CLI configuration schema."""
    text = _json.dumps(supernet) if supernet is not None else ""
    return _json.loads(_core.run_search(_json.dumps(config), text))
