import json
import os
import subprocess

import pytest

import pcnas

RLA = pcnas.supernet_genome()


def test_cardinalities():
    assert pcnas.cardinality("sampling") == 4**16
    assert pcnas.cardinality("architectural") == 4**13
    assert pcnas.cardinality("full") == 4**29


def test_genome_forms():
    g = pcnas.genome_dict(RLA)
    assert g["filter_ratios"] == [1.0] * 13
    assert pcnas.normalize_genome(RLA) == RLA
    with pytest.raises(pcnas.ParseError):
        pcnas.normalize_genome("F:1.0")


def test_supernet_costs():
    params, flops = pcnas.compute_costs(RLA)
    assert params == 4977253
    assert flops == 16712990720
    custom = json.dumps(pcnas.reference_supernet())
    assert pcnas.compute_costs(RLA, custom) == (params, flops)


def test_surrogate_and_evaluate():
    assert pcnas.surrogate_error(RLA) == pytest.approx(0.3722)
    acc = pcnas.surrogate_batch_accuracies(RLA, 0, 0, 100)
    assert len(acc) == 100
    out = pcnas.evaluate(RLA)
    assert out["batches_used"] == 100
    assert not out["early_stopped"]
    stopped = pcnas.evaluate(RLA, policy={"accuracy_threshold": 0.9, "total_batches": 40})
    assert stopped["early_stopped"]
    assert stopped["batches_used"] == 10


def test_sort_and_hypervolume():
    fronts = pcnas.non_dominated_sort([[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    assert fronts == [[0, 1], [2]]
    assert pcnas.hypervolume([[0.5, 0.5]], [1.0, 1.0]) == pytest.approx(0.25)


def test_run_search_is_deterministic():
    cfg = {"population_size": 6, "max_generations": 4, "run_seed": 11}
    a = pcnas.run_search(cfg)
    b = pcnas.run_search(cfg)
    assert a == b
    assert a["final_front"]
    with pytest.raises(pcnas.ConfigError):
        pcnas.run_search({"population_size": 1})


@pytest.mark.skipif("PCNAS_BIN" not in os.environ, reason="CLI binary not provided")
def test_cli_cost():
    out = subprocess.run(
        [os.environ["PCNAS_BIN"], "cost", "--genome", RLA],
        check=True, capture_output=True, text=True,
    )
    assert json.loads(out.stdout)["params"] == 4977253
