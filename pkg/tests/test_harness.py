import csv
import io
import json
import math

import numpy as np
import pytest

from lpgnn_lab.graph import SyntheticConfig
from lpgnn_lab.harness import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    format_report,
    rows_to_csv,
    run_experiment,
    run_sweep,
    strip_wall_time,
    summarize,
)

SMALL = SyntheticConfig(num_nodes=120, num_classes=2, d=8, intra_edge_prob=0.1, inter_edge_prob=0.01)


def small(**kw):
    base = dict(synthetic=SMALL, repeats=2, max_epochs=20, patience=20)
    return ExperimentConfig(**{**base, **kw})


def parse(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.mark.parametrize("bad", [
    dict(eps_x=0.0), dict(eps_y=-1.0), dict(repeats=0), dict(attack="evil"),
    dict(attack="flip", attack_param=0.0), dict(attack="infer", attack_param=2.5), dict(m=-1),
    dict(arch="gat"), dict(k_x=-1),
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        small(**bad).validate()


def test_config_dict_round_trip():
    cfg = small(attack="flip", attack_param=0.2, defense=True)
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_dict({"epsx": 1})


@pytest.mark.parametrize("attack,param,present", [
    ("none", 0.0, {"test_accuracy"}),
    ("inject", 0.1, {"test_accuracy"}),
    ("flip", 0.1, {"test_accuracy"}),
    ("infer", 5, {"cosine", "mean_fd"}),
    ("poison", 0.1, {"success_rate", "num_inferences"}),
])
def test_rows_carry_only_relevant_metrics(attack, param, present):
    rows = run_experiment(small(attack=attack, attack_param=param, repeats=1))
    rec = parse(rows_to_csv(rows))[0]
    metric_cols = {"test_accuracy", "cosine", "mean_fd", "success_rate", "num_inferences"}
    assert {c for c in metric_cols if rec[c] != ""} == present


def test_csv_header_fixed():
    text = rows_to_csv(run_experiment(small(repeats=1)))
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)


def test_sweep_deterministic():
    cfg = small(attack="flip", attack_param=0.1)
    a = run_sweep(cfg, "eps_x", [1, 8])
    b = run_sweep(cfg, "eps_x", [1, 8])
    assert strip_wall_time(a) == strip_wall_time(b)
    recs = parse(a)
    assert [r["eps_x"] for r in recs] == ["1.0", "1.0", "8.0", "8.0"]
    assert [r["repeat"] for r in recs] == ["0", "1", "0", "1"]


def test_repeats_differ_and_seed_matters():
    recs = parse(rows_to_csv(run_experiment(small(attack="infer", attack_param=5))))
    assert recs[0]["cosine"] != recs[1]["cosine"]
    other = parse(rows_to_csv(run_experiment(small(attack="infer", attack_param=5, seed=1))))
    assert other[0]["cosine"] != recs[0]["cosine"]


def test_sweep_single_value_matches_run_experiment():
    cfg = small(k_x=1)
    assert strip_wall_time(run_sweep(cfg, "k_x", [1])) == strip_wall_time(rows_to_csv(run_experiment(cfg)))


def test_sweep_unknown_axis():
    with pytest.raises(ConfigError, match="axis"):
        run_sweep(small(), "hidden_dim", [4])


def test_poison_with_defense():
    cfg = small(synthetic=SyntheticConfig(num_nodes=120, num_classes=2, d=8, intra_edge_prob=0.1,
                                          inter_edge_prob=0.01, feature_signal=0.9),
                attack="poison", attack_param=0.2, defense=True)
    for row in run_experiment(cfg):
        assert row.num_poisoned == 24
        assert row.detected == row.num_poisoned
        assert row.metrics["num_exact"] == 0
        assert math.isnan(row.metrics["success_rate"])


def test_poison_without_defense_is_exact():
    for row in run_experiment(small(attack="poison", attack_param=0.2, eps_x=8.0, m=2)):
        assert row.detected == 0
        assert row.metrics["num_inferences"] > 0
        assert row.metrics["success_rate"] == 1.0


def test_summarize_recomputes_statistics():
    header = ",".join(CSV_COLUMNS)
    vals = [0.5, 0.7, 0.9]
    lines = [header] + [
        f"synthetic,gcn,8.0,4.0,0,4,4,flip,0.1,0,0,{i},{v},,,,,0.1" for i, v in enumerate(vals)
    ] + ["synthetic,gcn,8.0,4.0,0,4,4,none,0.0,0,0,0,0.8,,,,,0.1"]
    summary = summarize("\n".join(lines) + "\n")
    assert len(summary) == 2
    mean, std = summary[0]["test_accuracy"]
    assert mean == pytest.approx(np.mean(vals)) and std == pytest.approx(np.std(vals, ddof=1))
    assert summary[0]["n"] == 3 and "cosine" not in summary[0]
    assert summary[1]["test_accuracy"] == (0.8, 0.0)
    report = format_report(summary)
    assert "0.7000\t0.2000" in report


def test_summarize_rejects_foreign_csv():
    with pytest.raises(ConfigError):
        summarize("a,b\n1,2\n")
