import csv
import io
import json

import pytest

from lpgnn_lab.cli import main
from lpgnn_lab.graph import load_dataset

SMALL = ["--max-epochs", "10", "--patience", "10", "--repeats", "2"]


def small_config(tmp_path, **kw):
    cfg = {"synthetic": {"num_nodes": 80, "num_classes": 2, "d": 8}, "repeats": 2,
           "max_epochs": 10, "patience": 10, **kw}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_gen_data(tmp_path):
    out = tmp_path / "syn"
    assert main(["gen-data", "--nodes", "60", "--classes", "3", "--d", "6", "--seed", "7", "--out", str(out)]) == 0
    ds = load_dataset(out)
    assert ds.num_nodes == 60 and ds.num_classes == 3 and ds.d == 6


def test_gen_data_needs_out(capsys):
    assert main(["gen-data"]) == 2
    assert "--out" in capsys.readouterr().err


def test_attack_poison_with_config(tmp_path, capsys):
    assert main(["attack", "poison", "--config", small_config(tmp_path), "--m", "2"]) == 0
    recs = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(recs) == 2
    assert all(r["success_rate"] == "1.0" for r in recs)


def test_baseline_on_dataset_dir_and_report(tmp_path, capsys):
    data = tmp_path / "syn"
    main(["gen-data", "--nodes", "80", "--classes", "2", "--d", "8", "--out", str(data)])
    runs = tmp_path / "runs.csv"
    json_out = tmp_path / "runs.json"
    assert main(["baseline", "--dataset", str(data), "--out", str(runs), "--json", str(json_out)] + SMALL) == 0
    assert len(json.loads(json_out.read_text())) == 2
    capsys.readouterr()
    assert main(["report", str(runs)]) == 0
    out = capsys.readouterr().out
    assert "test_accuracy" in out.splitlines()[1]


def test_sweep_command(tmp_path, capsys):
    cfg = small_config(tmp_path)
    assert main(["sweep", "--config", cfg, "--axis", "rate", "--values", "0.1,0.3", "--attack", "flip"]) == 0
    recs = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["attack_param"] for r in recs] == ["0.1", "0.1", "0.3", "0.3"]


@pytest.mark.parametrize("argv", [
    ["sweep", "--axis", "rate", "--values", "0.1"],
    ["sweep", "--axis", "eps_x", "--values", "a,b"],
    ["baseline", "--eps-x", "-1"],
    ["report", "/nonexistent.csv"],
    ["attack", "poison", "--config", "/nonexistent.json"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["attack", "teleport"])
    assert exc.value.code == 2


def test_runtime_failure_exits_3(tmp_path, capsys):
    bad = tmp_path / "broken"
    bad.mkdir()
    assert main(["baseline", "--dataset", str(bad)] + SMALL) == 3
    assert "failed" in capsys.readouterr().err
