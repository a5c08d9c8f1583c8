import csv

import numpy as np

from commdyn.cli import main
from commdyn.dynamics import read_equilibria_csv
from commdyn.graphgen import read_edge_list


SBM_FLAGS = ["--n1", "10", "--n2", "10", "--l11", "0.6", "--l12", "0.2", "--l22", "0.6"]


def _read_labels(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["agent", "label"]
    return np.array([int(r[1]) for r in rows[1:]])


def test_sample_graph_round_trip(tmp_path, capsys):
    out = tmp_path / "graph.txt"
    assert main(["sample-graph", *SBM_FLAGS, "--seed", "4", "--out", str(out)]) == 0
    graph = read_edge_list(out)
    assert graph.n == 20 and graph.n1 == 10
    assert "wrote" in capsys.readouterr().out


def test_simulate_and_detect_single(tmp_path, capsys):
    eq_csv = tmp_path / "eq.csv"
    code = main(["simulate", *SBM_FLAGS, "--graph-seed", "4", "--u-offset", "0.05",
                 "--ic-seed", "3", "--out", str(eq_csv)])
    assert code == 0
    eqs = read_equilibria_csv(eq_csv)
    assert len(eqs) == 1 and eqs[0].converged

    est_csv = tmp_path / "est.csv"
    code = main(["detect-single", "--states", str(eq_csv), "--n1", "10",
                 "--out", str(est_csv)])
    assert code == 0
    labels = _read_labels(est_csv)
    assert labels.size == 20 and set(labels) <= {1, 2}
    assert "accuracy=" in capsys.readouterr().out


def test_simulate_pairs_and_detect_multi(tmp_path, capsys):
    x_csv = tmp_path / "x.csv"
    b_csv = tmp_path / "b.csv"
    code = main(["simulate", *SBM_FLAGS, "--graph-seed", "4", "--u-offset", "0.05",
                 "--pairs", "20", "--pair-seed", "8",
                 "--out", str(x_csv), "--inputs-out", str(b_csv)])
    assert code == 0
    stdout = capsys.readouterr().out
    model_line = next(line for line in stdout.splitlines() if line.startswith("model:"))
    fields = dict(tok.split("=") for tok in model_line.split()[1:])

    est_csv = tmp_path / "est.csv"
    code = main(["detect-multi", "--states", str(x_csv), "--inputs", str(b_csv),
                 "--u", fields["u"], "--gamma", fields["gamma"],
                 "--n1", "10", "--out", str(est_csv)])
    assert code == 0
    assert _read_labels(est_csv).size == 20


def test_simulate_offset_without_sbm_is_an_error(tmp_path, capsys):
    graph_file = tmp_path / "graph.txt"
    main(["sample-graph", *SBM_FLAGS, "--seed", "4", "--out", str(graph_file)])
    capsys.readouterr()
    code = main(["simulate", "--graph", str(graph_file), "--u-offset", "0.05",
                 "--out", str(tmp_path / "eq.csv")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_experiment_and_summarize(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        "preset = ssbm-positive\n"
        "n_values = 20\n"
        "ls = 0.6\n"
        "ld = 0.2\n"
        "u_offsets = 0.05\n"
        "trials = 2\n"
        "base_seed = 99\n")
    records_csv = tmp_path / "records.csv"
    code = main(["experiment", "--config", str(cfg), "--workers", "1",
                 "--out", str(records_csv)])
    assert code == 0
    assert "wrote 2 records" in capsys.readouterr().out

    summary_csv = tmp_path / "summary.csv"
    assert main(["summarize", "--records", str(records_csv),
                 "--out", str(summary_csv)]) == 0
    with open(summary_csv, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "preset"
    assert len(rows) == 2


def test_experiment_preset_flag_overrides(tmp_path, capsys):
    records_csv = tmp_path / "records.csv"
    code = main(["experiment", "--preset", "ssbm-positive", "--trials", "1",
                 "--workers", "1", "--out", str(records_csv)])
    assert code == 0
    out = capsys.readouterr().out
    assert "wrote 4 records" in out  # 4 default offsets x 1 trial
