import subprocess
import sys
from pathlib import Path

import yaml

from digrad.harness.cli import OUTPUT_ROOT_ENV, main
from digrad.harness.train import checkpoint_name


def write_config(tmp_path, **overrides):
    cfg = {"env": "mini-4link", "episodes": 2, "max_steps": 6, "hidden": [8, 8], "batch_size": 4,
           "eval_every": 2, "eval_episodes": 2, "seeds": [0], "output_dir": str(tmp_path / "ignored")}
    cfg.update(overrides)
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def test_train_eval_plots_round(tmp_path, monkeypatch, capsys):
    root = tmp_path / "out"
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(root))
    cfg = write_config(tmp_path)
    assert main(["train", str(cfg), "--seeds", "0,1"]) == 0
    assert (root / "digrad-single-heuristic" / "seed1" / "runlog.csv").exists()
    assert not (tmp_path / "ignored").exists()

    ckpt = root / "digrad-single-heuristic" / "seed0" / "checkpoints" / checkpoint_name(
        "digrad-single-heuristic", 0, 2)
    capsys.readouterr()
    assert main(["eval", str(ckpt), "mini-4link", "--episodes", "3", "--max-steps", "5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "task,mean_error,median_error,mean_score" and out[-1].startswith("success_rate,")

    assert main(["plots", str(root)]) == 0
    panel = root / "matrix" / "plots" / "score_1.csv"
    assert panel.read_text().splitlines()[0] == "episode,digrad-single-heuristic_mean,digrad-single-heuristic_std"


def test_matrix_verb(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "m"))
    cfg = write_config(tmp_path)
    assert main(["matrix", str(cfg), "--settings", "digrad-multi,ddpg", "--seeds", "3"]) == 0
    header = (tmp_path / "m" / "matrix" / "plots" / "avg_reward.csv").read_text().splitlines()[0]
    assert header.split(",") == ["episode", "digrad-multi_mean", "digrad-multi_std", "ddpg_mean", "ddpg_std"]


def test_bad_config_exits_nonzero_naming_key(tmp_path, capsys):
    cfg = write_config(tmp_path, batchsize=3)
    assert main(["train", str(cfg)]) == 2
    assert "batchsize" in capsys.readouterr().err


def test_missing_checkpoint_exits_nonzero(tmp_path, capsys):
    assert main(["eval", str(tmp_path / "none.ckpt"), "mini-4link"]) == 1
    assert "none.ckpt" in capsys.readouterr().err
    assert main(["plots", str(tmp_path / "nowhere")]) == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "digrad.harness.cli", "train", str(tmp_path / "x.yaml")],
                          capture_output=True, text=True)
    assert proc.returncode != 0 and "x.yaml" in proc.stderr
