import os
import re
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from marllab.algorithms import MetricsRow, Trainer
from marllab.harness import (
    CheckpointError,
    ConfigError,
    MetricsWriter,
    emit_plot,
    load_checkpoint,
    parse_config,
    read_metrics,
    save_checkpoint,
)
from marllab.harness.cli import main
from marllab.harness.metrics import HEADER


# -- config -------------------------------------------------------------------

def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_empty_config_resolves_published_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, ""))
    assert cfg.env == "simple_world"
    assert cfg.alpha == 0.02                  # per-environment temperature
    assert cfg.gamma == 0.95
    assert cfg.batch_size == 256
    assert cfg.buffer_size == 500000
    assert cfg.policy_lr == 1e-4
    assert cfg.critic_lr == 1e-3
    assert cfg.target_period == 200
    assert cfg.attention_heads == 4
    assert cfg.m == 1
    assert cfg.jitter == 1e-6
    assert cfg.eval_episodes == 10
    assert cfg.episode_length == 1
    assert cfg.hidden == 10                   # observation-free task scale
    assert cfg.algo == "iac"


def test_env_default_temperatures_and_lengths(tmp_path):
    cfg = parse_config(write(tmp_path, "env = multi_pendulum\n"))
    assert cfg.alpha == 0.01 and cfg.episode_length == 200 and cfg.hidden == 64
    cfg = parse_config(write(tmp_path, "env = predator_prey\n"))
    assert cfg.alpha == 0.01 and cfg.episode_length == 100
    cfg = parse_config(write(tmp_path, "env = po_predator_prey\n"))
    assert cfg.episode_length == 100


def test_config_override_and_comments(tmp_path):
    cfg = parse_config(write(tmp_path,
                             "# comment\nenv = simple_world\ngamma = 0.9 # inline\n"))
    assert cfg.gamma == 0.9


def test_config_conflict_error(tmp_path):
    with pytest.raises(ConfigError, match="implies critic"):
        parse_config(write(tmp_path, "algo = iac\ncritic = mix\n"))


def test_config_kind_pair_resolution(tmp_path):
    cfg = parse_config(write(
        tmp_path, "policy = deterministic\ncritic = mix\n"))
    assert cfg.algo == "ddpg_mix"
    with pytest.raises(ConfigError, match="together"):
        parse_config(write(tmp_path, "policy = deterministic\n"))


def test_config_unknown_key_with_line_number(tmp_path):
    with pytest.raises(ConfigError, match="line 2: unknown key"):
        parse_config(write(tmp_path, "env = simple_world\nbogus = 1\n"))


def test_config_type_error_with_line_number(tmp_path):
    with pytest.raises(ConfigError, match="line 1: gamma expects a number"):
        parse_config(write(tmp_path, "gamma = fast\n"))


def test_config_duplicate_key(tmp_path):
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(write(tmp_path, "gamma = 0.9\ngamma = 0.8\n"))


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "absent.cfg")


def test_config_tabular_env_rules(tmp_path):
    cfg = parse_config(write(tmp_path, "env = matrix_game\n"))
    assert cfg.algo == "tabular_qmix"
    with pytest.raises(ConfigError, match="continuous"):
        parse_config(write(tmp_path, "env = matrix_game\nalgo = iac\n"))
    with pytest.raises(ConfigError, match="matrix game only"):
        parse_config(write(tmp_path, "env = simple_world\nalgo = tabular_qmix\n"))


def test_config_partial_rewards_parse(tmp_path):
    cfg = parse_config(write(
        tmp_path, "env = multi_pendulum\nreward_mode = shaped\n"
                  "partial_rewards = 1:0.1,3:0.2\n"))
    assert cfg.partial_rewards == {1: 0.1, 3: 0.2}
    env = cfg.make_env()
    assert env.reward_mode == "shaped"


# -- checkpoints --------------------------------------------------------------

def test_checkpoint_round_trip_byte_identical(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {"a/w": rng.normal(size=(3, 4)).astype(np.float32),
              "b": rng.normal(size=(7,)).astype(np.float32),
              "c/deep/t": rng.normal(size=(2, 2, 2)).astype(np.float32)}
    p1, p2 = tmp_path / "x.ckpt", tmp_path / "y.ckpt"
    save_checkpoint(arrays, p1)
    loaded = load_checkpoint(p1)
    assert set(loaded) == set(arrays)
    for k in arrays:
        assert np.array_equal(loaded[k], arrays[k])
        assert loaded[k].dtype == np.float32
    save_checkpoint(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_truncation_names_final_array(tmp_path):
    arrays = {"alpha": np.zeros(3, dtype=np.float32),
              "omega": np.ones(4, dtype=np.float32)}
    p = tmp_path / "t.ckpt"
    save_checkpoint(arrays, p)
    blob = p.read_bytes()
    p.write_bytes(blob[:-4])
    with pytest.raises(CheckpointError, match="omega"):
        load_checkpoint(p)


def test_checkpoint_rejects_unknown_tag(tmp_path):
    p = tmp_path / "bad.ckpt"
    p.write_bytes(b"NOTACKPT!" + b"\x00" * 32)
    with pytest.raises(CheckpointError, match="format tag"):
        load_checkpoint(p)


def test_checkpoint_zero_arrays_and_dims(tmp_path):
    arrays = {"z": np.zeros((2, 5), dtype=np.float32)}
    p = tmp_path / "z.ckpt"
    save_checkpoint(arrays, p)
    out = load_checkpoint(p)
    assert out["z"].shape == (2, 5)
    assert np.all(out["z"] == 0.0)


def test_checkpoint_preserves_eval_return_exactly(tmp_path):
    from marllab.algorithms import AlgoSpec
    from marllab.environments import make_env
    spec = AlgoSpec.named("iac", hidden=10, warmup_steps=16, batch_size=8,
                          alpha=0.02)
    tr = Trainer(make_env("simple_world"), spec, 1, 80)
    tr.train(80, eval_interval=40, eval_episodes=2)
    before = tr.evaluate(episodes=5, eval_index=123)
    p = tmp_path / "m.ckpt"
    save_checkpoint(tr.snapshot(), p)
    tr2 = Trainer(make_env("simple_world"), spec, 1, 80)
    tr2.load_snapshot(load_checkpoint(p))
    after = tr2.evaluate(episodes=5, eval_index=123)
    assert before == after


# -- metrics + plots ----------------------------------------------------------

def test_metrics_header_and_round_trip(tmp_path):
    p = tmp_path / "metrics.csv"
    with MetricsWriter(p) as w:
        w.write(MetricsRow(0, 0, 1.5, 0.25, -0.5, 0.125, 2.75, 12))
        w.write(MetricsRow(100, 3, 2.5, 0.5, -0.25, 0.1, 2.5, 99))
    text = p.read_text().splitlines()
    assert text[0] == HEADER
    rows = read_metrics(p)
    assert rows[0]["eval_return_mean"] == 1.5
    assert rows[1]["step"] == 100


def test_metrics_empty_rejected(tmp_path):
    p = tmp_path / "metrics.csv"
    p.write_text(HEADER + "\n")
    with pytest.raises(ValueError, match="no rows"):
        read_metrics(p)
    with pytest.raises(ValueError, match="no rows"):
        emit_plot([p], tmp_path / "c.svg")


def test_plot_single_row_marker(tmp_path):
    p = tmp_path / "metrics.csv"
    with MetricsWriter(p) as w:
        w.write(MetricsRow(0, 0, 1.0, 0.1, 0.0, 0.0, 0.0, 1))
    out = tmp_path / "c.svg"
    emit_plot([p], out)
    svg = out.read_text()
    assert svg.startswith("<svg")
    assert "<circle" in svg


def test_plot_monotone_polyline(tmp_path):
    p = tmp_path / "metrics.csv"
    with MetricsWriter(p) as w:
        for k in range(5):
            w.write(MetricsRow(k * 10, k, float(k), 0.0, 0.0, 0.0, 0.0, k))
    out = tmp_path / "c.svg"
    emit_plot([p], out)
    svg = out.read_text()
    polys = re.findall(r'<polyline points="([^"]+)"', svg)
    assert polys
    ys = [float(pair.split(",")[1]) for pair in polys[0].split()]
    # increasing returns plot upward: decreasing pixel y
    assert all(b < a for a, b in zip(ys, ys[1:]))


def test_plot_multi_seed_overlay(tmp_path):
    paths = []
    for seed in range(5):
        p = tmp_path / f"m{seed}.csv"
        with MetricsWriter(p) as w:
            for k in range(4):
                w.write(MetricsRow(k * 10, k, float(k + seed), 0.0, 0.0,
                                   0.0, 0.0, 0))
        paths.append(p)
    out = tmp_path / "overlay.svg"
    emit_plot(paths, out)
    svg = out.read_text()
    polys = re.findall(r"<polyline", svg)
    assert len(polys) == 6  # five runs + dashed cross-run mean
    assert "<polygon" in svg  # the mean band
    # hand-computed cross-run mean band midline at the first step
    rowsets = [read_metrics(p) for p in paths]
    first = [rs[0]["eval_return_mean"] for rs in rowsets]
    assert np.mean(first) == pytest.approx(2.0)


def test_plot_mismatched_grids_rejected(tmp_path):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    for p, steps in ((p1, (0, 10)), (p2, (0, 20))):
        with MetricsWriter(p) as w:
            for s in steps:
                w.write(MetricsRow(s, 0, 1.0, 0.0, 0.0, 0.0, 0.0, 0))
    with pytest.raises(ValueError, match="grids"):
        emit_plot([p1, p2], tmp_path / "c.svg")


# -- CLI ----------------------------------------------------------------------

def _strip_wall_ms(csv_text: str) -> str:
    return "\n".join(",".join(line.split(",")[:-1])
                     for line in csv_text.splitlines())


def test_cli_train_matrix_game_and_eval(tmp_path, capsys):
    cfg = tmp_path / "mg.cfg"
    cfg.write_text("env = matrix_game\niterations = 2000\n")
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    for artifact in ("metrics.csv", "final.ckpt", "config.resolved.cfg",
                     "curve.svg"):
        assert (out / artifact).exists()
    assert main(["eval", "--ckpt", str(out / "final.ckpt"),
                 "--config", str(cfg)]) == 0
    captured = capsys.readouterr()
    assert "greedy joint action" in captured.out


def test_cli_train_determinism_modulo_wall_ms(tmp_path):
    cfg = tmp_path / "sw.cfg"
    cfg.write_text("env = simple_world\ntotal_steps = 120\n"
                   "eval_interval = 60\nwarmup_steps = 30\nbatch_size = 16\n"
                   "eval_episodes = 3\nseed = 2\n")
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["train", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["train", "--config", str(cfg), "--out", str(out2)]) == 0
    m1 = _strip_wall_ms((out1 / "metrics.csv").read_text())
    m2 = _strip_wall_ms((out2 / "metrics.csv").read_text())
    assert m1 == m2
    assert (out1 / "final.ckpt").read_bytes() == (out2 / "final.ckpt").read_bytes()


def test_cli_eval_matches_training_evaluation(tmp_path, capsys):
    cfg = tmp_path / "sw.cfg"
    cfg.write_text("env = simple_world\ntotal_steps = 100\n"
                   "eval_interval = 50\nwarmup_steps = 30\nbatch_size = 16\n"
                   "eval_episodes = 4\nseed = 3\n")
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["eval", "--ckpt", str(out / "final.ckpt"),
                 "--config", str(cfg)]) == 0
    printed = capsys.readouterr().out
    assert "eval return" in printed


def test_cli_plot_subcommand(tmp_path):
    p = tmp_path / "m.csv"
    with MetricsWriter(p) as w:
        for k in range(3):
            w.write(MetricsRow(k, k, float(k), 0.0, 0.0, 0.0, 0.0, 0))
    out = tmp_path / "c.svg"
    assert main(["plot", "--in", str(p), "--out", str(out)]) == 0
    assert out.exists()


def test_cli_matrixlab_subcommand(tmp_path, capsys):
    assert main(["matrixlab", "--alpha", "3", "--seeds", "2",
                 "--out", str(tmp_path / "ml")]) == 0
    printed = capsys.readouterr().out
    assert "payoff table" in printed
    assert "soft policy iteration" in printed
    for csv_name in ("payoff.csv", "decomposition_fit.csv",
                     "decomposition_policy.csv", "joint_conditioned_fit.csv",
                     "joint_conditioned_policy.csv"):
        assert (tmp_path / "ml" / csv_name).exists()


def test_cli_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("algo = iac\ncritic = mix\n")
    assert main(["train", "--config", str(bad)]) == 2


def test_cli_seed_fanout_child_processes(tmp_path):
    cfg = tmp_path / "mg.cfg"
    cfg.write_text("env = matrix_game\niterations = 400\n")
    out = tmp_path / "fan"
    code = subprocess.run(
        [sys.executable, "-m", "marllab.harness.cli", "train", "--config",
         str(cfg), "--seeds", "0..1", "--out", str(out)],
        timeout=300).returncode
    assert code == 0
    assert (out / "seed0" / "final.ckpt").exists()
    assert (out / "seed1" / "final.ckpt").exists()


def test_strict_nan_env_var_controls_checks():
    code = subprocess.run(
        [sys.executable, "-c",
         "import numpy as np, marllab.diffmath as dm\n"
         "import sys\n"
         "try:\n"
         "    dm.log_(dm.const(np.array([-1.0])))\n"
         "    sys.exit(1)\n"
         "except dm.NumericError:\n"
         "    sys.exit(0)\n"],
        env={**os.environ, "MARL_STRICT_NAN": "1"}, timeout=120).returncode
    assert code == 0
