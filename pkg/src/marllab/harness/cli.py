"""Command-line entry point.

Subcommands:
  train      run one training job from a config file (``--seeds A..B``
             fans out one child process per seed)
  eval       evaluate a checkpoint with zero-noise episodes
  matrixlab  tabular matrix-game study: fits, Boltzmann policies, CSVs
  plot       reward-curve SVG from one or more metrics.csv files
"""

from __future__ import annotations

import argparse
import subprocess
import sys
from pathlib import Path

import numpy as np

from .. import matrixlab
from ..algorithms import MetricsRow, Trainer, TrainerAbort
from ..environments import MATRIX_PAYOFF
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, parse_config
from .metrics import MetricsWriter
from .plot import emit_plot


def _write_table_csv(path: Path, values: np.ndarray, fmt: str = "%.6g") -> None:
    names = matrixlab.ACTION_NAMES
    lines = ["u1," + ",".join(names)]
    for i, row in enumerate(np.asarray(values)):
        lines.append(names[i] + "," + ",".join(fmt % v for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _train_tabular(cfg: RunConfig, out: Path) -> int:
    """Matrix-game route: fit the tabular model, emit the same artifacts."""
    import time

    t0 = time.monotonic()
    trainer = (matrixlab.train_tabular_qmix if cfg.algo == "tabular_qmix"
               else matrixlab.train_qmixs)
    with MetricsWriter(out / "metrics.csv") as writer:
        def emit(iteration: int, loss: float, q_tot: np.ndarray) -> None:
            greedy = np.unravel_index(np.argmax(q_tot), (3, 3))
            policy = matrixlab.boltzmann(q_tot, cfg.alpha)
            writer.write(MetricsRow(
                iteration, iteration, float(MATRIX_PAYOFF[greedy]), 0.0,
                0.0, loss, matrixlab.joint_entropy(policy),
                int((time.monotonic() - t0) * 1000)))

        emit(0, float("inf"), np.zeros((3, 3)))
        fit = trainer(iterations=cfg.iterations, seed=cfg.seed, on_eval=emit,
                      eval_every=max(1, min(cfg.eval_interval, cfg.iterations)))
        emit(cfg.iterations, fit.loss, fit.q_tot)
    arrays = {"q_tot": fit.q_tot.astype(np.float32)}
    if isinstance(fit, matrixlab.TabularQ):
        arrays["q1"] = fit.q1.astype(np.float32)
        arrays["q2"] = fit.q2.astype(np.float32)
    else:
        arrays["t1"] = fit.tables[0].astype(np.float32)
        arrays["t2"] = fit.tables[1].astype(np.float32)
    save_checkpoint(arrays, out / "final.ckpt")
    emit_plot([out / "metrics.csv"], out / "curve.svg")
    print(matrixlab.format_table(fit.q_tot, f"fitted joint values ({cfg.algo})"))
    return 0


def _train_one(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.cfg").write_text(cfg.to_text(), encoding="utf-8")
    if cfg.env == "matrix_game":
        return _train_tabular(cfg, out)
    env = cfg.make_env()
    trainer = Trainer(env, cfg.algo_spec(), cfg.seed,
                      expected_steps=cfg.total_steps)
    try:
        with MetricsWriter(out / "metrics.csv") as writer:
            trainer.train(cfg.total_steps, cfg.eval_interval,
                          cfg.eval_episodes, on_metrics=writer.write)
    except TrainerAbort as exc:
        save_checkpoint(exc.snapshot, out / "abort.ckpt")
        print(f"error: {exc} (diagnostic snapshot in {out / 'abort.ckpt'})",
              file=sys.stderr)
        return 3
    save_checkpoint(trainer.snapshot(), out / "final.ckpt")
    emit_plot([out / "metrics.csv"], out / "curve.svg")
    return 0


def _parse_seed_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in text.split(",")]


def cmd_train(args: argparse.Namespace) -> int:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.seeds:
        seeds = _parse_seed_range(args.seeds)
        base = Path(args.out) if args.out else None
        procs = []
        for seed in seeds:
            argv = [sys.executable, "-m", "marllab.harness.cli", "train",
                    "--config", args.config, "--seed", str(seed)]
            if base is not None:
                argv += ["--out", str(base / f"seed{seed}")]
            procs.append((seed, subprocess.Popen(argv)))
        status = 0
        for seed, proc in procs:
            code = proc.wait()
            if code != 0:
                print(f"seed {seed} exited with status {code}", file=sys.stderr)
                status = max(status, code)
        return status
    cfg = parse_config(args.config, overrides)
    return _train_one(cfg)


def cmd_eval(args: argparse.Namespace) -> int:
    overrides = {"seed": args.seed} if args.seed is not None else {}
    cfg = parse_config(args.config, overrides)
    arrays = load_checkpoint(args.ckpt)
    if cfg.env == "matrix_game":
        q_tot = arrays["q_tot"].astype(np.float64)
        greedy = np.unravel_index(np.argmax(q_tot), (3, 3))
        names = matrixlab.ACTION_NAMES
        print(f"greedy joint action: ({names[greedy[0]]}, {names[greedy[1]]}) "
              f"payoff {MATRIX_PAYOFF[greedy]:+.1f} "
              f"fitted {q_tot[greedy]:+.3f}")
        return 0
    env = cfg.make_env()
    trainer = Trainer(env, cfg.algo_spec(), cfg.seed)
    trainer.load_snapshot(arrays)
    episodes = args.episodes if args.episodes else cfg.eval_episodes
    mean, std = trainer.evaluate(episodes)
    print(f"eval return over {episodes} episodes: {mean:.6g} +- {std:.6g}")
    return 0


def cmd_matrixlab(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    alpha = args.alpha
    seeds = list(range(args.seeds))
    print(matrixlab.format_table(MATRIX_PAYOFF, "payoff table"))
    _write_table_csv(out / "payoff.csv", MATRIX_PAYOFF)

    fits = [matrixlab.train_tabular_qmix(seed=s) for s in seeds]
    suboptimal = sum(1 for f in fits
                     if f.greedy != (0, 0) and f.q_tot[0, 0] < -4)
    fit = fits[0]
    print()
    print(matrixlab.format_table(
        fit.q_tot,
        f"monotonic decomposition fit (seed 0); greedy avoids (A,A) on "
        f"{suboptimal}/{len(seeds)} seeds"))
    print(f"  per-agent values u1: {np.round(fit.q1, 2)}  "
          f"u2: {np.round(fit.q2, 2)}")
    _write_table_csv(out / "decomposition_fit.csv", fit.q_tot)

    policy = matrixlab.boltzmann(fit.q_tot, alpha)
    print()
    print(matrixlab.format_table(policy, f"Boltzmann policy of the fit "
                                         f"(alpha={alpha:g})", fmt="{:9.3f}"))
    _write_table_csv(out / "decomposition_policy.csv", policy)

    jfit = matrixlab.train_qmixs(seed=seeds[0])
    print()
    print(matrixlab.format_table(jfit.q_tot, "joint-conditioned fit"))
    _write_table_csv(out / "joint_conditioned_fit.csv", jfit.q_tot)
    jpolicy = matrixlab.boltzmann(jfit.q_tot, alpha)
    print()
    print(matrixlab.format_table(jpolicy, f"Boltzmann policy of the "
                                          f"joint-conditioned fit (alpha={alpha:g})",
                                 fmt="{:9.3f}"))
    _write_table_csv(out / "joint_conditioned_policy.csv", jpolicy)

    print()
    for a in (0.1, 1.0, 3.0):
        trace = matrixlab.soft_policy_iteration(alpha=a, iterations=5)
        mono = all(b >= x - 1e-12 for x, b in zip(trace, trace[1:]))
        print(f"soft policy iteration alpha={a:<4g} objective trace "
              f"{np.round(trace, 3)} nondecreasing={mono}")
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    emit_plot(args.inputs, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marl", description="cooperative multi-agent RL laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training job")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", default=None)
    p_train.add_argument("--seeds", default=None,
                         help="seed range `A..B` or list `a,b,c`; one child "
                              "process per seed")
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--ckpt", required=True)
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--episodes", type=int, default=None)
    p_eval.set_defaults(fn=cmd_eval)

    p_mat = sub.add_parser("matrixlab", help="tabular matrix-game study")
    p_mat.add_argument("--alpha", type=float, default=3.0)
    p_mat.add_argument("--seeds", type=int, default=5)
    p_mat.add_argument("--out", default="matrixlab_out")
    p_mat.set_defaults(fn=cmd_matrixlab)

    p_plot = sub.add_parser("plot", help="reward-curve SVG from metrics.csv")
    p_plot.add_argument("--in", dest="inputs", action="append", required=True)
    p_plot.add_argument("--out", required=True)
    p_plot.set_defaults(fn=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, CheckpointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
