"""Criterion-8 experiment: IAC vs the deterministic baseline on the
two-mode one-step task, 5 seeds each."""

import sys
import time

import numpy as np

from marllab.algorithms import AlgoSpec, Trainer
from marllab.environments import make_env

GLOBAL = np.array([4.0, 3.0])
LOCAL = np.array([-6.0, -6.0])


def final_action(algo: str, seed: int, steps: int, ratio: int) -> np.ndarray:
    spec = AlgoSpec.named(algo, alpha=0.02, hidden=10, updates_per_step=ratio)
    tr = Trainer(make_env("simple_world"), spec, seed, expected_steps=steps)
    t0 = time.time()
    tr.train(steps, eval_interval=steps, eval_episodes=1)
    res = tr.env.reset(0)
    act = tr.act(res.observations, res.state, "eval").reshape(2)
    print(f"{algo} r{ratio} seed {seed}: action=({act[0]:+.2f},{act[1]:+.2f}) "
          f"d_global={np.linalg.norm(act-GLOBAL):.2f} "
          f"d_local={np.linalg.norm(act-LOCAL):.2f} "
          f"[{time.time()-t0:.0f}s]", flush=True)
    return act


def main() -> None:
    algo = sys.argv[1]
    ratio = int(sys.argv[2])
    steps = int(sys.argv[3]) if len(sys.argv) > 3 else 20000
    seeds = [int(s) for s in sys.argv[4].split(",")] if len(sys.argv) > 4 \
        else list(range(5))
    hits_global = hits_local = 0
    for seed in seeds:
        act = final_action(algo, seed, steps, ratio)
        hits_global += np.linalg.norm(act - GLOBAL) < 1.0
        hits_local += np.linalg.norm(act - LOCAL) < 1.0
    print(f"== {algo} ratio {ratio}: global {hits_global}/{len(seeds)}, "
          f"local {hits_local}/{len(seeds)}", flush=True)


if __name__ == "__main__":
    main()
