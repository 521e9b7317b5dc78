"""Ablation for the deterministic baseline's exploration noise scale on
the two-mode task: where does each seed's final policy land?"""

import sys
import time

import numpy as np

from marllab.algorithms import AlgoSpec, Trainer
from marllab.environments import make_env

GLOBAL = np.array([4.0, 3.0])
LOCAL = np.array([-6.0, -6.0])


def run(noise: float, seed: int, steps: int = 20000) -> np.ndarray:
    spec = AlgoSpec.named("ddpg_mix", alpha=0.02, hidden=10, expl_noise=noise)
    tr = Trainer(make_env("simple_world"), spec, seed, expected_steps=steps)
    res = tr.env.reset(0)
    init = tr.act(res.observations, res.state, "eval").reshape(2)
    tr.train(steps, eval_interval=steps, eval_episodes=1)
    res = tr.env.reset(0)
    act = tr.act(res.observations, res.state, "eval").reshape(2)
    print(f"noise {noise} seed {seed}: init=({init[0]:+6.2f},{init[1]:+6.2f}) "
          f"-> ({act[0]:+6.2f},{act[1]:+6.2f}) "
          f"dg={np.linalg.norm(act-GLOBAL):5.2f} "
          f"dl={np.linalg.norm(act-LOCAL):5.2f}", flush=True)
    return act


def main() -> None:
    noise = float(sys.argv[1])
    seeds = [int(s) for s in sys.argv[2].split(",")]
    hits_g = hits_l = 0
    t0 = time.time()
    for seed in seeds:
        act = run(noise, seed)
        hits_g += np.linalg.norm(act - GLOBAL) < 1.0
        hits_l += np.linalg.norm(act - LOCAL) < 1.0
    print(f"== noise {noise}: global {hits_g}/{len(seeds)} "
          f"local {hits_l}/{len(seeds)} [{time.time()-t0:.0f}s]", flush=True)


if __name__ == "__main__":
    main()
