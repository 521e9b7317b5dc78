"""Criterion-9 probe/run: IAC on the sparse n-pendulum task."""

import sys
import time

import numpy as np

from marllab.algorithms import AlgoSpec, Trainer
from marllab.environments import make_env


def main() -> None:
    seed = int(sys.argv[1])
    steps = int(sys.argv[2]) if len(sys.argv) > 2 else 300_000
    n = int(sys.argv[3]) if len(sys.argv) > 3 else 2
    algo = sys.argv[4] if len(sys.argv) > 4 else "iac"
    env = make_env("multi_pendulum", n_agents=n)
    tr = Trainer(env, AlgoSpec.named(algo), seed, expected_steps=steps)
    t0 = time.time()

    def on_row(row):
        print(f"{algo} s{seed} step {row.step:7d}: eval {row.eval_return_mean:8.2f} "
              f"+-{row.eval_return_std:7.2f} ploss {row.policy_loss:9.3f} "
              f"closs {row.critic_loss:9.4f} H {row.joint_entropy:6.2f} "
              f"[{time.time()-t0:6.0f}s]", flush=True)

    tr.train(steps, eval_interval=max(steps // 20, 1), eval_episodes=10,
             on_metrics=on_row)
    mean, std = tr.evaluate(episodes=10, eval_index=999)
    print(f"== {algo} seed {seed}: final eval {mean:.2f} +- {std:.2f} "
          f"[{time.time()-t0:.0f}s]", flush=True)


if __name__ == "__main__":
    main()
