"""Benchmark: compiled kernels vs the numpy fallback.

Times the raw kernels on realistic buffer sizes and a full training-step
workload (policy + critic update) under each backend.  Both backends are
bit-identical; this only measures speed.

Run:  python benchmarks/bench_backend.py
"""

import os
import time

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np

from marllab.diffmath import _kernels_np
from marllab.diffmath import backend

try:
    from marllab.diffmath import _kernels_cy
except ImportError:
    _kernels_cy = None


def time_fn(fn, *args, repeat=2000):
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat * 1e6  # us


def bench_kernels() -> None:
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'size':>8}{'numpy us':>12}{'cython us':>12}{'speedup':>9}")
    for n in (1024, 16384, 262144):
        x = rng.uniform(-2, 2, n).astype(np.float32)
        g = rng.uniform(-2, 2, n).astype(np.float32)
        y = np.tanh(x)
        grad = np.zeros(n, dtype=np.float32)
        m = np.zeros(n, dtype=np.float32)
        v = np.zeros(n, dtype=np.float32)
        p = x.copy()
        cases = [
            ("relu_fwd", lambda k: k.relu_fwd(x)),
            ("relu_bwd_acc", lambda k: k.relu_bwd_acc(grad, g, x)),
            ("tanh_bwd_acc", lambda k: k.tanh_bwd_acc(grad, g, y)),
            ("mul_acc", lambda k: k.mul_acc(grad, g, y)),
            ("adam_step", lambda k: k.adam_step(p, g, m, v, 1e-3, 0.9, 0.999,
                                                1e-8, 0.1, 0.001)),
        ]
        for name, fn in cases:
            t_np = time_fn(fn, _kernels_np)
            if _kernels_cy is None:
                print(f"{name:<16}{n:>8}{t_np:>12.2f}{'-':>12}{'-':>9}")
            else:
                t_cy = time_fn(fn, _kernels_cy)
                print(f"{name:<16}{n:>8}{t_np:>12.2f}{t_cy:>12.2f}"
                      f"{t_np / t_cy:>9.2f}")


def bench_training_step() -> None:
    from marllab.algorithms import AlgoSpec, Trainer
    from marllab.environments import make_env

    print()
    print("full update round (policy + critic step, batch 256):")
    for env_name, kwargs in (("simple_world", dict(hidden=10, alpha=0.02)),
                             ("multi_pendulum", dict())):
        rounds = {}
        for name in ("py", "cy") if _kernels_cy is not None else ("py",):
            backend.set_backend(name)
            env = (make_env(env_name, n_agents=2)
                   if env_name == "multi_pendulum" else make_env(env_name))
            spec = AlgoSpec.named("iac", warmup_steps=64, **kwargs)
            tr = Trainer(env, spec, 0, expected_steps=2000)
            for _ in range(300):
                tr.collect_step("train")
            batch = tr.buffer.sample(256, tr._rng_batch)
            tr.policy_update(batch)
            tr.critic_update(batch)
            t0 = time.perf_counter()
            n = 150
            for _ in range(n):
                tr.policy_update(batch)
                tr.critic_update(batch)
            rounds[name] = (time.perf_counter() - t0) / n * 1000
        if len(rounds) == 2:
            print(f"  {env_name:<16} numpy {rounds['py']:.2f} ms   "
                  f"cython {rounds['cy']:.2f} ms   "
                  f"speedup {rounds['py'] / rounds['cy']:.2f}x")
        else:
            print(f"  {env_name:<16} numpy {rounds['py']:.2f} ms "
                  f"(compiled kernels not built)")
    backend.set_backend("py" if _kernels_cy is None else "cy")


if __name__ == "__main__":
    print(f"active backend: {backend.backend_name()}")
    bench_kernels()
    bench_training_step()
