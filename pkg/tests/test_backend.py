"""Kernel backend parity: the compiled extension must be bit-identical to
the numpy fallback, so backend choice can never change results."""

import numpy as np
import pytest

from marllab.diffmath import _kernels_np
from marllab.diffmath import backend

try:
    from marllab.diffmath import _kernels_cy
except ImportError:  # pure build
    _kernels_cy = None

needs_ext = pytest.mark.skipif(_kernels_cy is None,
                               reason="compiled kernels not built")


def _rand(rng, shape, dtype):
    return rng.uniform(-2, 2, shape).astype(dtype)


@needs_ext
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_elementwise_kernels_bit_identical(dtype):
    rng = np.random.default_rng(0)
    n = 4097
    x = _rand(rng, n, dtype)
    g = _rand(rng, n, dtype)
    y = np.tanh(x)

    assert np.array_equal(_kernels_np.relu_fwd(x), _kernels_cy.relu_fwd(x))

    for fn in ("relu_bwd_acc", "tanh_bwd_acc", "abs_bwd_acc", "mul_acc",
               "exp_bwd_acc", "log_bwd_acc"):
        other = np.abs(x) + 0.5 if fn == "log_bwd_acc" else y
        g1 = _rand(rng, n, dtype)
        g2 = g1.copy()
        getattr(_kernels_np, fn)(g1, g, other if fn != "relu_bwd_acc" else x)
        getattr(_kernels_cy, fn)(g2, g, other if fn != "relu_bwd_acc" else x)
        assert np.array_equal(g1, g2), fn

    g1 = _rand(rng, n, dtype)
    g2 = g1.copy()
    _kernels_np.add_acc(g1, g)
    _kernels_cy.add_acc(g2, g)
    assert np.array_equal(g1, g2)

    diff = _rand(rng, n, dtype)
    g1 = _rand(rng, n, dtype)
    g2 = g1.copy()
    _kernels_np.sq_loss_bwd_acc(g1, diff, 0.123, -1.0)
    _kernels_cy.sq_loss_bwd_acc(g2, diff, 0.123, -1.0)
    assert np.array_equal(g1, g2)


@needs_ext
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_adam_sequence_bit_identical(dtype):
    rng = np.random.default_rng(1)
    n = 513
    p1 = _rand(rng, n, dtype)
    p2 = p1.copy()
    m1 = np.zeros(n, dtype)
    m2 = np.zeros(n, dtype)
    v1 = np.zeros(n, dtype)
    v2 = np.zeros(n, dtype)
    for t in range(1, 101):
        g = _rand(rng, n, dtype)
        bc1, bc2 = 1.0 - 0.9**t, 1.0 - 0.999**t
        _kernels_np.adam_step(p1, g, m1, v1, 1e-3, 0.9, 0.999, 1e-8, bc1, bc2)
        _kernels_cy.adam_step(p2, g, m2, v2, 1e-3, 0.9, 0.999, 1e-8, bc1, bc2)
    assert np.array_equal(p1, p2)
    assert np.array_equal(v1, v2)


@needs_ext
def test_relu_nan_propagation_matches_numpy():
    x = np.array([np.nan, -1.0, 0.0, 2.0], dtype=np.float32)
    a = _kernels_np.relu_fwd(x)
    b = _kernels_cy.relu_fwd(x)
    assert np.array_equal(np.isnan(a), np.isnan(b))
    assert np.array_equal(a[1:], b[1:])


@needs_ext
def test_training_steps_bit_identical_across_backends():
    from marllab.algorithms import AlgoSpec, Trainer
    from marllab.environments import make_env

    original = backend.backend_name()

    def run(name):
        backend.set_backend(name)
        try:
            spec = AlgoSpec.named("iac", hidden=10, warmup_steps=16,
                                  batch_size=8, alpha=0.02)
            tr = Trainer(make_env("simple_world"), spec, seed=3,
                         expected_steps=120)
            tr.train(120, eval_interval=60, eval_episodes=2)
            return {k: v.copy() for k, v in tr.snapshot().items()}
        finally:
            backend.set_backend(original)

    snap_py = run("py")
    snap_cy = run("cy")
    assert snap_py.keys() == snap_cy.keys()
    for key in snap_py:
        assert np.array_equal(snap_py[key], snap_cy[key]), key


def test_backend_name_and_switch():
    original = backend.backend_name()
    backend.set_backend("py")
    assert backend.backend_name() == "numpy"
    if _kernels_cy is not None:
        backend.set_backend("cy")
        assert backend.backend_name() == "cython"
    backend.set_backend("py" if original == "numpy" else "cy")
    with pytest.raises(ValueError):
        backend.set_backend("fortran")
