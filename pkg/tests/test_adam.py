import numpy as np
import pytest

import marllab.diffmath as dm
from marllab.diffmath import Adam


def test_first_step_is_signed_learning_rate():
    p = dm.param(np.array([0.0]), "p")
    p.grad = np.array([0.5], dtype=np.float32)
    opt = Adam([p], lr=1e-3)
    opt.step()
    # bias-corrected first step is -lr * g/(|g| + eps')
    assert p.data[0] == pytest.approx(-1e-3, rel=1e-3)


def test_zero_grad_leaves_params_unchanged():
    p = dm.param(np.array([1.0, -2.0]), "p")
    p.grad = np.zeros(2, dtype=np.float32)
    opt = Adam([p], lr=0.1)
    for _ in range(3):
        opt.step()
    assert np.array_equal(p.data, np.array([1.0, -2.0], dtype=np.float32))


def test_missing_grad_raises():
    p = dm.param(np.array([1.0]), "p")
    opt = Adam([p], lr=0.1)
    with pytest.raises(dm.GraphError, match="no gradient"):
        opt.step()


def test_quadratic_convergence():
    p = dm.param(np.array([0.0]), "p")
    target = dm.const(np.array([2.0]))
    opt = Adam([p], lr=1e-2)
    for _ in range(5000):
        with dm.record():
            dm.backward(dm.square_loss(p, target))
        opt.step()
        opt.zero_grad()
    assert abs(p.data[0] - 2.0) < 1e-2


def test_step_counter_strictly_increases():
    p = dm.param(np.array([0.0]), "p")
    opt = Adam([p], lr=1e-3)
    counts = []
    for _ in range(4):
        p.grad = np.array([1.0], dtype=np.float32)
        opt.step()
        counts.append(opt.step_count)
    assert counts == [1, 2, 3, 4]


def test_moments_match_param_shapes():
    shapes = [(3, 4), (5,), (2, 2, 2)]
    params = [dm.param(np.zeros(s), f"p{i}") for i, s in enumerate(shapes)]
    opt = Adam(params, lr=1e-3)
    for p, m, v in zip(params, opt._m, opt._v):
        assert m.shape == p.data.shape
        assert v.shape == p.data.shape
