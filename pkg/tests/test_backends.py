"""The two kernel backends must agree to floating-point roundoff on every
kernel, and the selection machinery must honor ARMIN_KERNELS."""

import os
import subprocess
import sys

import numpy as np
import pytest

from armin import _kernels_py as py_k
from armin.backend import available_backends

BACKENDS = available_backends()
HAS_COMPILED = "compiled" in BACKENDS

pytestmark = pytest.mark.skipif(
    not HAS_COMPILED, reason="compiled kernel extension not built"
)


def c_k():
    return BACKENDS["compiled"]


def close(a, b, tol=1e-12):
    a, b = np.asarray(a), np.asarray(b)
    assert a.shape == b.shape
    denom = np.maximum(1.0, np.abs(a))
    assert np.max(np.abs(a - b) / denom) <= tol


@pytest.fixture
def rng():
    return np.random.default_rng(20240229)


def test_matmul_parity(rng):
    a = rng.standard_normal((5, 7))
    b = rng.standard_normal((7, 3))
    close(py_k.matmul(a, b), c_k().matmul(a, b))
    g = rng.standard_normal((5, 3))
    for x, y in zip(py_k.matmul_bwd(a, b, g), c_k().matmul_bwd(a, b, g)):
        close(x, y)


@pytest.mark.parametrize("batched", [False, True])
def test_affine_parity(rng, batched):
    x = rng.standard_normal((4, 6) if batched else 6)
    w = rng.standard_normal((3, 6))
    b = rng.standard_normal(3)
    close(py_k.affine(x, w, b), c_k().affine(x, w, b))
    close(py_k.linear(x, w), c_k().linear(x, w))
    g = rng.standard_normal((4, 3) if batched else 3)
    for u, v in zip(py_k.affine_bwd(x, w, g), c_k().affine_bwd(x, w, g)):
        close(u, v)
    for u, v in zip(py_k.linear_bwd(x, w, g), c_k().linear_bwd(x, w, g)):
        close(u, v)


@pytest.mark.parametrize("name", ["sigmoid", "tanh", "neg"])
def test_unary_parity(rng, name):
    x = rng.uniform(-6, 6, size=(3, 5))
    close(getattr(py_k, name)(x), getattr(c_k(), name)(x))


@pytest.mark.parametrize("name", ["add", "sub", "mul"])
def test_binary_parity(rng, name):
    a = rng.standard_normal((2, 9))
    b = rng.standard_normal((2, 9))
    close(getattr(py_k, name)(a, b), getattr(c_k(), name)(a, b))


def test_bwd_helpers_parity(rng):
    y = rng.uniform(0.01, 0.99, size=7)
    g = rng.standard_normal(7)
    close(py_k.sigmoid_bwd(y, g), c_k().sigmoid_bwd(y, g))
    t = rng.uniform(-0.99, 0.99, size=7)
    close(py_k.tanh_bwd(t, g), c_k().tanh_bwd(t, g))
    close(py_k.scale(g, 1.7), c_k().scale(g, 1.7))
    assert abs(py_k.sumall(g) - c_k().sumall(g)) < 1e-12
    assert abs(py_k.sqsum(g) - c_k().sqsum(g)) < 1e-12


@pytest.mark.parametrize("shape", [(6,), (4, 6)])
def test_softmax_parity(rng, shape):
    x = rng.uniform(-8, 8, size=shape)
    close(py_k.softmax(x), c_k().softmax(x))
    y = py_k.softmax(x)
    g = rng.standard_normal(shape)
    close(py_k.softmax_bwd(y, g), c_k().softmax_bwd(y, g))


def test_loss_parity(rng):
    pred = rng.uniform(0.001, 0.999, size=(5, 3))
    target = rng.integers(0, 2, size=(5, 3)).astype(float)
    mask = rng.integers(0, 2, size=(5, 3)).astype(float)
    mask[0, 0] = 1.0
    assert abs(py_k.bce(pred, target, mask) - c_k().bce(pred, target, mask)) < 1e-13
    close(py_k.bce_bwd(pred, target, mask, 1.3),
          c_k().bce_bwd(pred, target, mask, 1.3))

    logits = rng.uniform(-4, 4, size=(6, 5))
    targets = rng.integers(0, 5, size=6)
    nats_py, probs_py = py_k.ce(logits, targets)
    nats_c, probs_c = c_k().ce(logits, targets)
    assert abs(nats_py - nats_c) < 1e-13
    close(probs_py, probs_c)
    close(py_k.ce_bwd(probs_py, targets, 1.0, 1.0),
          c_k().ce_bwd(probs_c, targets, 1.0, 1.0))


def test_weighted_sum_parity(rng):
    weights = rng.dirichlet(np.ones(4))
    rows = [rng.standard_normal(5) for _ in range(4)]
    close(py_k.wsum_vec(weights, rows), c_k().wsum_vec(weights, rows))
    g = rng.standard_normal(5)
    gw_py, grows_py = py_k.wsum_vec_bwd(weights, rows, g)
    gw_c, grows_c = c_k().wsum_vec_bwd(weights, rows, g)
    close(gw_py, gw_c)
    for a, b in zip(grows_py, grows_c):
        close(a, b)

    weights2 = rng.dirichlet(np.ones(4), size=3)
    rows2 = [rng.standard_normal((3, 5)) for _ in range(4)]
    close(py_k.wsum_bat(weights2, rows2), c_k().wsum_bat(weights2, rows2))
    g2 = rng.standard_normal((3, 5))
    gw_py, grows_py = py_k.wsum_bat_bwd(weights2, rows2, g2)
    gw_c, grows_c = c_k().wsum_bat_bwd(weights2, rows2, g2)
    close(gw_py, gw_c)
    for a, b in zip(grows_py, grows_c):
        close(a, b)


def test_adam_parity(rng):
    p1 = rng.standard_normal(8)
    g = rng.standard_normal(8)
    m1, v1 = np.zeros(8), np.zeros(8)
    p2, m2, v2 = p1.copy(), m1.copy(), v1.copy()
    for t in range(1, 4):
        py_k.adam_step(p1, g, m1, v1, t, 0.01, 0.9, 0.999, 1e-8)
        c_k().adam_step(p2, g, m2, v2, t, 0.01, 0.9, 0.999, 1e-8)
    close(p1, p2)
    close(m1, m2)
    close(v1, v2)


def test_whole_model_loss_parity(rng):
    from armin.bench import kernel_scope
    from armin.memory import RngNoise
    from armin.tasks import task_spec
    from armin.training import build_model, run_sequence

    spec = task_spec("copy", len_range=(3, 3))
    results = {}
    for name, module in BACKENDS.items():
        with kernel_scope(module):
            model = build_model("armin", 8, 6, 12, 6, 4, np.random.default_rng(5))
            sample = spec.sample(np.random.default_rng(6))
            loss, grads = run_sequence(
                model, sample, noise=RngNoise(np.random.default_rng(7))
            )
            results[name] = (loss, grads["W_ig"].copy())
    assert abs(results["python"][0] - results["compiled"][0]) < 1e-12
    close(results["python"][1], results["compiled"][1], tol=1e-9)


def test_env_var_selects_backend():
    code = (
        "import armin.backend as b; print(b.backend_name())"
    )
    for requested, expected in (("python", "python"), ("compiled", "compiled"),
                                ("auto", "compiled")):
        env = dict(os.environ, ARMIN_KERNELS=requested)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        assert out.stdout.strip() == expected
