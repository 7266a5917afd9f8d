"""Micro-benchmarks: ARMIN vs LSTM throughput, addressing-mode cost, TBPTT
chunk trade-offs, and a compiled-vs-python kernel comparison.

Throughput loops run over pre-generated synthetic byte streams so sample
generation never lands inside the timed region.  The peak-allocation column
is the numeric core's own accounting (bytes of tensor and adjoint storage
touched by one chunk, plus the parameters), which is deterministic and
monotone in the dims, unlike OS-level RSS.
"""

from __future__ import annotations

import statistics
import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import backend as backend_mod
from . import tensor as tensor_mod
from . import training as training_mod
from .cells import param_count
from .errors import ConfigError, ParameterError
from .memory import RngNoise
from .tensor import Tape, alloc_bytes, reset_alloc_bytes
from .training import (
    AdamConfig,
    AdamState,
    Carry,
    adam_step,
    build_model,
    chunk_loss,
    clip_gradients,
    init_carry,
)

CSV_HEADER = "model,mode,d_h,d_r,n_mem,chunk,batch,params,steps_per_s,chars_per_s,peak_alloc_bytes"


@dataclass
class BenchConfig:
    model: str = "armin"
    mode: str = "straight_through"
    d_h: int = 64
    d_r: int = 32
    n_mem: int = 16
    chunk: int = 50
    batch: int = 1
    vocab: int = 64
    seed: int = 0


@dataclass
class BenchRow:
    model: str
    mode: str
    d_h: int
    d_r: int
    n_mem: int
    chunk: int
    batch: int
    params: int
    steps_per_s: float
    chars_per_s: float
    peak_alloc_bytes: int

    def csv(self) -> str:
        return (
            f"{self.model},{self.mode},{self.d_h},{self.d_r},{self.n_mem},"
            f"{self.chunk},{self.batch},{self.params},{self.steps_per_s:.1f},"
            f"{self.chars_per_s:.1f},{self.peak_alloc_bytes}"
        )


def report_csv(rows: list[BenchRow]) -> str:
    ordered = sorted(rows, key=lambda r: (r.model, r.mode))
    return "\n".join([CSV_HEADER] + [r.csv() for r in ordered])


def _build(config: BenchConfig):
    rng = np.random.default_rng(config.seed)
    model = build_model(config.model, config.vocab, config.vocab,
                        config.d_h, config.d_r, config.n_mem, rng)
    buffers = []
    for _ in range(8):
        stream = rng.integers(0, config.vocab, size=(config.batch, config.chunk + 1))
        buffers.append((stream[:, :-1], stream[:, 1:]))
    return model, buffers


def _one_pass(model, x_idx, y_idx, carry, mode, state, noise, training: bool):
    if training:
        with Tape() as tape:
            loss, carry = chunk_loss(model, x_idx, y_idx, carry, mode=mode,
                                     tau=0.5, noise=noise)
        grads = tape.backward(loss)
        named = model.named()
        by_name = {n: g for n, g in
                   ((n, grads.get(t)) for n, t in named.items()) if g is not None}
        clip_gradients(by_name, 10.0)
        adam_step(named, by_name, state)
    else:
        loss, carry = chunk_loss(model, x_idx, y_idx, carry, mode=mode)
    return carry


def alloc_estimate(config: BenchConfig) -> int:
    """Deterministic bytes-touched estimate: one chunk's tensor and adjoint
    allocations plus the parameter storage."""
    model, buffers = _build(config)
    training = config.mode != "argmax"
    named = model.named()
    state = AdamState(named, AdamConfig(lr=0.0)) if training else None
    noise = RngNoise(np.random.default_rng(config.seed + 1))
    carry = init_carry(model, config.batch)
    params = sum(t.data.size for t in named.values())
    reset_alloc_bytes()
    _one_pass(model, *buffers[0], carry, config.mode, state, noise, training)
    return alloc_bytes() + params * 8


def bench_throughput(config: BenchConfig, warmup: float = 0.2,
                     duration: float = 1.0, repeats: int = 3) -> BenchRow:
    """Median steps/s over timed forward(+backward+step) loops.

    Training modes (soft, straight_through) include backward and the
    optimizer step; argmax is the inference path, forward only.
    """
    if duration < 1.0:
        raise ParameterError(f"duration must be at least 1 s, got {duration}")
    model, buffers = _build(config)
    training = config.mode != "argmax"
    named = model.named()
    state = AdamState(named, AdamConfig(lr=0.0)) if training else None
    noise = RngNoise(np.random.default_rng(config.seed + 1))
    params = sum(t.data.size for t in named.values())

    carry = init_carry(model, config.batch)
    # allocation estimate from one instrumented pass
    reset_alloc_bytes()
    carry = _one_pass(model, *buffers[0], carry, config.mode, state, noise, training)
    peak_alloc = alloc_bytes() + params * 8

    rates = []
    for _ in range(repeats):
        t_end = time.perf_counter() + warmup
        k = 0
        while time.perf_counter() < t_end:
            carry = _one_pass(model, *buffers[k % len(buffers)], carry,
                              config.mode, state, noise, training)
            k += 1
        steps = 0
        t0 = time.perf_counter()
        t_end = t0 + duration
        while time.perf_counter() < t_end:
            carry = _one_pass(model, *buffers[k % len(buffers)], carry,
                              config.mode, state, noise, training)
            steps += config.chunk
            k += 1
        rates.append(steps / (time.perf_counter() - t0))
    steps_per_s = statistics.median(rates)
    return BenchRow(
        model=config.model, mode=config.mode, d_h=config.d_h, d_r=config.d_r,
        n_mem=config.n_mem, chunk=config.chunk, batch=config.batch,
        params=params, steps_per_s=steps_per_s,
        chars_per_s=steps_per_s * config.batch, peak_alloc_bytes=peak_alloc,
    )


def config_params(config: BenchConfig) -> int:
    rng = np.random.default_rng(0)
    model = build_model(config.model, config.vocab, config.vocab,
                        config.d_h, config.d_r, config.n_mem, rng)
    return param_count(model.cell, model.head)


def bench_matched(params_budget: int, configs: list[BenchConfig],
                  warmup: float = 0.2, duration: float = 1.0) -> list[BenchRow]:
    """Throughput comparison at matched parameter counts (within 5%)."""
    for config in configs:
        count = config_params(config)
        drift = abs(count - params_budget) / params_budget
        if drift > 0.05:
            raise ConfigError(
                f"{config.model} config has {count} params, outside 5% of the "
                f"{params_budget} budget"
            )
    return [bench_throughput(c, warmup=warmup, duration=duration) for c in configs]


# ------------------------------------------------------- backend comparison

@contextmanager
def kernel_scope(module):
    previous = tensor_mod.K
    tensor_mod.K = module
    training_mod.K = module
    try:
        yield
    finally:
        tensor_mod.K = previous
        training_mod.K = previous


def compare_kernel_backends(config: BenchConfig | None = None,
                            warmup: float = 0.2, duration: float = 1.0) -> dict[str, float]:
    """steps/s of the same training loop under each importable backend."""
    config = config or BenchConfig()
    out = {}
    for name, module in backend_mod.available_backends().items():
        with kernel_scope(module):
            row = bench_throughput(config, warmup=warmup, duration=duration)
        out[name] = row.steps_per_s
    return out
