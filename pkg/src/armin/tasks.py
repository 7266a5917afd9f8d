"""Seedable generators for the synthetic sequence tasks and a byte-level
language-modelling batcher.

Channel layouts (all inputs are [T, d_i], targets/mask [T, d_o]):

copy          d_i=8,  d_o=6   ch0-5 data bits, ch6 start flag (row 0),
                              ch7 delimiter; answer rows follow the delimiter.
repeat_copy   d_i=9,  d_o=7   as copy plus ch8 = repeats/10 on the delimiter
                              row; output ch6 is the end marker.
assoc_recall  d_i=9,  d_o=6   ch0-5 bits, ch6 start, ch7 pair flag on key
                              rows, ch8 query flag; one answer step.
priority_sort d_i=9,  d_o=6   ch0-5 key bits, ch6 priority in (-1, 1),
                              ch7 start, ch8 delimiter; 30 answer steps.

Every generator is a pure function of its rng state: the same seed gives a
bitwise-identical sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import DataError, ParameterError


@dataclass
class TaskSample:
    inputs: np.ndarray
    targets: np.ndarray
    mask: np.ndarray


@dataclass
class TaskSpec:
    name: str
    d_i: int
    d_o: int
    generate: Callable[..., TaskSample]
    ranges: dict = field(default_factory=dict)

    def sample(self, rng: np.random.Generator, **overrides) -> TaskSample:
        kwargs = dict(self.ranges)
        kwargs.update(overrides)
        return self.generate(rng, **kwargs)


def _check_range(name: str, value, lo: int, hi: int) -> tuple[int, int]:
    a, b = int(value[0]), int(value[1])
    if not (lo <= a <= b <= hi):
        raise ParameterError(f"{name} range {value} outside [{lo}, {hi}]")
    return a, b


def gen_copy(rng: np.random.Generator, len_range=(1, 50)) -> TaskSample:
    """Present L rows of 6 random bits, a delimiter, then ask for them back."""
    lo, hi = _check_range("copy length", len_range, 1, 50)
    L = int(rng.integers(lo, hi + 1))
    bits = rng.integers(0, 2, size=(L, 6)).astype(np.float64)
    T = 2 * L + 1
    inputs = np.zeros((T, 8))
    inputs[:L, :6] = bits
    inputs[0, 6] = 1.0
    inputs[L, 7] = 1.0
    targets = np.zeros((T, 6))
    targets[L + 1 :] = bits
    mask = np.zeros((T, 6))
    mask[L + 1 :] = 1.0
    return TaskSample(inputs, targets, mask)


def gen_repeat_copy(rng: np.random.Generator, len_range=(1, 10), rep_range=(1, 10)) -> TaskSample:
    """Copy a short bit sequence n times, then emit an end marker."""
    lo, hi = _check_range("repeat-copy length", len_range, 1, 10)
    rlo, rhi = _check_range("repeat count", rep_range, 1, 10)
    L = int(rng.integers(lo, hi + 1))
    n = int(rng.integers(rlo, rhi + 1))
    bits = rng.integers(0, 2, size=(L, 6)).astype(np.float64)
    T = L + 1 + n * L + 1
    inputs = np.zeros((T, 9))
    inputs[:L, :6] = bits
    inputs[0, 6] = 1.0
    inputs[L, 7] = 1.0
    inputs[L, 8] = n / 10.0
    targets = np.zeros((T, 7))
    for k in range(n):
        targets[L + 1 + k * L : L + 1 + (k + 1) * L, :6] = bits
    targets[T - 1, 6] = 1.0
    mask = np.zeros((T, 7))
    mask[L + 1 :] = 1.0
    return TaskSample(inputs, targets, mask)


def gen_assoc_recall(rng: np.random.Generator, pairs_range=(2, 6)) -> TaskSample:
    """Show key/value pairs, query one stored key, expect its value."""
    plo, phi = _check_range("pair count", pairs_range, 2, 6)
    p = int(rng.integers(plo, phi + 1))
    keys = np.empty((p, 6))
    seen = set()
    for j in range(p):
        while True:
            k = rng.integers(0, 2, size=6).astype(np.float64)
            key_id = tuple(k)
            if key_id not in seen:
                seen.add(key_id)
                keys[j] = k
                break
    values = rng.integers(0, 2, size=(p, 6)).astype(np.float64)
    query = int(rng.integers(0, p))
    T = 2 * p + 3
    inputs = np.zeros((T, 9))
    inputs[0, 6] = 1.0
    for j in range(p):
        inputs[2 * j, :6] = keys[j]
        inputs[2 * j, 7] = 1.0
        inputs[2 * j + 1, :6] = values[j]
    inputs[2 * p, 8] = 1.0
    inputs[2 * p + 1, :6] = keys[query]
    targets = np.zeros((T, 6))
    targets[T - 1] = values[query]
    mask = np.zeros((T, 6))
    mask[T - 1] = 1.0
    return TaskSample(inputs, targets, mask)


def gen_priority_sort(rng: np.random.Generator, n_in: int = 40, n_out: int = 30) -> TaskSample:
    """Input keys with priorities; answer the top n_out keys in descending
    priority, ties broken by input position (earlier wins)."""
    if n_out > n_in:
        raise ParameterError(f"n_out {n_out} exceeds n_in {n_in}")
    keys = rng.integers(0, 2, size=(n_in, 6)).astype(np.float64)
    priorities = rng.uniform(-1.0, 1.0, size=n_in)
    order = np.argsort(-priorities, kind="stable")
    T = n_in + 1 + n_out
    inputs = np.zeros((T, 9))
    inputs[:n_in, :6] = keys
    inputs[:n_in, 6] = priorities
    inputs[0, 7] = 1.0
    inputs[n_in, 8] = 1.0
    targets = np.zeros((T, 6))
    targets[n_in + 1 :] = keys[order[:n_out]]
    mask = np.zeros((T, 6))
    mask[n_in + 1 :] = 1.0
    return TaskSample(inputs, targets, mask)


TASKS: dict[str, TaskSpec] = {
    "copy": TaskSpec("copy", 8, 6, gen_copy, {"len_range": (1, 50)}),
    "repeat_copy": TaskSpec(
        "repeat_copy", 9, 7, gen_repeat_copy,
        {"len_range": (1, 10), "rep_range": (1, 10)},
    ),
    "assoc_recall": TaskSpec(
        "assoc_recall", 9, 6, gen_assoc_recall, {"pairs_range": (2, 6)}
    ),
    "priority_sort": TaskSpec(
        "priority_sort", 9, 6, gen_priority_sort, {"n_in": 40, "n_out": 30}
    ),
}


def task_spec(name: str, **range_overrides) -> TaskSpec:
    if name not in TASKS:
        raise ParameterError(f"unknown task {name!r}; know {sorted(TASKS)}")
    base = TASKS[name]
    ranges = dict(base.ranges)
    for key, value in range_overrides.items():
        if key not in ranges:
            raise ParameterError(f"task {name!r} takes no range {key!r}")
        ranges[key] = value
    return TaskSpec(base.name, base.d_i, base.d_o, base.generate, ranges)


# ---------------------------------------------------------------- char-LM

class CharBatcher:
    """Contiguous-stream chunker over a byte corpus.

    The corpus is cut into ``batch`` equal streams; each yielded pair is the
    aligned (x_t, x_{t+1}) index matrices of the next ``chunk`` steps, so
    consecutive chunks continue each stream and state carry-over is
    meaningful.  Inputs are vocabulary indices; callers one-hot on the fly.
    """

    def __init__(self, corpus: bytes, batch: int, chunk: int):
        if len(corpus) <= batch * chunk:
            raise DataError(
                f"corpus of {len(corpus)} bytes too small for batch {batch} x "
                f"chunk {chunk}"
            )
        self.vocab = sorted(set(corpus))
        self.vocab_size = len(self.vocab)
        lookup = np.zeros(256, dtype=np.int64)
        for i, byte in enumerate(self.vocab):
            lookup[byte] = i
        data = lookup[np.frombuffer(corpus, dtype=np.uint8)]
        per_stream = len(data) // batch
        self.streams = data[: batch * per_stream].reshape(batch, per_stream)
        self.batch = batch
        self.chunk = chunk
        self.n_chunks = (per_stream - 1) // chunk

    def chunks(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        for k in range(self.n_chunks):
            lo = k * self.chunk
            hi = lo + self.chunk
            yield self.streams[:, lo:hi], self.streams[:, lo + 1 : hi + 1]

    def __iter__(self):
        return self.chunks()


def charlm_batches(corpus: bytes, batch: int, chunk: int) -> CharBatcher:
    return CharBatcher(corpus, batch, chunk)
