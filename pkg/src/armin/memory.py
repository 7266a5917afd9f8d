"""External memory with gumbel-softmax auto-addressing.

Reads select a stored state by a categorical sample over slot logits
computed from (x, h) alone; writes fill empty slots first and then
overwrite the slot that was last read.  Three addressing modes:

* ``soft``             - downstream read uses the relaxed sample (gradient
                         checking).
* ``straight_through`` - forward uses the hard one-hot row, backward flows
                         as if the relaxed sample had been used (training
                         default).
* ``argmax``           - no noise, exact one-hot, no gradient (inference).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ModeError, ParameterError, ProtocolError
from .tensor import (
    Tensor,
    add,
    affine,
    concat,
    const,
    lane_where,
    scale,
    softmax,
    straight_through_read,
    weighted_sum,
)

MODES = ("soft", "straight_through", "argmax")

NOISE_CLAMP = 1e-12


@dataclass
class GumbelConfig:
    tau_max: float = 1.0
    tau_min: float = 0.25
    anneal_iters: int = 1
    mode: str = "straight_through"

    def __post_init__(self):
        if not (self.tau_max >= self.tau_min > 0.0):
            raise ParameterError(
                f"need tau_max >= tau_min > 0, got ({self.tau_max}, {self.tau_min})"
            )
        if self.mode not in MODES:
            raise ParameterError(f"unknown addressing mode {self.mode!r}")


def anneal_tau(config: GumbelConfig, iteration: int) -> float:
    """Exponential decay from tau_max to the tau_min floor over anneal_iters."""
    if config.tau_max == config.tau_min or config.anneal_iters <= 0:
        return config.tau_min
    rate = math.log(config.tau_max / config.tau_min) / config.anneal_iters
    return max(config.tau_min, config.tau_max * math.exp(-rate * iteration))


def gumbel_noise(k: int, rng: np.random.Generator) -> np.ndarray:
    """k i.i.d. Gumbel(0, 1) draws via -log(-log u), u clamped off {0, 1}."""
    u = np.clip(rng.random(k), NOISE_CLAMP, 1.0 - NOISE_CLAMP)
    return -np.log(-np.log(u))


class NoiseSource:
    """Where addressing noise comes from; lets tests freeze or disable it."""

    def draw(self, shape) -> np.ndarray:
        raise NotImplementedError


class RngNoise(NoiseSource):
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def draw(self, shape) -> np.ndarray:
        u = np.clip(self.rng.random(shape), NOISE_CLAMP, 1.0 - NOISE_CLAMP)
        return -np.log(-np.log(u))


class ZeroNoise(NoiseSource):
    def draw(self, shape) -> np.ndarray:
        return np.zeros(shape)


class ScaledNoise(NoiseSource):
    """Gumbel draws damped by a mutable scale; the training loop anneals the
    scale from 1 toward 0 so addressing explores early and stabilizes late."""

    def __init__(self, rng: np.random.Generator, scale: float = 1.0):
        self.inner = RngNoise(rng)
        self.scale = scale

    def draw(self, shape) -> np.ndarray:
        if self.scale == 0.0:
            return np.zeros(shape)
        return self.inner.draw(shape) * self.scale


class FrozenNoise(NoiseSource):
    """Replays a fixed list of draws, cycling per forward evaluation."""

    def __init__(self, draws: list[np.ndarray]):
        self.draws = draws
        self._next = 0

    def draw(self, shape) -> np.ndarray:
        out = self.draws[self._next % len(self.draws)]
        self._next += 1
        if out.shape != tuple(shape if isinstance(shape, tuple) else (shape,)) and out.shape != shape:
            raise DimensionError(f"frozen draw shape {out.shape} != requested {shape}")
        return out

    @classmethod
    def capture(cls, rng: np.random.Generator, shape, steps: int) -> "FrozenNoise":
        src = RngNoise(rng)
        return cls([src.draw(shape) for _ in range(steps)])


@dataclass
class AddressSample:
    """One addressing event: logits, the noise used, the relaxed sample and
    its argmax."""

    logits: Tensor
    noise: np.ndarray
    relaxed: Tensor
    hard_index: "int | np.ndarray"
    mode: str


def gumbel_softmax_sample(
    logits: Tensor, tau: float, noise: np.ndarray, mode: str
) -> AddressSample:
    """softmax((logits + noise) / tau), with the argmax preserved for any tau."""
    if tau <= 0.0:
        raise ParameterError(f"temperature must be positive, got {tau}")
    if mode not in MODES:
        raise ParameterError(f"unknown addressing mode {mode!r}")
    if mode == "argmax":
        hard = np.argmax(logits.data, axis=-1)
        one_hot = np.zeros_like(logits.data)
        if logits.data.ndim == 1:
            hard = int(hard)
            one_hot[hard] = 1.0
        else:
            one_hot[np.arange(one_hot.shape[0]), hard] = 1.0
        return AddressSample(
            logits=logits,
            noise=np.zeros_like(logits.data),
            relaxed=const(one_hot),
            hard_index=hard,
            mode=mode,
        )
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != logits.shape:
        raise DimensionError(
            f"noise shape {noise.shape} does not match logits {logits.shape}"
        )
    shifted = add(logits, const(noise))
    relaxed = softmax(scale(shifted, 1.0 / tau))
    hard = np.argmax(shifted.data, axis=-1)
    if logits.data.ndim == 1:
        hard = int(hard)
    return AddressSample(
        logits=logits, noise=noise, relaxed=relaxed, hard_index=hard, mode=mode
    )


def address(
    x: Tensor,
    h_prev: Tensor,
    params,
    tau: float,
    noise_source: NoiseSource,
    mode: str,
) -> AddressSample:
    """Slot logits W_s @ [x, h_prev] + b_s fed through the gumbel-softmax."""
    logits = affine(concat([x, h_prev], axis=-1), params.W_s, params.b_s)
    if mode == "argmax":
        noise = np.zeros_like(logits.data)
    else:
        noise = noise_source.draw(logits.shape)
    return gumbel_softmax_sample(logits, tau, noise, mode)


# ------------------------------------------------------------------ the bank

class MemoryBank:
    """n_mem stored state rows plus fill count and the last-read index.

    Rows are tape tensors so written states keep their gradient path; rows
    with index >= filled stay all-zero until first written.  For batched
    runs each row is a [B, d_r] matrix and last_read is a per-lane index
    array; the fill phase is lockstep because every step writes exactly once.
    """

    def __init__(self, n_mem: int, width: int, batch: int | None = None,
                 mode: str = "straight_through"):
        if mode not in MODES:
            raise ParameterError(f"unknown addressing mode {mode!r}")
        shape = (width,) if batch is None else (batch, width)
        self.rows: list[Tensor] = [const(np.zeros(shape)) for _ in range(n_mem)]
        self.n_mem = n_mem
        self.width = width
        self.batch = batch
        self.filled = 0
        self.last_read: "int | np.ndarray | None" = None
        self.mode = mode

    def row_values(self) -> np.ndarray:
        return np.stack([r.data for r in self.rows])


def memory_read(bank: MemoryBank, sample: AddressSample) -> Tensor:
    """r = sum_i s(i) M(i, :); hard modes return the selected row itself."""
    bank.last_read = sample.hard_index
    if sample.mode == "soft":
        return weighted_sum(sample.relaxed, bank.rows)
    if sample.mode == "straight_through":
        return straight_through_read(sample.relaxed, bank.rows, sample.hard_index)
    # argmax: reference to the stored slot, no weighted sum, no gradient
    if bank.batch is None:
        return bank.rows[int(sample.hard_index)]
    idx = np.asarray(sample.hard_index)
    gathered = np.empty((bank.batch, bank.width))
    for lane in range(bank.batch):
        gathered[lane] = bank.rows[int(idx[lane])].data[lane]
    return const(gathered)


def memory_write(bank: MemoryBank, h_new: Tensor, params) -> None:
    """Fill-then-overwrite: empty slots first, then the slot last read.

    The written value is W_m @ h_new when the state and slot widths differ;
    it stays on the tape, so later reads backpropagate into the state that
    produced it.
    """
    from .tensor import linear  # local import to avoid a cycle at module load

    value = h_new if params.W_m is None else linear(h_new, params.W_m)
    if value.shape[-1] != bank.width:
        raise DimensionError(
            f"write value width {value.shape[-1]} != slot width {bank.width}"
        )
    if bank.filled < bank.n_mem:
        bank.rows[bank.filled] = value
        bank.filled += 1
    else:
        if bank.last_read is None:
            raise ProtocolError("bank is full and no read happened this step")
        if bank.batch is None:
            bank.rows[int(bank.last_read)] = value
        else:
            idx = np.asarray(bank.last_read)
            for slot in np.unique(idx):
                mask = (idx == slot).astype(np.float64)
                bank.rows[int(slot)] = lane_where(mask, value, bank.rows[int(slot)])
    bank.last_read = None


# ------------------------------------------------------------ inference view

class DiscreteSlots:
    """Plain-array slot list for argmax inference: reads hand back the stored
    vector, writes replace it in place."""

    def __init__(self, n_mem: int, width: int, batch: int | None = None):
        shape = (width,) if batch is None else (batch, width)
        self.slots: list[np.ndarray] = [np.zeros(shape) for _ in range(n_mem)]
        self.n_mem = n_mem
        self.batch = batch
        self.filled = 0
        self.last_read: "int | np.ndarray | None" = None

    def read(self, index) -> np.ndarray:
        self.last_read = index
        if self.batch is None:
            return self.slots[int(index)]
        idx = np.asarray(index)
        out = np.empty((self.batch, self.slots[0].shape[1]))
        for lane in range(self.batch):
            out[lane] = self.slots[int(idx[lane])][lane]
        return out

    def write(self, value: np.ndarray) -> None:
        if self.filled < self.n_mem:
            self.slots[self.filled] = value
            self.filled += 1
        else:
            if self.last_read is None:
                raise ProtocolError("slots are full and no read happened this step")
            if self.batch is None:
                self.slots[int(self.last_read)] = value
            else:
                idx = np.asarray(self.last_read)
                for lane in range(len(idx)):
                    self.slots[int(idx[lane])][lane] = value[lane]
        self.last_read = None


def inference_bank(bank: MemoryBank) -> DiscreteSlots:
    """Discrete-slot view of a bank; only meaningful under argmax addressing."""
    if bank.mode != "argmax":
        raise ModeError(f"inference view requires argmax mode, bank is {bank.mode!r}")
    view = DiscreteSlots(bank.n_mem, bank.width, bank.batch)
    view.slots = [r.data for r in bank.rows]
    view.filled = bank.filled
    view.last_read = bank.last_read
    return view
