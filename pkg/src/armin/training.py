"""Training loop machinery: Adam, sequence BPTT, truncated BPTT with state
carry-over, validation under argmax addressing, and the solved criterion
(validation loss two orders of magnitude under the ~0.70 starting point).
"""

from __future__ import annotations

import csv
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .backend import kernels as K
from .cells import (
    ArminDims,
    ArminParams,
    LstmParams,
    armin_cell_forward,
    lstm_cell_forward,
    uniform_init,
)
from .errors import ConfigError, NanLossError
from .memory import (
    DiscreteSlots,
    GumbelConfig,
    MemoryBank,
    NoiseSource,
    RngNoise,
    ScaledNoise,
    ZeroNoise,
    address,
    anneal_tau,
    memory_read,
    memory_write,
)
from .tasks import CharBatcher, TaskSpec, task_spec
from .tensor import (
    Tape,
    Tensor,
    add,
    affine,
    bce_loss,
    ce_loss,
    const,
    linear,
    scale,
    sigmoid,
    stack_rows,
)

# ----------------------------------------------------------------- optimizer

@dataclass
class AdamConfig:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class AdamState:
    """First/second moment buffers mirroring the parameter shapes."""

    def __init__(self, params: dict[str, Tensor], config: AdamConfig | None = None):
        self.config = config or AdamConfig()
        self.step = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}


def adam_step(
    params: dict[str, Tensor], grads: dict[str, np.ndarray], state: AdamState
) -> None:
    """One bias-corrected update, in place on the parameter tensors."""
    cfg = state.config
    state.step += 1
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ConfigError(
                f"gradient shape {g.shape} != parameter {name} shape {p.data.shape}"
            )
        K.adam_step(
            p.data, g, state.m[name], state.v[name],
            state.step, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps,
        )


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Global-norm clip, in place; returns the pre-clip norm."""
    total = 0.0
    for g in grads.values():
        total += K.sqsum(g)
    norm = math.sqrt(total)
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / norm
        for g in grads.values():
            g *= factor
    return norm


# ------------------------------------------------------------ solved tracker

@dataclass
class ConvergenceTracker:
    """Ring buffer of the last ten validation losses.

    Solved means the latest loss is under the threshold and at most
    ``max_spikes`` of the window exceed it (strictly less than 30% of 10).
    """

    threshold: float = 0.01
    window: int = 10
    max_spikes: int = 2
    losses: deque = field(default_factory=lambda: deque(maxlen=10))

    def push(self, loss: float) -> None:
        self.losses.append(float(loss))


def solved_check(tracker: ConvergenceTracker) -> bool:
    if len(tracker.losses) < tracker.window:
        return False
    spikes = sum(1 for l in tracker.losses if l > tracker.threshold)
    return spikes <= tracker.max_spikes and tracker.losses[-1] < tracker.threshold


# -------------------------------------------------------------------- models

@dataclass
class OutputHead:
    W: Tensor
    b: Tensor

    @classmethod
    def init(cls, d_out: int, d_feat: int, rng: np.random.Generator) -> "OutputHead":
        return cls(
            W=Tensor(uniform_init(rng, d_out, d_feat), name="out_W"),
            b=Tensor(np.zeros(d_out), name="out_b"),
        )

    def named(self) -> dict[str, Tensor]:
        return {"out_W": self.W, "out_b": self.b}


@dataclass
class ArminModel:
    cell: ArminParams
    head: OutputHead
    kind: str = "armin"

    @property
    def d_i(self) -> int:
        return self.cell.dims.d_i

    @property
    def d_o(self) -> int:
        return self.head.W.shape[0]

    def named(self) -> dict[str, Tensor]:
        return {**self.cell.named(), **self.head.named()}

    def infer(self, sample) -> np.ndarray:
        return infer_sequence(self, sample)


@dataclass
class LstmModel:
    cell: LstmParams
    head: OutputHead
    kind: str = "lstm"

    @property
    def d_i(self) -> int:
        return self.cell.d_i

    @property
    def d_o(self) -> int:
        return self.head.W.shape[0]

    def named(self) -> dict[str, Tensor]:
        return {**self.cell.named(), **self.head.named()}

    def infer(self, sample) -> np.ndarray:
        return infer_sequence(self, sample)


def build_model(kind: str, d_i: int, d_o: int, d_h: int, d_r: int, n_mem: int,
                rng: np.random.Generator):
    if kind == "armin":
        cell = ArminParams.init(ArminDims(d_i, d_h, d_r, n_mem), rng)
        head = OutputHead.init(d_o, d_h + d_r, rng)
        return ArminModel(cell, head)
    if kind == "lstm":
        cell = LstmParams.init(d_i, d_h, rng)
        head = OutputHead.init(d_o, d_h, rng)
        return LstmModel(cell, head)
    raise ConfigError(f"unknown model kind {kind!r}")


def model_from_tensors(tensors: dict[str, np.ndarray]):
    """Rebuild a model from named checkpoint arrays; dims come from shapes."""
    head = OutputHead(W=Tensor(tensors["out_W"]), b=Tensor(tensors["out_b"]))
    if "W_s" in tensors:
        n_mem, cols_s = tensors["W_s"].shape
        rows_ig, cols_ig = tensors["W_ig"].shape
        d_i = cols_ig - rows_ig
        d_h = cols_s - d_i
        d_r = rows_ig - d_h
        cell = ArminParams(
            dims=ArminDims(d_i, d_h, d_r, n_mem),
            W_ig=Tensor(tensors["W_ig"], name="W_ig"),
            b_ig=Tensor(tensors["b_ig"], name="b_ig"),
            W_go=Tensor(tensors["W_go"], name="W_go"),
            b_go=Tensor(tensors["b_go"], name="b_go"),
            W_s=Tensor(tensors["W_s"], name="W_s"),
            b_s=Tensor(tensors["b_s"], name="b_s"),
            W_m=Tensor(tensors["W_m"], name="W_m") if "W_m" in tensors else None,
        )
        return ArminModel(cell, head)
    rows, cols = tensors["W"].shape
    d_h = rows // 4
    cell = LstmParams(
        d_i=cols - d_h, d_h=d_h,
        W=Tensor(tensors["W"], name="W"),
        b=Tensor(tensors["b"], name="b"),
    )
    return LstmModel(cell, head)


# ----------------------------------------------------------- sequence runners

def sequence_loss(model, sample, mode: str = "straight_through", tau: float = 1.0,
                  noise: NoiseSource | None = None):
    """Masked BCE of one task sample: address, read, cell, write, project.

    Records on the active tape when one is open; memory starts empty for
    every sample.  Returns (loss tensor, prediction matrix values).
    """
    inputs, targets, mask = sample.inputs, sample.targets, sample.mask
    steps = inputs.shape[0]
    if inputs.shape[1] != model.d_i or targets.shape[1] != model.d_o:
        raise ConfigError(
            f"model dims (d_i={model.d_i}, d_o={model.d_o}) do not match sample "
            f"({inputs.shape[1]}, {targets.shape[1]})"
        )
    noise = noise or ZeroNoise()
    preds = []
    if model.kind == "armin":
        dims = model.cell.dims
        bank = MemoryBank(dims.n_mem, dims.d_r, mode=mode)
        h = const(np.zeros(dims.d_h), name="h0")
        for t in range(steps):
            x = const(inputs[t])
            s = address(x, h, model.cell, tau, noise, mode)
            r = memory_read(bank, s)
            o, h = armin_cell_forward(x, h, r, model.cell)
            memory_write(bank, h, model.cell)
            preds.append(sigmoid(affine(o, model.head.W, model.head.b)))
    else:
        d_h = model.cell.d_h
        h = const(np.zeros(d_h), name="h0")
        c = const(np.zeros(d_h), name="c0")
        for t in range(steps):
            x = const(inputs[t])
            h, c = lstm_cell_forward(x, h, c, model.cell)
            preds.append(sigmoid(affine(h, model.head.W, model.head.b)))
    pred = stack_rows(preds)
    loss = bce_loss(pred, targets, mask)
    loss.name = "loss"
    return loss, pred.data


def run_sequence(model, sample, mode: str = "straight_through", tau: float = 1.0,
                 noise: NoiseSource | None = None):
    """Full BPTT over one sample: returns (loss value, grads by name)."""
    with Tape() as tape:
        loss, _ = sequence_loss(model, sample, mode=mode, tau=tau, noise=noise)
    grads = tape.backward(loss)
    named = model.named()
    return float(loss.data), {k: grads.get(t) for k, t in named.items()}


def infer_sequence(model, sample) -> np.ndarray:
    """Argmax-addressing forward pass, no tape, discrete memory slots.

    Produces the same values as a straight-through training forward with
    the noise disabled.
    """
    inputs = sample.inputs
    steps = inputs.shape[0]
    probs = np.empty((steps, model.d_o))
    if model.kind == "armin":
        dims = model.cell.dims
        slots = DiscreteSlots(dims.n_mem, dims.d_r)
        h = const(np.zeros(dims.d_h))
        for t in range(steps):
            x = const(inputs[t])
            logits = affine(
                const(np.concatenate([x.data, h.data])),
                model.cell.W_s, model.cell.b_s,
            )
            r = const(slots.read(int(np.argmax(logits.data))))
            o, h = armin_cell_forward(x, h, r, model.cell)
            value = h if model.cell.W_m is None else linear(h, model.cell.W_m)
            slots.write(value.data)
            probs[t] = sigmoid(affine(o, model.head.W, model.head.b)).data
    else:
        d_h = model.cell.d_h
        h = const(np.zeros(d_h))
        c = const(np.zeros(d_h))
        for t in range(steps):
            h, c = lstm_cell_forward(const(inputs[t]), h, c, model.cell)
            probs[t] = sigmoid(affine(h, model.head.W, model.head.b)).data
    return probs


# -------------------------------------------------------------------- TBPTT

def one_hot(indices: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((indices.shape[0], width))
    out[np.arange(indices.shape[0]), indices] = 1.0
    return out


@dataclass
class Carry:
    """Detached state passed between TBPTT chunks: plain value arrays only."""

    h: np.ndarray
    c: np.ndarray | None = None
    rows: list | None = None
    filled: int = 0


def init_carry(model, batch: int) -> Carry:
    if model.kind == "armin":
        dims = model.cell.dims
        return Carry(
            h=np.zeros((batch, dims.d_h)),
            rows=[np.zeros((batch, dims.d_r)) for _ in range(dims.n_mem)],
            filled=0,
        )
    return Carry(
        h=np.zeros((batch, model.cell.d_h)),
        c=np.zeros((batch, model.cell.d_h)),
    )


def chunk_loss(model, x_idx: np.ndarray, y_idx: np.ndarray, carry: Carry,
               mode: str = "straight_through", tau: float = 1.0,
               noise: NoiseSource | None = None):
    """Mean next-byte cross-entropy (nats) over one chunk.

    The incoming carry enters as constants, so gradients stop at the chunk
    boundary; the returned carry holds detached values for the next chunk.
    """
    noise = noise or ZeroNoise()
    batch, steps = x_idx.shape
    vocab = model.d_i
    total = None
    if model.kind == "armin":
        dims = model.cell.dims
        bank = MemoryBank(dims.n_mem, dims.d_r, batch=batch, mode=mode)
        bank.rows = [const(r) for r in carry.rows]
        bank.filled = carry.filled
        h = const(carry.h)
        for t in range(steps):
            x = const(one_hot(x_idx[:, t], vocab))
            s = address(x, h, model.cell, tau, noise, mode)
            r = memory_read(bank, s)
            o, h = armin_cell_forward(x, h, r, model.cell)
            memory_write(bank, h, model.cell)
            logits = affine(o, model.head.W, model.head.b)
            step = ce_loss(logits, y_idx[:, t])
            total = step if total is None else add(total, step)
        new_carry = Carry(
            h=h.data.copy(),
            rows=[r.data.copy() for r in bank.rows],
            filled=bank.filled,
        )
    else:
        h = const(carry.h)
        c = const(carry.c)
        for t in range(steps):
            x = const(one_hot(x_idx[:, t], vocab))
            h, c = lstm_cell_forward(x, h, c, model.cell)
            logits = affine(h, model.head.W, model.head.b)
            step = ce_loss(logits, y_idx[:, t])
            total = step if total is None else add(total, step)
        new_carry = Carry(h=h.data.copy(), c=c.data.copy())
    loss = scale(total, 1.0 / steps)
    loss.name = "chunk_loss"
    return loss, new_carry


def run_tbptt_epoch(model, batcher: CharBatcher, state: AdamState,
                    carry: Carry | None = None, mode: str = "straight_through",
                    tau: float = 1.0, noise: NoiseSource | None = None,
                    grad_clip: float = 10.0, max_chunks: int | None = None):
    """Forward+backward+step per chunk; h and M values carry, gradients do not."""
    named = model.named()
    carry = carry or init_carry(model, batcher.batch)
    losses = []
    for k, (x_idx, y_idx) in enumerate(batcher.chunks()):
        if max_chunks is not None and k >= max_chunks:
            break
        with Tape() as tape:
            loss, carry = chunk_loss(model, x_idx, y_idx, carry, mode=mode,
                                     tau=tau, noise=noise)
        value = float(loss.data)
        if not math.isfinite(value):
            raise NanLossError(
                f"non-finite chunk loss; first bad tensor: {tape.first_nonfinite()}"
            )
        grads = tape.backward(loss)
        by_name = {n: grads.get(t) for n, t in named.items()}
        by_name = {n: g for n, g in by_name.items() if g is not None}
        clip_gradients(by_name, grad_clip)
        adam_step(named, by_name, state)
        losses.append(value)
    return {"mean_loss_nats": float(np.mean(losses)) if losses else math.nan,
            "mean_bpc": float(np.mean(losses)) / math.log(2) if losses else math.nan,
            "chunks": len(losses)}, carry


def charlm_bpc(model, x_stream: np.ndarray, chunk: int, max_chars: int | None = None) -> float:
    """Forward-only bits-per-character of one index stream (argmax addressing)."""
    data = x_stream if max_chars is None else x_stream[: max_chars + 1]
    carry = init_carry(model, 1)
    total_nats = 0.0
    count = 0
    pos = 0
    while pos + 1 < data.shape[0]:
        hi = min(pos + chunk, data.shape[0] - 1)
        x_idx = data[pos:hi][None, :]
        y_idx = data[pos + 1 : hi + 1][None, :]
        loss, carry = chunk_loss(model, x_idx, y_idx, carry, mode="argmax")
        total_nats += float(loss.data) * (hi - pos)
        count += hi - pos
        pos = hi
    return total_nats / count / math.log(2)


# --------------------------------------------------------------- validation

def validate(model, spec: TaskSpec, n_samples: int, seed: int) -> float:
    """Mean masked BCE over freshly generated samples, argmax addressing.

    Uses its own generator stream and touches no parameters or optimizer
    state.  Any object with ``infer(sample) -> probs`` works as a model.
    """
    rng = np.random.default_rng(seed)
    losses = []
    for _ in range(n_samples):
        sample = spec.sample(rng)
        probs = model.infer(sample)
        losses.append(K.bce(probs, sample.targets, sample.mask))
    return float(np.mean(losses))


def sample_accuracy(model, spec: TaskSpec, n_samples: int, seed: int) -> float:
    """Fraction of samples whose answer bits all round to the target."""
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_samples):
        sample = spec.sample(rng)
        probs = model.infer(sample)
        on = sample.mask > 0.5
        if np.all((probs[on] > 0.5) == (sample.targets[on] > 0.5)):
            hits += 1
    return hits / n_samples


# -------------------------------------------------------------- train driver

CSV_COLUMNS = ["iter", "wall_time_s", "train_loss", "val_loss", "tau", "lr", "solved"]


@dataclass
class TrainConfig:
    model: str = "armin"
    task: str = "copy"
    d_h: int = 64
    d_r: int = 32
    n_mem: int = 16
    lr: float = 2e-3
    iterations: int = 30000
    val_interval: int = 500
    val_samples: int = 64
    tau_max: float = 1.0
    tau_min: float = 0.25
    anneal_iters: int = 0  # 0 means the first half of training
    noise_anneal_iters: int = 0  # 0 tracks anneal_iters; -1 keeps full noise
    noise_floor: float = 0.25  # residual addressing-noise scale after anneal
    adam_eps: float = 1e-6
    adam_beta2: float = 0.99
    address_mode: str = "straight_through"
    chunk: int = 150
    batch: int = 1
    seed: int = 0
    grad_clip: float = 10.0
    corpus: str = ""
    len_min: int = 0
    len_max: int = 0
    rep_min: int = 0
    rep_max: int = 0
    pairs_min: int = 0
    pairs_max: int = 0
    sort_n_in: int = 0
    sort_n_out: int = 0

    def gumbel(self) -> GumbelConfig:
        anneal = self.anneal_iters if self.anneal_iters > 0 else max(1, self.iterations // 2)
        return GumbelConfig(self.tau_max, self.tau_min, anneal, self.address_mode)

    def noise_scale(self, iteration: int) -> float:
        """Exploration schedule for addressing noise: linear decay to a floor."""
        if self.noise_anneal_iters < 0:
            return 1.0
        span = self.noise_anneal_iters
        if span == 0:
            span = self.anneal_iters if self.anneal_iters > 0 else max(1, self.iterations // 2)
        return max(self.noise_floor, 1.0 - iteration / span)

    def task_ranges(self) -> dict:
        out = {}
        if self.len_min and self.len_max:
            out["len_range"] = (self.len_min, self.len_max)
        if self.rep_min and self.rep_max:
            out["rep_range"] = (self.rep_min, self.rep_max)
        if self.pairs_min and self.pairs_max:
            out["pairs_range"] = (self.pairs_min, self.pairs_max)
        if self.sort_n_in:
            out["n_in"] = self.sort_n_in
        if self.sort_n_out:
            out["n_out"] = self.sort_n_out
        return out


@dataclass
class TrainResult:
    solved: bool
    solved_iter: int | None
    iterations_run: int
    rows: list
    model: object
    final_val: float
    wall_time_s: float


def _derive_rngs(seed: int):
    children = np.random.SeedSequence(seed).spawn(4)
    init_rng = np.random.default_rng(children[0])
    task_rng = np.random.default_rng(children[1])
    noise_rng = np.random.default_rng(children[2])
    val_seed = int(np.random.default_rng(children[3]).integers(0, 2**31 - 1))
    return init_rng, task_rng, noise_rng, val_seed


def write_metrics_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                             for c in CSV_COLUMNS])


def train(config: TrainConfig, csv_path=None, model=None, progress=None) -> TrainResult:
    """Generate, unroll, step; validate on a cadence; stop on solved.

    Aborts with NanLossError (naming the first offending tensor) rather than
    skipping a bad iteration.
    """
    if config.task == "charlm":
        return _train_charlm(config, csv_path=csv_path, model=model, progress=progress)
    spec = task_spec(config.task, **config.task_ranges())
    init_rng, task_rng, noise_rng, val_seed = _derive_rngs(config.seed)
    if model is None:
        model = build_model(config.model, spec.d_i, spec.d_o,
                            config.d_h, config.d_r, config.n_mem, init_rng)
    named = model.named()
    state = AdamState(named, AdamConfig(lr=config.lr, eps=config.adam_eps, beta2=config.adam_beta2))
    gcfg = config.gumbel()
    noise = ScaledNoise(noise_rng)
    tracker = ConvergenceTracker()
    rows = []
    t0 = time.perf_counter()
    running, running_n = 0.0, 0
    solved = False
    solved_iter = None
    final_val = math.nan
    iterations_run = 0
    for it in range(1, config.iterations + 1):
        iterations_run = it
        tau = anneal_tau(gcfg, it - 1)
        noise.scale = config.noise_scale(it - 1)
        # batch > 1 accumulates gradients over that many samples per step
        by_name: dict = {}
        value = 0.0
        for _ in range(config.batch):
            sample = spec.sample(task_rng)
            with Tape() as tape:
                loss, _ = sequence_loss(model, sample, mode=config.address_mode,
                                        tau=tau, noise=noise)
            sample_value = float(loss.data)
            if not math.isfinite(sample_value):
                raise NanLossError(
                    f"non-finite loss at iteration {it}; first bad tensor: "
                    f"{tape.first_nonfinite()}"
                )
            value += sample_value / config.batch
            grads = tape.backward(loss)
            for n, t in named.items():
                g = grads.get(t)
                if g is None:
                    continue
                if n in by_name:
                    by_name[n] += g
                else:
                    by_name[n] = g.copy()
        if config.batch > 1:
            for g in by_name.values():
                g /= config.batch
        clip_gradients(by_name, config.grad_clip)
        adam_step(named, by_name, state)
        running += value
        running_n += 1
        if it % config.val_interval == 0:
            val = validate(model, spec, config.val_samples, val_seed)
            final_val = val
            tracker.push(val)
            solved = solved_check(tracker)
            rows.append({
                "iter": it,
                "wall_time_s": round(time.perf_counter() - t0, 3),
                "train_loss": running / max(running_n, 1),
                "val_loss": val,
                "tau": tau,
                "lr": config.lr,
                "solved": int(solved),
            })
            if progress:
                progress(rows[-1])
            running, running_n = 0.0, 0
            if solved:
                solved_iter = it
                break
    if csv_path:
        write_metrics_csv(csv_path, rows)
    return TrainResult(solved, solved_iter, iterations_run, rows, model,
                       final_val, time.perf_counter() - t0)


def _train_charlm(config: TrainConfig, csv_path=None, model=None, progress=None) -> TrainResult:
    """TBPTT char-LM training; val_loss column reports held-out BPC."""
    if not config.corpus:
        raise ConfigError("charlm task needs a corpus path")
    with open(config.corpus, "rb") as fh:
        corpus = fh.read()
    split = int(len(corpus) * 0.9)
    train_bytes, val_bytes = corpus[:split], corpus[split:]
    batcher = CharBatcher(train_bytes, config.batch, config.chunk)
    vocab = batcher.vocab_size
    init_rng, _, noise_rng, _ = _derive_rngs(config.seed)
    if model is None:
        model = build_model(config.model, vocab, vocab,
                            config.d_h, config.d_r, config.n_mem, init_rng)
    lookup = np.full(256, -1, dtype=np.int64)
    for i, byte in enumerate(batcher.vocab):
        lookup[byte] = i
    val_idx = lookup[np.frombuffer(val_bytes, dtype=np.uint8)]
    val_idx = val_idx[val_idx >= 0]  # bytes unseen in training are dropped

    named = model.named()
    state = AdamState(named, AdamConfig(lr=config.lr, eps=config.adam_eps, beta2=config.adam_beta2))
    gcfg = config.gumbel()
    noise = ScaledNoise(noise_rng)
    rows = []
    t0 = time.perf_counter()
    carry = init_carry(model, config.batch)
    it = 0
    running, running_n = 0.0, 0
    final_val = math.nan
    while it < config.iterations:
        for x_idx, y_idx in batcher.chunks():
            if it >= config.iterations:
                break
            it += 1
            tau = anneal_tau(gcfg, it - 1)
            noise.scale = config.noise_scale(it - 1)
            with Tape() as tape:
                loss, carry = chunk_loss(model, x_idx, y_idx, carry,
                                         mode=config.address_mode, tau=tau,
                                         noise=noise)
            value = float(loss.data)
            if not math.isfinite(value):
                raise NanLossError(
                    f"non-finite loss at iteration {it}; first bad tensor: "
                    f"{tape.first_nonfinite()}"
                )
            grads = tape.backward(loss)
            by_name = {n: g for n, g in
                       ((n, grads.get(t)) for n, t in named.items()) if g is not None}
            clip_gradients(by_name, config.grad_clip)
            adam_step(named, by_name, state)
            running += value
            running_n += 1
            if it % config.val_interval == 0:
                bpc = charlm_bpc(model, val_idx, config.chunk, max_chars=10000)
                final_val = bpc
                rows.append({
                    "iter": it,
                    "wall_time_s": round(time.perf_counter() - t0, 3),
                    "train_loss": running / max(running_n, 1),
                    "val_loss": bpc,
                    "tau": tau,
                    "lr": config.lr,
                    "solved": 0,
                })
                if progress:
                    progress(rows[-1])
                running, running_n = 0.0, 0
    if csv_path:
        write_metrics_csv(csv_path, rows)
    return TrainResult(False, None, it, rows, model, final_val,
                       time.perf_counter() - t0)
