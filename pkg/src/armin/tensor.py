"""Dense float64 tensors and a recorded-operation tape for reverse-mode
differentiation.

Ops run their forward math through the selected kernel backend.  While a
``Tape`` is active (used as a context manager) each op appends the backward
rule it needs; outside a tape the same calls are plain forward evaluation,
which is what inference uses.  Binary elementwise ops require identical
shapes; the only broadcast in the whole core is the bias add inside
``affine``, over the leading batch axis.
"""

from __future__ import annotations

import math

import numpy as np

from .backend import kernels as K
from .errors import ContractError, DimensionError

LOG_CLAMP = 1e-12

_alloc_bytes = 0


def _count(nbytes: int) -> None:
    global _alloc_bytes
    _alloc_bytes += nbytes


def reset_alloc_bytes() -> None:
    global _alloc_bytes
    _alloc_bytes = 0


def alloc_bytes() -> int:
    """Bytes of tensor and adjoint storage allocated since the last reset."""
    return _alloc_bytes


class Tensor:
    """A dense float64 array; object identity keys its adjoint."""

    __slots__ = ("data", "constant", "name")

    def __init__(self, data, constant: bool = False, name: str | None = None):
        # ascontiguousarray would promote 0-d scalars to 1-d; keep ranks as-is
        arr = np.asarray(data, dtype=np.float64)
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.constant = constant
        self.name = name
        _count(arr.nbytes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.shape != ():
            raise ContractError(
                f"item() requires a scalar, got shape {self.data.shape}"
            )
        return float(self.data)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.data.shape})"


def tensor(data, name: str | None = None) -> Tensor:
    return Tensor(data, name=name)


def const(data, name: str | None = None) -> Tensor:
    """A tensor excluded from gradient accumulation (inputs, targets, masks)."""
    return Tensor(data, constant=True, name=name)


def zeros(shape, constant: bool = False) -> Tensor:
    return Tensor(np.zeros(shape), constant=constant)


def as_const(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, constant=True)


# ----------------------------------------------------------------- the tape

_ACTIVE: "Tape | None" = None


class Tape:
    """Ordered record of one forward pass.

    Nodes are appended in execution order, so the list itself is a valid
    topological order: a reverse sweep visits every consumer before its
    producers.
    """

    __slots__ = ("nodes",)

    def __init__(self):
        self.nodes: list = []

    def __enter__(self) -> "Tape":
        global _ACTIVE
        if _ACTIVE is not None:
            raise ContractError("tapes do not nest; close the active tape first")
        _ACTIVE = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        global _ACTIVE
        _ACTIVE = None

    def record(self, out: Tensor, inputs: tuple, bwd) -> None:
        self.nodes.append((out, inputs, bwd))

    def backward(self, loss: Tensor) -> "GradMap":
        """Reverse sweep from a scalar loss; adjoint of the loss seeds at 1."""
        if loss.data.shape != ():
            raise ContractError(
                f"backward target must be scalar, got shape {loss.data.shape}"
            )
        grads = GradMap()
        grads.seed(loss, np.ones((), dtype=np.float64))
        for out, inputs, bwd in reversed(self.nodes):
            g = grads.get(out)
            if g is None:
                continue
            for t, gt in zip(inputs, bwd(g)):
                if t is None or gt is None or t.constant:
                    continue
                grads.accumulate(t, gt)
        return grads

    def first_nonfinite(self) -> str | None:
        """Name/describe the first recorded tensor holding NaN or Inf."""
        for i, (out, _, _) in enumerate(self.nodes):
            if not np.all(np.isfinite(out.data)):
                return out.name or f"node[{i}] shape={out.data.shape}"
        return None


class GradMap:
    """Accumulated adjoints keyed by tensor identity."""

    def __init__(self):
        self._grads: dict[int, np.ndarray] = {}
        self._owned: dict[int, bool] = {}

    def seed(self, t: Tensor, g: np.ndarray) -> None:
        self._grads[id(t)] = g
        self._owned[id(t)] = True

    def accumulate(self, t: Tensor, g: np.ndarray) -> None:
        key = id(t)
        cur = self._grads.get(key)
        if cur is None:
            # Borrow the buffer; copy lazily on the first second contribution
            # so backward rules may alias their incoming adjoint.
            self._grads[key] = g
            self._owned[key] = False
        elif self._owned[key]:
            cur += g
        else:
            out = cur + g
            _count(out.nbytes)
            self._grads[key] = out
            self._owned[key] = True

    def get(self, t: Tensor) -> np.ndarray | None:
        return self._grads.get(id(t))

    def __getitem__(self, t: Tensor) -> np.ndarray:
        g = self._grads.get(id(t))
        if g is None:
            raise KeyError(f"no adjoint recorded for {t!r}")
        return g

    def __contains__(self, t: Tensor) -> bool:
        return id(t) in self._grads


def backward(tape: Tape, loss: Tensor) -> GradMap:
    return tape.backward(loss)


def _record(out: Tensor, inputs: tuple, bwd) -> None:
    if _ACTIVE is not None:
        _ACTIVE.record(out, inputs, bwd)


def _recording() -> bool:
    return _ACTIVE is not None


# --------------------------------------------------------------- primitives

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul mismatch: {a.shape} x {b.shape}")
    out = Tensor(K.matmul(a.data, b.data))
    if _recording():
        ad, bd = a.data, b.data
        _record(out, (a, b), lambda g: K.matmul_bwd(ad, bd, g))
    return out


def linear(x: Tensor, w: Tensor) -> Tensor:
    """x @ w.T for x of shape [in] or [batch, in]."""
    if x.shape[-1] != w.shape[1]:
        raise DimensionError(f"linear mismatch: x {x.shape}, w {w.shape}")
    out = Tensor(K.linear(x.data, w.data))
    if _recording():
        xd, wd = x.data, w.data
        _record(out, (x, w), lambda g: K.linear_bwd(xd, wd, g))
    return out


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w.T + b; the single sanctioned broadcast (bias over batch axis)."""
    if x.shape[-1] != w.shape[1] or b.shape != (w.shape[0],):
        raise DimensionError(
            f"affine mismatch: x {x.shape}, w {w.shape}, b {b.shape}"
        )
    out = Tensor(K.affine(x.data, w.data, b.data))
    if _recording():
        xd, wd = x.data, w.data
        _record(out, (x, w, b), lambda g: K.affine_bwd(xd, wd, g))
    return out


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op} requires equal shapes: {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    out = Tensor(K.add(a.data, b.data))
    if _recording():
        _record(out, (a, b), lambda g: (g, g))
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    out = Tensor(K.sub(a.data, b.data))
    if _recording():
        _record(out, (a, b), lambda g: (g, K.neg(g)))
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    out = Tensor(K.mul(a.data, b.data))
    if _recording():
        ad, bd = a.data, b.data
        _record(out, (a, b), lambda g: (K.mul(g, bd), K.mul(g, ad)))
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor(K.neg(a.data))
    if _recording():
        _record(out, (a,), lambda g: (K.neg(g),))
    return out


def sigmoid(a: Tensor) -> Tensor:
    out = Tensor(K.sigmoid(a.data))
    if _recording():
        od = out.data
        _record(out, (a,), lambda g: (K.sigmoid_bwd(od, g),))
    return out


def tanh(a: Tensor) -> Tensor:
    out = Tensor(K.tanh(a.data))
    if _recording():
        od = out.data
        _record(out, (a,), lambda g: (K.tanh_bwd(od, g),))
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(K.scale(a.data, float(c)))
    if _recording():
        cc = float(c)
        _record(out, (a,), lambda g: (K.scale(g, cc),))
    return out


def sumall(a: Tensor) -> Tensor:
    out = Tensor(np.asarray(K.sumall(a.data)))
    if _recording():
        shape = a.data.shape
        _record(out, (a,), lambda g: (np.full(shape, float(g)),))
    return out


# --------------------------------------------------------- shape operations

def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    if not parts:
        raise DimensionError("concat of zero parts")
    ndim = parts[0].data.ndim
    ax = axis % ndim if ndim else 0
    for p in parts[1:]:
        if p.data.ndim != ndim:
            raise DimensionError(
                f"concat rank mismatch: {parts[0].shape} vs {p.shape}"
            )
        for d in range(ndim):
            if d != ax and p.shape[d] != parts[0].shape[d]:
                raise DimensionError(
                    f"concat off-axis mismatch: {parts[0].shape} vs {p.shape}"
                )
    out = Tensor(np.concatenate([p.data for p in parts], axis=ax))
    if _recording():
        sizes = [p.shape[ax] for p in parts]

        def bwd(g):
            grads = []
            start = 0
            index = [slice(None)] * ndim
            for s in sizes:
                index[ax] = slice(start, start + s)
                grads.append(np.ascontiguousarray(g[tuple(index)]))
                start += s
            return tuple(grads)

        _record(out, tuple(parts), bwd)
    return out


def split(t: Tensor, sizes: list[int], axis: int = -1) -> list[Tensor]:
    ndim = t.data.ndim
    ax = axis % ndim if ndim else 0
    if sum(sizes) != t.shape[ax]:
        raise DimensionError(
            f"split sizes {sizes} do not sum to axis length {t.shape[ax]}"
        )
    outs = []
    start = 0
    for s in sizes:
        index = [slice(None)] * ndim
        index[ax] = slice(start, start + s)
        outs.append(_slice_node(t, tuple(index)))
        start += s
    return outs


def _slice_node(t: Tensor, index: tuple) -> Tensor:
    out = Tensor(np.ascontiguousarray(t.data[index]))
    if _recording():
        shape = t.data.shape

        def bwd(g):
            full = np.zeros(shape)
            _count(full.nbytes)
            full[index] = g
            return (full,)

        _record(out, (t,), bwd)
    return out


def stack_rows(parts: list[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal width into a [n, d] matrix."""
    width = parts[0].shape[0]
    for p in parts:
        if p.data.ndim != 1 or p.shape[0] != width:
            raise DimensionError(f"stack_rows needs equal 1-D parts, got {p.shape}")
    out = Tensor(np.stack([p.data for p in parts]))
    if _recording():
        _record(
            out,
            tuple(parts),
            lambda g: tuple(g[i].copy() for i in range(len(parts))),
        )
    return out


# ------------------------------------------------------------------ softmax

def softmax(logits: Tensor) -> Tensor:
    """Max-subtracted softmax over the last axis."""
    if logits.data.ndim not in (1, 2) or logits.shape[-1] < 1:
        raise DimensionError(f"softmax needs a 1-D or 2-D tensor, got {logits.shape}")
    out = Tensor(K.softmax(logits.data))
    if _recording():
        od = out.data
        _record(out, (logits,), lambda g: (K.softmax_bwd(od, g),))
    return out


# ------------------------------------------------------------------- losses

def bce_loss(pred: Tensor, target, mask) -> Tensor:
    """Masked mean binary cross-entropy in nats.

    Probabilities are clamped to [LOG_CLAMP, 1 - LOG_CLAMP] before the logs;
    the mask selects answer positions and its sum normalizes the loss.
    """
    target = as_const(target)
    mask = as_const(mask)
    if pred.shape != target.shape or pred.shape != mask.shape:
        raise DimensionError(
            f"bce_loss shapes differ: pred {pred.shape}, target {target.shape}, "
            f"mask {mask.shape}"
        )
    if float(mask.data.sum()) == 0.0:
        raise ValueError("empty loss mask")
    out = Tensor(np.asarray(K.bce(pred.data, target.data, mask.data)))
    if _recording():
        pd, td, md = pred.data, target.data, mask.data
        _record(
            out,
            (pred,),
            lambda g: (K.bce_bwd(pd, td, md, float(g)),),
        )
    return out


def ce_loss(logits: Tensor, targets, base: float = math.e) -> Tensor:
    """Mean negative log-likelihood of integer targets in the given base."""
    if logits.data.ndim != 2:
        raise DimensionError(f"ce_loss needs [steps, vocab] logits, got {logits.shape}")
    targets = np.ascontiguousarray(targets, dtype=np.int64)
    if targets.ndim != 1 or targets.shape[0] != logits.shape[0]:
        raise DimensionError(
            f"ce_loss targets length {targets.shape} does not match logits "
            f"{logits.shape}"
        )
    vocab = logits.shape[1]
    bad = (targets < 0) | (targets >= vocab)
    if bad.any():
        raise IndexError(
            f"target {int(targets[bad][0])} outside [0, {vocab}) at position "
            f"{int(np.argmax(bad))}"
        )
    nats, probs = K.ce(logits.data, targets)
    base_scale = 1.0 / math.log(base)
    out = Tensor(np.asarray(nats * base_scale))
    if _recording():
        _record(
            out,
            (logits,),
            lambda g: (K.ce_bwd(probs, targets, float(g), base_scale),),
        )
    return out


# ------------------------------------------------- memory-support primitives

def weighted_sum(weights: Tensor, rows: list[Tensor]) -> Tensor:
    """Convex-style combination of memory rows by a weight vector.

    1-D weights [n] with 1-D rows [d], or per-lane [B, n] weights with
    [B, d] rows.
    """
    if len(rows) != weights.shape[-1]:
        raise DimensionError(
            f"weighted_sum: {weights.shape[-1]} weights vs {len(rows)} rows"
        )
    batched = weights.data.ndim == 2
    row_data = [r.data for r in rows]
    if batched:
        out = Tensor(K.wsum_bat(weights.data, row_data))
    else:
        out = Tensor(K.wsum_vec(weights.data, row_data))
    if _recording():
        wd = weights.data

        def bwd(g):
            if batched:
                gw, grows = K.wsum_bat_bwd(wd, row_data, g)
            else:
                gw, grows = K.wsum_vec_bwd(wd, row_data, g)
            return (gw, *grows)

        _record(out, (weights, *rows), bwd)
    return out


def straight_through_read(relaxed: Tensor, rows: list[Tensor], hard) -> Tensor:
    """Hard one-hot read whose gradient pretends the read was relaxed.

    Forward copies the selected row(s) exactly; backward sends the full
    weighted-sum Jacobian into the relaxed weights and routes the incoming
    adjoint only into the selected row(s).
    """
    row_data = [r.data for r in rows]
    if relaxed.data.ndim == 1:
        hard_i = int(hard)
        out = Tensor(row_data[hard_i].copy())
        if _recording():

            def bwd(g):
                gw = np.array([float(g @ rd) for rd in row_data])
                grows = [None] * len(rows)
                grows[hard_i] = g
                return (gw, *grows)

            _record(out, (relaxed, *rows), bwd)
    else:
        idx = np.asarray(hard, dtype=np.int64)
        batch = relaxed.shape[0]
        gathered = np.empty((batch, row_data[0].shape[1]))
        for lane in range(batch):
            gathered[lane] = row_data[idx[lane]][lane]
        out = Tensor(gathered)
        if _recording():

            def bwd(g):
                gw = np.empty_like(relaxed.data)
                for i, rd in enumerate(row_data):
                    gw[:, i] = (g * rd).sum(axis=1)
                grows = []
                for i in range(len(rows)):
                    gr = np.zeros_like(g)
                    lanes = idx == i
                    gr[lanes] = g[lanes]
                    grows.append(gr)
                return (gw, *grows)

            _record(out, (relaxed, *rows), bwd)
    return out


def lane_where(lane_mask: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Per-lane select over the batch axis: mask 1 takes a, 0 keeps b."""
    _same_shape(a, b, "lane_where")
    m = lane_mask.astype(bool)
    out_data = b.data.copy()
    out_data[m] = a.data[m]
    out = Tensor(out_data)
    if _recording():

        def bwd(g):
            ga = np.zeros_like(g)
            ga[m] = g[m]
            gb = g.copy()
            gb[m] = 0.0
            return (ga, gb)

        _record(out, (a, b), bwd)
    return out
