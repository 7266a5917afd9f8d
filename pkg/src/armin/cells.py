"""ARMIN and LSTM recurrent cells over the autodiff tape.

The ARMIN step is split into four ops (two gate phases, state combine,
output combine) so each stage carries an independently testable contract.
All ops are shape-polymorphic over an optional leading batch axis: states
are [d] vectors for batch-1 sequence tasks and [B, d] for batched runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .tensor import Tensor, add, affine, concat, mul, sigmoid, split, tanh


def uniform_init(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(in_dim)
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


@dataclass
class ArminDims:
    d_i: int
    d_h: int
    d_r: int
    n_mem: int


@dataclass
class ArminParams:
    """All trainables of one ARMIN cell plus addressing and slot projection.

    W_ig/b_ig feed the two pre-gates over [x, h, r]; W_go/b_go produce the
    five gate blocks over [x, gated h, gated r]; W_s/b_s map [x, h] to slot
    logits; W_m projects the written state from d_h to d_r and is omitted
    when the two widths agree.
    """

    dims: ArminDims
    W_ig: Tensor
    b_ig: Tensor
    W_go: Tensor
    b_go: Tensor
    W_s: Tensor
    b_s: Tensor
    W_m: Tensor | None = None

    @classmethod
    def init(cls, dims: ArminDims, rng: np.random.Generator) -> "ArminParams":
        d_i, d_h, d_r = dims.d_i, dims.d_h, dims.d_r
        cat = d_i + d_h + d_r
        b_go = np.zeros(4 * d_h + d_r)
        b_go[d_h : 2 * d_h] = 1.0  # forget-gate block starts open
        return cls(
            dims=dims,
            W_ig=Tensor(uniform_init(rng, d_h + d_r, cat), name="W_ig"),
            b_ig=Tensor(np.zeros(d_h + d_r), name="b_ig"),
            W_go=Tensor(uniform_init(rng, 4 * d_h + d_r, cat), name="W_go"),
            b_go=Tensor(b_go, name="b_go"),
            W_s=Tensor(uniform_init(rng, dims.n_mem, d_i + d_h), name="W_s"),
            b_s=Tensor(np.zeros(dims.n_mem), name="b_s"),
            W_m=(
                Tensor(uniform_init(rng, d_r, d_h), name="W_m")
                if d_h != d_r
                else None
            ),
        )

    def named(self) -> dict[str, Tensor]:
        out = {
            "W_ig": self.W_ig,
            "b_ig": self.b_ig,
            "W_go": self.W_go,
            "b_go": self.b_go,
            "W_s": self.W_s,
            "b_s": self.b_s,
        }
        if self.W_m is not None:
            out["W_m"] = self.W_m
        return out


@dataclass
class ArminGates:
    g_h: Tensor
    g_r: Tensor
    i: Tensor
    f: Tensor
    g: Tensor
    o_h: Tensor
    o_r: Tensor


@dataclass
class LstmParams:
    """Fused-gate LSTM weights; gate block order is (i, f, g, o)."""

    d_i: int
    d_h: int
    W: Tensor = field(repr=False, default=None)
    b: Tensor = field(repr=False, default=None)

    @classmethod
    def init(cls, d_i: int, d_h: int, rng: np.random.Generator) -> "LstmParams":
        b = np.zeros(4 * d_h)
        b[d_h : 2 * d_h] = 1.0  # forget-gate block
        return cls(
            d_i=d_i,
            d_h=d_h,
            W=Tensor(uniform_init(rng, 4 * d_h, d_i + d_h), name="W"),
            b=Tensor(b, name="b"),
        )

    def named(self) -> dict[str, Tensor]:
        return {"W": self.W, "b": self.b}


def _check_widths(p: ArminParams, x: Tensor, h_prev: Tensor, r: Tensor) -> None:
    d = p.dims
    got = (x.shape[-1], h_prev.shape[-1], r.shape[-1])
    if got != (d.d_i, d.d_h, d.d_r):
        raise DimensionError(
            f"cell inputs {got} do not match dims (d_i={d.d_i}, d_h={d.d_h}, "
            f"d_r={d.d_r})"
        )


def armin_gates_phase1(x, h_prev, r, p: ArminParams):
    """[g_h; g_r] = sigmoid(W_ig @ [x, h_prev, r] + b_ig); gate both states."""
    _check_widths(p, x, h_prev, r)
    pre = affine(concat([x, h_prev, r], axis=-1), p.W_ig, p.b_ig)
    gates = sigmoid(pre)
    g_h, g_r = split(gates, [p.dims.d_h, p.dims.d_r], axis=-1)
    return g_h, g_r, mul(g_h, h_prev), mul(g_r, r)


def armin_gates_phase2(x, h_gated, r_gated, p: ArminParams):
    """Five gate blocks over [x, gated h, gated r]: sigmoid i, f, o_h, o_r and tanh g."""
    d_h, d_r = p.dims.d_h, p.dims.d_r
    pre = affine(concat([x, h_gated, r_gated], axis=-1), p.W_go, p.b_go)
    pre_i, pre_f, pre_g, pre_oh, pre_or = split(pre, [d_h, d_h, d_h, d_h, d_r], axis=-1)
    return (
        sigmoid(pre_i),
        sigmoid(pre_f),
        tanh(pre_g),
        sigmoid(pre_oh),
        sigmoid(pre_or),
    )


def state_combine(h_prev, f, i, g):
    """h_new = f * h_prev + i * g."""
    return add(mul(f, h_prev), mul(i, g))


def output_combine(h_new, r, o_h, o_r):
    """o = [o_h * tanh(h_new), o_r * tanh(r)]; tanh hits the ungated r."""
    return concat([mul(o_h, tanh(h_new)), mul(o_r, tanh(r))], axis=-1)


def armin_cell_forward(x, h_prev, r, p: ArminParams, want_gates: bool = False):
    """One full ARMIN step: (o, h_new), optionally with the gate bundle."""
    g_h, g_r, h_gated, r_gated = armin_gates_phase1(x, h_prev, r, p)
    i, f, g, o_h, o_r = armin_gates_phase2(x, h_gated, r_gated, p)
    h_new = state_combine(h_prev, f, i, g)
    o = output_combine(h_new, r, o_h, o_r)
    if want_gates:
        return o, h_new, ArminGates(g_h, g_r, i, f, g, o_h, o_r)
    return o, h_new


def lstm_cell_forward(x, h_prev, c_prev, p: LstmParams):
    """Standard fused-gate LSTM step: returns (h_new, c_new)."""
    d_h = p.d_h
    if x.shape[-1] != p.d_i or h_prev.shape[-1] != d_h or c_prev.shape[-1] != d_h:
        raise DimensionError(
            f"lstm inputs ({x.shape[-1]}, {h_prev.shape[-1]}, {c_prev.shape[-1]}) "
            f"do not match dims (d_i={p.d_i}, d_h={d_h})"
        )
    pre = affine(concat([x, h_prev], axis=-1), p.W, p.b)
    pre_i, pre_f, pre_g, pre_o = split(pre, [d_h, d_h, d_h, d_h], axis=-1)
    i, f, g, o = sigmoid(pre_i), sigmoid(pre_f), tanh(pre_g), sigmoid(pre_o)
    c_new = add(mul(f, c_prev), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new


def param_count(*groups) -> int:
    """Total scalar trainables across parameter groups (cell, head, ...)."""
    total = 0
    for group in groups:
        if group is None:
            continue
        for t in group.named().values():
            total += t.data.size
    return total
