import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from armin.cells import ArminDims, ArminParams
from armin.errors import ModeError, ParameterError, ProtocolError
from armin.memory import (
    AddressSample,
    DiscreteSlots,
    FrozenNoise,
    GumbelConfig,
    MemoryBank,
    ZeroNoise,
    address,
    anneal_tau,
    gumbel_noise,
    gumbel_softmax_sample,
    inference_bank,
    memory_read,
    memory_write,
)
from armin.tensor import Tape, Tensor, const, mul, sumall

DIMS = ArminDims(d_i=3, d_h=4, d_r=4, n_mem=5)


def params_with(rng, dims=DIMS):
    return ArminParams.init(dims, rng)


# ------------------------------------------------------------- gumbel noise

def test_gumbel_of_half():
    # -ln(ln 2) evaluated at high precision

    class Half:
        def random(self, k):
            return np.full(k, 0.5)

    got = gumbel_noise(3, Half())
    assert np.allclose(got, 0.36651292058166435, atol=1e-15)


def test_gumbel_clamp_keeps_draws_finite():
    class NearOne:
        def random(self, k):
            return np.ones(k)

    got = gumbel_noise(4, NearOne())
    assert np.all(np.isfinite(got))
    assert np.all(got > 27.0)


def test_gumbel_mean_near_euler_mascheroni():
    rng = np.random.default_rng(123)
    draws = gumbel_noise(1_000_000, rng)
    assert abs(draws.mean() - 0.5772156649) < 0.01


# ----------------------------------------------------------- gumbel softmax

def test_sample_symmetry():
    s = gumbel_softmax_sample(Tensor([0.0, 0.0]), 1.0, np.zeros(2), "soft")
    assert np.allclose(s.relaxed.data, [0.5, 0.5], atol=1e-15)


def test_sample_low_tau_is_one_hot():
    s = gumbel_softmax_sample(Tensor([2.0, 0.0]), 0.01, np.zeros(2), "soft")
    assert np.allclose(s.relaxed.data, [1.0, 0.0], atol=1e-8)
    assert s.hard_index == 0


def test_sample_tau_one_is_softmax():
    s = gumbel_softmax_sample(Tensor([2.0, 0.0]), 1.0, np.zeros(2), "soft")
    assert s.relaxed.data[0] == pytest.approx(0.8807970779778823, abs=1e-12)
    assert s.relaxed.data[1] == pytest.approx(0.11920292202211755, abs=1e-12)


def test_sample_rejects_bad_tau():
    with pytest.raises(ParameterError):
        gumbel_softmax_sample(Tensor([0.0]), 0.0, np.zeros(1), "soft")
    with pytest.raises(ParameterError):
        gumbel_softmax_sample(Tensor([0.0]), -1.0, np.zeros(1), "soft")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), tau=st.floats(0.05, 5.0))
def test_relaxed_sums_to_one_and_argmax_is_tau_invariant(seed, tau):
    rng = np.random.default_rng(seed)
    logits = Tensor(rng.uniform(-4, 4, size=6))
    noise = gumbel_noise(6, rng)
    s = gumbel_softmax_sample(logits, tau, noise, "soft")
    assert abs(s.relaxed.data.sum() - 1.0) <= 1e-10
    assert s.hard_index == int(np.argmax(logits.data + noise))
    assert s.hard_index == int(np.argmax(s.relaxed.data))


def test_argmax_mode_is_exact_one_hot():
    s = gumbel_softmax_sample(Tensor([0.3, 1.2, -2.0]), 1.0, np.zeros(3), "argmax")
    assert s.hard_index == 1
    assert np.array_equal(s.relaxed.data, [0.0, 1.0, 0.0])
    assert np.array_equal(s.noise, np.zeros(3))


# ---------------------------------------------------------------- addressing

def test_address_bias_dominates():
    rng = np.random.default_rng(0)
    p = params_with(rng)
    p.W_s.data[:] = 0.0
    p.b_s.data[:] = 0.0
    p.b_s.data[0] = 10.0
    s = address(Tensor(np.zeros(3)), Tensor(np.zeros(4)), p, 1.0, ZeroNoise(), "soft")
    assert s.hard_index == 0


def test_address_uniform_when_zero():
    rng = np.random.default_rng(1)
    p = params_with(rng)
    p.W_s.data[:] = 0.0
    p.b_s.data[:] = 0.0
    s = address(Tensor(np.zeros(3)), Tensor(np.zeros(4)), p, 1.0, ZeroNoise(), "soft")
    assert np.allclose(s.relaxed.data, 1.0 / DIMS.n_mem, atol=1e-15)


def test_address_logits_match_affine_loop_oracle():
    rng = np.random.default_rng(2)
    p = params_with(rng)
    x = rng.uniform(-1, 1, size=3)
    h = rng.uniform(-1, 1, size=4)
    s = address(Tensor(x), Tensor(h), p, 1.0, ZeroNoise(), "soft")
    cat = np.concatenate([x, h])
    want = np.array(
        [p.b_s.data[i] + sum(p.W_s.data[i, j] * cat[j] for j in range(7))
         for i in range(DIMS.n_mem)]
    )
    assert np.allclose(s.logits.data, want, rtol=1e-12, atol=1e-14)


# ------------------------------------------------------------------ reading

def _one_hot_sample(index, n, mode="soft"):
    relaxed = np.zeros(n)
    relaxed[index] = 1.0
    return AddressSample(
        logits=const(relaxed.copy()), noise=np.zeros(n),
        relaxed=const(relaxed), hard_index=index, mode=mode,
    )


def test_read_one_hot_selects_row():
    bank = MemoryBank(3, 4, mode="soft")
    rng = np.random.default_rng(3)
    for i in range(3):
        bank.rows[i] = Tensor(rng.standard_normal(4))
    bank.filled = 3
    got = memory_read(bank, _one_hot_sample(2, 3))
    assert np.allclose(got.data, bank.rows[2].data, atol=1e-15)
    assert bank.last_read == 2


def test_read_convex_combination():
    bank = MemoryBank(3, 2, mode="soft")
    bank.rows[0] = Tensor([2.0, 0.0])
    bank.rows[1] = Tensor([0.0, 4.0])
    bank.filled = 2
    sample = AddressSample(
        logits=const(np.zeros(3)), noise=np.zeros(3),
        relaxed=const([0.5, 0.5, 0.0]), hard_index=0, mode="soft",
    )
    got = memory_read(bank, sample)
    assert np.allclose(got.data, [1.0, 2.0], atol=1e-15)


def test_read_soft_matches_weighted_sum_oracle():
    rng = np.random.default_rng(4)
    bank = MemoryBank(5, 3, mode="soft")
    for i in range(5):
        bank.rows[i] = Tensor(rng.standard_normal(3))
    bank.filled = 5
    weights = rng.dirichlet(np.ones(5))
    sample = AddressSample(
        logits=const(np.zeros(5)), noise=np.zeros(5),
        relaxed=const(weights), hard_index=int(np.argmax(weights)), mode="soft",
    )
    got = memory_read(bank, sample)
    want = sum(weights[i] * bank.rows[i].data for i in range(5))
    assert np.allclose(got.data, want, rtol=1e-12, atol=1e-15)


def test_straight_through_read_value_and_gradient():
    rng = np.random.default_rng(5)
    bank = MemoryBank(4, 3, mode="straight_through")
    rows = [Tensor(rng.standard_normal(3)) for _ in range(4)]
    bank.rows = list(rows)
    bank.filled = 4
    logits = Tensor(rng.uniform(-1, 1, size=4))
    with Tape() as tape:
        s = gumbel_softmax_sample(logits, 0.8, np.zeros(4), "straight_through")
        r = memory_read(bank, s)
        wv = const(rng.uniform(-1, 1, size=3))
        loss = sumall(mul(r, wv))
    hard = s.hard_index
    assert np.array_equal(r.data, rows[hard].data)  # forward is the hard row
    grads = tape.backward(loss)
    # the selected row gets the adjoint; unselected rows get none
    assert np.allclose(grads[rows[hard]], wv.data)
    for i, row in enumerate(rows):
        if i != hard:
            assert grads.get(row) is None
    # relaxed weights see the full weighted-sum jacobian, so logits get grads
    assert grads.get(logits) is not None
    assert np.any(grads[logits] != 0.0)


# ------------------------------------------------------------------ writing

def test_write_fills_empty_slots_in_order():
    rng = np.random.default_rng(6)
    p = params_with(rng)  # d_h == d_r so writes store h directly
    bank = MemoryBank(3, 4, mode="soft")
    values = [Tensor(rng.standard_normal(4)) for _ in range(3)]
    for i, v in enumerate(values):
        memory_write(bank, v, p)
        assert bank.filled == i + 1
        for j in range(i + 1, 3):
            assert np.array_equal(bank.rows[j].data, np.zeros(4))
    for i in range(3):
        assert np.array_equal(bank.rows[i].data, values[i].data)


def test_write_overwrites_last_read_when_full():
    rng = np.random.default_rng(7)
    p = params_with(rng)
    bank = MemoryBank(3, 4, mode="soft")
    for _ in range(3):
        memory_write(bank, Tensor(rng.standard_normal(4)), p)
    before = [row.data.copy() for row in bank.rows]
    bank.last_read = 1
    v4 = Tensor(rng.standard_normal(4))
    memory_write(bank, v4, p)
    assert np.array_equal(bank.rows[1].data, v4.data)
    assert np.array_equal(bank.rows[0].data, before[0])
    assert np.array_equal(bank.rows[2].data, before[2])


def test_write_requires_read_when_full():
    rng = np.random.default_rng(8)
    p = params_with(rng)
    bank = MemoryBank(2, 4, mode="soft")
    memory_write(bank, Tensor(rng.standard_normal(4)), p)
    memory_write(bank, Tensor(rng.standard_normal(4)), p)
    with pytest.raises(ProtocolError):
        memory_write(bank, Tensor(rng.standard_normal(4)), p)


def test_write_projects_when_widths_differ():
    rng = np.random.default_rng(9)
    dims = ArminDims(d_i=3, d_h=4, d_r=2, n_mem=3)
    p = ArminParams.init(dims, rng)
    bank = MemoryBank(3, 2, mode="soft")
    h = Tensor(rng.standard_normal(4))
    memory_write(bank, h, p)
    assert np.allclose(bank.rows[0].data, p.W_m.data @ h.data, rtol=1e-12)


def test_200_random_events_match_list_simulator():
    rng = np.random.default_rng(10)
    p = params_with(rng)
    n_mem, width = DIMS.n_mem, DIMS.d_r
    bank = MemoryBank(n_mem, width, mode="soft")
    # independent brute-force simulator: a plain list of vectors
    sim = [np.zeros(width) for _ in range(n_mem)]
    sim_filled = 0
    sim_last = None
    for _ in range(200):
        idx = int(rng.integers(0, n_mem))
        got = memory_read(bank, _one_hot_sample(idx, n_mem))
        sim_last = idx
        assert np.array_equal(got.data, sim[idx])
        value = rng.standard_normal(width)
        memory_write(bank, Tensor(value.copy()), p)
        if sim_filled < n_mem:
            sim[sim_filled] = value
            sim_filled += 1
        else:
            sim[sim_last] = value
        assert bank.filled == sim_filled
        for j in range(n_mem):
            assert np.array_equal(bank.rows[j].data, sim[j])


# ------------------------------------------------------------ inference view

def test_inference_bank_requires_argmax_mode():
    with pytest.raises(ModeError):
        inference_bank(MemoryBank(3, 4, mode="soft"))


def test_inference_slots_read_write():
    slots = DiscreteSlots(3, 2)
    slots.write(np.array([1.0, 2.0]))
    slots.write(np.array([3.0, 4.0]))
    slots.write(np.array([5.0, 6.0]))
    got = slots.read(1)
    assert np.array_equal(got, [3.0, 4.0])
    slots.write(np.array([7.0, 8.0]))  # overwrites the slot just read
    assert np.array_equal(slots.slots[1], [7.0, 8.0])
    assert np.array_equal(slots.slots[0], [1.0, 2.0])


def test_inference_bank_shares_row_storage():
    bank = MemoryBank(3, 4, mode="argmax")
    rng = np.random.default_rng(11)
    bank.rows = [Tensor(rng.standard_normal(4)) for _ in range(3)]
    bank.filled = 3
    view = inference_bank(bank)
    got = view.read(2)
    assert got is bank.rows[2].data  # a reference, not a weighted sum


def test_write_read_identity_on_slot():
    # with one-hot addressing, read-after-write at an index returns the value
    slots = DiscreteSlots(2, 3)
    a = np.array([1.0, 1.5, -2.0])
    b = np.array([0.5, 0.0, 3.0])
    slots.write(a)
    slots.write(b)
    _ = slots.read(0)
    new = np.array([9.0, 9.0, 9.0])
    slots.write(new)
    assert slots.read(0) is new


# ------------------------------------------------------------------ schedule

def test_anneal_starts_at_max():
    cfg = GumbelConfig(1.0, 0.25, 1000)
    assert anneal_tau(cfg, 0) == 1.0


def test_anneal_floors_at_min():
    cfg = GumbelConfig(1.0, 0.25, 1000)
    assert anneal_tau(cfg, 1000) == pytest.approx(0.25, abs=1e-12)
    assert anneal_tau(cfg, 5000) == 0.25


def test_anneal_midpoint():
    cfg = GumbelConfig(1.0, 0.25, 1000)
    assert anneal_tau(cfg, 500) == pytest.approx(0.5, abs=1e-12)


def test_gumbel_config_validation():
    with pytest.raises(ParameterError):
        GumbelConfig(0.1, 0.25, 100)
    with pytest.raises(ParameterError):
        GumbelConfig(1.0, 0.0, 100)


# -------------------------------------------------------------- grad through W_s

def test_soft_addressing_gives_ws_nonzero_gradient():
    rng = np.random.default_rng(12)
    dims = ArminDims(d_i=2, d_h=3, d_r=3, n_mem=4)
    p = ArminParams.init(dims, rng)
    bank = MemoryBank(4, 3, mode="soft")
    # distinct slot contents so the address actually matters
    bank.rows = [Tensor(rng.standard_normal(3)) for _ in range(4)]
    bank.filled = 4
    x = Tensor(rng.uniform(-1, 1, size=2))
    h = Tensor(rng.uniform(-1, 1, size=3))
    noise = FrozenNoise.capture(rng, (4,), 1)
    with Tape() as tape:
        s = address(x, h, p, 0.7, noise, "soft")
        r = memory_read(bank, s)
        loss = sumall(mul(r, r))
    grads = tape.backward(loss)
    assert grads.get(p.W_s) is not None
    assert np.any(grads[p.W_s] != 0.0)
