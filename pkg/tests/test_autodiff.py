import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flowcast.autodiff import (
    Adam, CheckpointError, ContractError, EarlyStopper, PlateauScheduler, ShapeError, Tape,
    Tensor, add, backward, check_gradients, concat, gelu, getitem, layer_norm,
    load_checkpoint, mae_loss, matmul, mean, mul, reshape, save_checkpoint, scale, sigmoid,
    softmax, split, stack, sub, sum_, tanh, transpose, unbind,
)

H = 1e-5
TOL = 1e-4
N_POINTS = 10


def leaf(rng, *shape, name=None):
    return Tensor(rng.normal(size=shape), requires_grad=True, name=name)


def assert_grads(f, tensors, rng, points=N_POINTS):
    errs = check_gradients(f, tensors, h=H, max_coords=points, rng=rng)
    for name, err in errs.items():
        assert err < TOL, (name, err)


# ---------------------------------------------------------------- tape mechanics

def test_leaf_gradient_of_product():
    x = Tensor([2.0, 3.0], requires_grad=True)
    y = Tensor([5.0, 7.0], requires_grad=True)
    with Tape() as tape:
        loss = sum_(mul(x, y))
    tape.backward(loss)
    np.testing.assert_array_equal(x.grad, [5.0, 7.0])
    np.testing.assert_array_equal(y.grad, [2.0, 3.0])


def test_gradients_accumulate_until_zeroed():
    x = Tensor([1.0, -2.0], requires_grad=True)
    for _ in range(2):
        with Tape() as tape:
            loss = sum_(scale(x, 3.0))
        tape.backward(loss)
    np.testing.assert_array_equal(x.grad, [6.0, 6.0])
    x.zero_grad()
    np.testing.assert_array_equal(x.grad, [0.0, 0.0])


def test_shared_subexpression_sums_both_paths():
    x = Tensor(np.array([0.3, -1.2]), requires_grad=True)
    with Tape() as tape:
        y = tanh(x)
        loss = sum_(add(mul(y, y), y))
    tape.backward(loss)
    t = np.tanh(x.data)
    np.testing.assert_allclose(x.grad, (2 * t + 1) * (1 - t * t), rtol=1e-14)


def test_non_scalar_loss_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = scale(x, 2.0)
    with pytest.raises(ContractError):
        backward(y, tape)


def test_untracked_loss_rejected():
    with Tape() as tape:
        loss = sum_(Tensor(np.ones(3)))
    with pytest.raises(ContractError):
        tape.backward(loss)


def test_no_tape_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    y = sum_(mul(x, x))
    assert y.data == 3.0
    with Tape() as tape:
        pass
    assert len(tape) == 0


def test_only_leaves_keep_grad():
    x = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape:
        y = scale(x, 2.0)
        loss = sum_(y)
    tape.backward(loss)
    assert y.grad is None
    np.testing.assert_array_equal(x.grad, [2.0, 2.0])


def test_shape_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(ShapeError):
        matmul(leaf(rng, 2, 3), leaf(rng, 2, 3))
    with pytest.raises(ShapeError):
        add(leaf(rng, 2, 3), leaf(rng, 4))
    with pytest.raises(ShapeError):
        mae_loss(leaf(rng, 3), leaf(rng, 4))
    with pytest.raises(ShapeError):
        split(leaf(rng, 5), 2)


# ---------------------------------------------------------------- primitive gradients

def test_grad_matmul_2d():
    rng = np.random.default_rng(1)
    a, b = leaf(rng, 4, 5), leaf(rng, 5, 3)
    assert_grads(lambda: sum_(mul(matmul(a, b), matmul(a, b))), [a, b], rng)


def test_grad_matmul_batched_with_weight():
    rng = np.random.default_rng(2)
    a, w = leaf(rng, 2, 3, 4), leaf(rng, 4, 5)
    c = Tensor(rng.normal(size=(2, 3, 5)))
    assert_grads(lambda: sum_(mul(matmul(a, w), c)), [a, w], rng)


def test_grad_matmul_batched_both():
    rng = np.random.default_rng(3)
    a, b = leaf(rng, 2, 3, 4, 5), leaf(rng, 2, 3, 5, 2)
    c = Tensor(rng.normal(size=(2, 3, 4, 2)))
    assert_grads(lambda: sum_(mul(matmul(a, b), c)), [a, b], rng)


@pytest.mark.parametrize("fn", [sigmoid, tanh, gelu], ids=["sigmoid", "tanh", "gelu"])
def test_grad_unary(fn):
    rng = np.random.default_rng(4)
    x = leaf(rng, 6, 5)
    c = Tensor(rng.normal(size=(6, 5)))
    assert_grads(lambda: sum_(mul(fn(x), c)), [x], rng)


def test_grad_softmax():
    rng = np.random.default_rng(5)
    x = leaf(rng, 3, 4, 7)
    c = Tensor(rng.normal(size=(3, 4, 7)))
    assert_grads(lambda: sum_(mul(softmax(x, axis=-1), c)), [x], rng)
    assert_grads(lambda: sum_(mul(softmax(x, axis=1), c)), [x], rng)


def test_grad_layer_norm():
    rng = np.random.default_rng(6)
    x, g, b = leaf(rng, 3, 4, 6), leaf(rng, 6), leaf(rng, 6)
    c = Tensor(rng.normal(size=(3, 4, 6)))
    assert_grads(lambda: sum_(mul(layer_norm(x, g, b), c)), [x, g, b], rng)


def test_grad_mae():
    rng = np.random.default_rng(7)
    p = leaf(rng, 5, 6)
    y = Tensor(p.data + rng.choice([-1.0, 1.0], size=(5, 6)) * rng.uniform(0.1, 1.0, (5, 6)))
    assert_grads(lambda: mae_loss(p, y), [p], rng)


def test_mae_tie_subgradient_is_zero():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    with Tape() as tape:
        loss = mae_loss(p, Tensor(np.array([1.0, 3.0])))
    tape.backward(loss)
    np.testing.assert_array_equal(p.grad, [0.0, -0.5])


def test_grad_broadcast_arithmetic():
    rng = np.random.default_rng(8)
    a, b = leaf(rng, 3, 4), leaf(rng, 4)
    assert_grads(lambda: sum_(mul(sub(a, b), add(a, b))), [a, b], rng)


def test_grad_shape_plumbing():
    rng = np.random.default_rng(9)
    x = leaf(rng, 2, 3, 4)
    c = Tensor(rng.normal(size=(4, 3, 2)))

    def f():
        t = transpose(x, (2, 1, 0))
        r = reshape(t, (4, 6))
        return sum_(mul(reshape(r, (4, 3, 2)), c))

    assert_grads(f, [x], rng)


def test_grad_getitem_basic_and_advanced():
    rng = np.random.default_rng(10)
    x = leaf(rng, 5, 4)
    assert_grads(lambda: sum_(mul(getitem(x, (slice(1, 4), slice(None))),
                                  getitem(x, (slice(1, 4), slice(None))))), [x], rng)
    idx = np.array([0, 2, 2, 4])
    assert_grads(lambda: sum_(mul(getitem(x, idx), getitem(x, idx))), [x], rng)


def test_grad_split_unbind_stack_concat():
    rng = np.random.default_rng(11)
    x = leaf(rng, 3, 6)

    def f():
        a, b, c = split(x, 3, axis=1)
        rows = unbind(x, axis=0)
        s = stack([rows[2], rows[0], rows[1]], axis=0)
        return add(sum_(mul(concat([c, a], axis=1), s[:, :4])), sum_(mul(b, b)))

    assert_grads(f, [x], rng)


def test_grad_mean():
    rng = np.random.default_rng(12)
    x = leaf(rng, 4, 3)
    assert_grads(lambda: mean(mul(x, x)), [x], rng)


def test_unused_split_output_gets_zero_grad():
    x = Tensor(np.arange(4.0), requires_grad=True)
    with Tape() as tape:
        a, _ = split(x, 2)
        loss = sum_(a)
    tape.backward(loss)
    np.testing.assert_array_equal(x.grad, [1.0, 1.0, 0.0, 0.0])


# ---------------------------------------------------------------- properties

finite = st.floats(-30, 30, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 9)), elements=finite))
def test_softmax_rows_sum_to_one(x):
    y = softmax(Tensor(x), axis=-1).data
    assert np.all(y >= 0)
    np.testing.assert_allclose(y.sum(axis=-1), 1.0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 9)), elements=finite))
def test_layer_norm_standardizes(x):
    d = x.shape[-1]
    y = layer_norm(Tensor(x), Tensor(np.ones(d)), Tensor(np.zeros(d))).data
    np.testing.assert_allclose(y.mean(axis=-1), 0.0, atol=1e-9)
    assert np.all(y.var(axis=-1) <= 1.0 + 1e-9)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(1, 20), elements=finite))
def test_sigmoid_stable_and_bounded(x):
    y = sigmoid(Tensor(x * 30)).data
    assert np.all(np.isfinite(y)) and np.all((y >= 0) & (y <= 1))
    np.testing.assert_allclose(y + sigmoid(Tensor(-x * 30)).data, 1.0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5))
def test_broadcast_add_grad_is_sum_over_broadcast_axes(n, m):
    a = Tensor(np.zeros((n, m)), requires_grad=True)
    b = Tensor(np.zeros(m), requires_grad=True)
    with Tape() as tape:
        loss = sum_(add(a, b))
    tape.backward(loss)
    np.testing.assert_array_equal(b.grad, np.full(m, float(n)))


# ---------------------------------------------------------------- optimizer, scheduler, stopping

def test_adam_first_step_matches_hand_computation():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    opt = Adam({"p": p}, lr=0.1)
    p.grad[...] = [0.5, -4.0]
    opt.step()
    # bias-corrected m/v give g/|g| on the first step
    expected = np.array([1.0, -2.0]) - 0.1 * np.array([0.5, -4.0]) / (
        np.abs([0.5, -4.0]) + 1e-8)
    np.testing.assert_allclose(p.data, expected, rtol=1e-15)


def test_adam_second_step_matches_reference_recursion():
    p = Tensor(np.array([0.3]), requires_grad=True)
    opt = Adam({"p": p}, lr=0.01)
    g1, g2 = 2.0, -1.0
    m = v = 0.0
    x = 0.3
    for t, g in enumerate((g1, g2), start=1):
        p.grad[...] = g
        opt.step()
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        x -= 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    assert p.data[0] == pytest.approx(x, rel=1e-14)


def test_adam_minimizes_quadratic():
    p = Tensor(np.array([3.0, -4.0]), requires_grad=True)
    opt = Adam({"p": p}, lr=0.05)
    for _ in range(2000):
        opt.zero_grad()
        with Tape() as tape:
            loss = sum_(mul(p, p))
        tape.backward(loss)
        opt.step()
    assert np.all(np.abs(p.data) < 1e-3)


def test_adam_missing_grad_is_contract_error():
    opt = Adam({"p": Tensor(np.ones(2))})
    with pytest.raises(ContractError):
        opt.step()


def test_scheduler_halves_after_ten_stale_epochs():
    sched = PlateauScheduler(1e-4, patience=10, factor=0.5)
    lrs = [sched.step(m) for m in [1.0] + [1.0] * 10 + [1.0] * 10]
    assert lrs[:10] == [1e-4] * 10
    assert lrs[10] == 5e-5           # tenth stale epoch
    assert lrs[11:20] == [5e-5] * 9
    assert lrs[20] == 2.5e-5


def test_scheduler_resets_on_strict_improvement_only():
    sched = PlateauScheduler(1.0, patience=3, factor=0.5)
    for m in [5.0, 5.0, 5.0, 4.0, 4.0, 4.0]:
        lr = sched.step(m)
    assert lr == 1.0
    assert sched.step(4.0) == 0.5


def test_scheduler_min_lr_floor():
    sched = PlateauScheduler(4e-6, patience=1, factor=0.5, min_lr=1e-6)
    sched.step(1.0)
    lrs = [sched.step(1.0) for _ in range(5)]
    assert lrs == [2e-6, 1e-6, 1e-6, 1e-6, 1e-6]


def test_early_stop_fires_after_twenty_stale_epochs():
    stop = EarlyStopper(patience=20)
    flags = [stop.step(m) for m in [3.0, 2.0] + [2.0] * 25]
    first = flags.index(True)
    assert first == 1 + 20          # best at index 1, twentieth stale epoch at index 21


# ---------------------------------------------------------------- checkpoints

def test_checkpoint_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    params = {"w": rng.normal(size=(3, 4)), "b": rng.normal(size=4), "s": np.array(1e-300)}
    meta = {"arch": "x", "nested": {"k": [1, 2]}}
    path = save_checkpoint(tmp_path / "m.ckpt", params, meta)
    loaded, meta2 = load_checkpoint(path)
    assert meta2 == meta
    for k in params:
        assert loaded[k].shape == params[k].shape
        assert np.array_equal(loaded[k], params[k])


def test_checkpoint_bytes_are_deterministic(tmp_path):
    params = {"b": np.arange(3.0), "a": np.eye(2)}
    save_checkpoint(tmp_path / "1.ckpt", params, {"z": 1, "a": 2})
    save_checkpoint(tmp_path / "2.ckpt", params, {"a": 2, "z": 1})
    assert (tmp_path / "1.ckpt").read_bytes() == (tmp_path / "2.ckpt").read_bytes()


def test_checkpoint_rejects_foreign_file(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a checkpoint\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
