import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowcast.autodiff import (
    ContractError, ShapeError, Tape, Tensor, check_gradients, mae_loss, mul, numeric_grad,
    relative_error, sum_,
)
from flowcast.data import (
    FUTURE_STEPS, NormStats, StationMeta, StationSeries, assemble_windows, unify_arrays,
)
from flowcast.models import (
    DivergenceError, ForecasterConfig, GRUCellParams, LSTMCellParams, PersistenceForecaster,
    TransformerParams, build_model, gru_cell_step, load_model, lstm_cell_step,
    multi_head_attention, persistence_forecast, recurrent_forecast, seq2seq_forecast, train,
    transformer_forward,
)
from flowcast.models.base import const_init, uniform_init

T0 = np.datetime64("2015-01-01T00", "h")
GRAD_TOL = 1e-4


def random_projection(out, seed=1):
    """Scalar ``sum(out * R)``; smooth, so finite differences are clean."""
    R = Tensor(np.random.default_rng(seed).standard_normal(out.shape))
    return sum_(mul(out, R))


def assert_grads(f, tensors, points=10, seed=0):
    errs = check_gradients(f, tensors, h=1e-5, max_coords=points,
                           rng=np.random.default_rng(seed))
    assert max(errs.values()) < GRAD_TOL, errs


def windows(n_hours=400, seed=0, stride=4, sid="S1"):
    rng = np.random.default_rng(seed)
    s = StationSeries(sid, T0, rng.exponential(1.0, n_hours), rng.uniform(0, 1, n_hours),
                      5 + np.cumsum(rng.normal(0, 0.1, n_hours)).clip(-4, None))
    m = StationMeta(sid, 100.0, 12.0, 0.01, 0.3, 0.2, 0.1, 0.2)
    q = s.discharge
    stats = NormStats({sid: float(q.mean())}, {sid: float(q.std())}, 1.0, 1.0, 0.5, 0.3,
                      np.zeros(7), np.full(7, 200.0))
    return assemble_windows(s, m, stats, s.span, stride), stats


# ---------------------------------------------------------------- analytic cells

@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 10_000))
def test_zero_parameter_lstm(n_in, hidden, seed):
    rng = np.random.default_rng(seed)
    x, h, c = rng.normal(size=n_in), rng.normal(size=hidden), rng.normal(size=hidden) * 3
    h1, c1 = lstm_cell_step(LSTMCellParams.zeros(n_in, hidden), x, h, c)
    assert np.max(np.abs(c1.data - 0.5 * c)) <= 1e-15
    assert np.max(np.abs(h1.data - 0.5 * np.tanh(0.5 * c))) <= 1e-15


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 10_000))
def test_zero_parameter_gru(n_in, hidden, seed):
    rng = np.random.default_rng(seed)
    x, h = rng.normal(size=n_in), rng.normal(size=hidden) * 3
    h1 = gru_cell_step(GRUCellParams.zeros(n_in, hidden), x, h)
    assert np.max(np.abs(h1.data - 0.5 * h)) <= 1e-15


def test_cell_shape_mismatch():
    p = LSTMCellParams.zeros(10, 4)
    with pytest.raises(ShapeError):
        lstm_cell_step(p, np.zeros(9), np.zeros(4), np.zeros(4))
    with pytest.raises(ShapeError):
        gru_cell_step(GRUCellParams.zeros(10, 4), np.zeros(10), np.zeros(5))


def test_lstm_cell_against_plain_numpy():
    rng = np.random.default_rng(3)
    p = LSTMCellParams.init(rng, 5, 6)
    x, h, c = rng.normal(size=5), rng.normal(size=6), rng.normal(size=6)
    sig = lambda z: 1 / (1 + np.exp(-z))  # noqa: E731
    g = {k: x @ getattr(p, f"W_{k}").data + h @ getattr(p, f"U_{k}").data
         + getattr(p, f"b_{k}").data for k in "ifoc"}
    c_ref = sig(g["f"]) * c + sig(g["i"]) * np.tanh(g["c"])
    h_ref = sig(g["o"]) * np.tanh(c_ref)
    h1, c1 = lstm_cell_step(p, x, h, c)
    np.testing.assert_allclose(c1.data, c_ref, rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(h1.data, h_ref, rtol=1e-13, atol=1e-14)


def test_gru_cell_against_plain_numpy():
    rng = np.random.default_rng(4)
    p = GRUCellParams.init(rng, 5, 6)
    x, h = rng.normal(size=5), rng.normal(size=6)
    sig = lambda z: 1 / (1 + np.exp(-z))  # noqa: E731
    z = sig(x @ p.W_z.data + h @ p.U_z.data + p.b_z.data)
    r = sig(x @ p.W_r.data + h @ p.U_r.data + p.b_r.data)
    cand = np.tanh(x @ p.W_h.data + (r * h) @ p.U_h.data + p.b_h.data)
    np.testing.assert_allclose(gru_cell_step(p, x, h).data, (1 - z) * h + z * cand,
                               rtol=1e-13, atol=1e-14)


def test_lstm_forget_bias_starts_at_one():
    p = LSTMCellParams.init(np.random.default_rng(0), 10, 8)
    assert np.all(p.b_f.data == 1.0) and np.all(p.b_i.data == 0.0)
    assert np.all(np.abs(p.W_i.data) <= 1 / np.sqrt(10))


# ---------------------------------------------------------------- gradient checks

def test_grad_lstm_cell():
    rng = np.random.default_rng(10)
    p = LSTMCellParams.init(rng, 5, 4)
    x = Tensor(rng.normal(size=(3, 5)), requires_grad=True, name="x")
    h = Tensor(rng.normal(size=(3, 4)), requires_grad=True, name="h")
    c = Tensor(rng.normal(size=(3, 4)), requires_grad=True, name="c")

    def f():
        h1, c1 = lstm_cell_step(p, x, h, c)
        return sum_(mul(h1, c1))
    assert_grads(f, [x, h, c] + list(p.named().values()))


def test_grad_gru_cell():
    rng = np.random.default_rng(11)
    p = GRUCellParams.init(rng, 5, 4)
    x = Tensor(rng.normal(size=(3, 5)), requires_grad=True, name="x")
    h = Tensor(rng.normal(size=(3, 4)), requires_grad=True, name="h")
    assert_grads(lambda: random_projection(gru_cell_step(p, x, h)),
                 [x, h] + list(p.named().values()))


@pytest.mark.parametrize("arch", ["lstm", "gru"])
def test_grad_unrolled_five_steps(arch):
    rng = np.random.default_rng(12)
    cell = (LSTMCellParams if arch == "lstm" else GRUCellParams).init(rng, 4, 5)
    hw, hb = uniform_init(rng, (5, 1), 5, "head.w"), const_init((1,), 0.1, "head.b")
    U = Tensor(rng.normal(size=(2, 5, 4)), requires_grad=True, name="U")
    f = lambda: random_projection(recurrent_forecast(arch, cell, hw, hb, U, horizon=3))  # noqa: E731
    assert_grads(f, [U, hw, hb] + list(cell.named().values()))


def test_grad_seq2seq():
    rng = np.random.default_rng(13)
    enc, dec = GRUCellParams.init(rng, 10, 6), GRUCellParams.init(rng, 9, 6)
    dw, db = uniform_init(rng, (6, 5), 6, "dense.w"), const_init((5,), 0.0, "dense.b")
    ow, ob = uniform_init(rng, (5, 1), 5, "head.w"), const_init((1,), 0.0, "head.b")
    past = Tensor(rng.normal(size=(2, 72, 10)), requires_grad=True, name="past")
    future = Tensor(rng.normal(size=(2, 120, 9)), requires_grad=True, name="future")
    f = lambda: random_projection(seq2seq_forecast(enc, dec, dw, db, ow, ob, past, future))  # noqa: E731
    assert_grads(f, [future, dw, db, ow, ob] + list(enc.named().values())
                 + list(dec.named().values()))
    # early past steps reach the output through ~190 contractions (|grad| ~ 1e-19,
    # below what differences can resolve), so sample the past from its last 8 rows
    past.zero_grad()
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    rng = np.random.default_rng(0)
    rows, cols = rng.integers(0, 2, 10), rng.integers(0, 10, 10)
    steps = rng.integers(64, 72, 10)
    coords = np.ravel_multi_index((rows, steps, cols), past.shape)
    analytic = past.grad.reshape(-1)[coords]
    assert relative_error(analytic, numeric_grad(f, past, coords)) < GRAD_TOL


def small_transformer(seed=0, D=16, heads=4, T=192):
    return TransformerParams.init(np.random.default_rng(seed), 10, D, heads, 32, seq_len=T)


def test_grad_multi_head_attention():
    p = small_transformer(1, T=7)
    X = Tensor(np.random.default_rng(2).normal(size=(2, 7, 16)), requires_grad=True, name="X")
    attn = [p.wq, p.bq, p.wk, p.wv, p.bv, p.wo, p.bo]
    f = lambda: random_projection(multi_head_attention(p, X))  # noqa: E731
    assert_grads(f, [X] + attn)
    # a key bias shifts every score in a row by q.b_k, which softmax ignores,
    # so its true gradient is zero and a relative error is meaningless
    check_gradients(f, [p.bk])
    assert np.max(np.abs(p.bk.grad)) < 1e-12
    assert np.max(np.abs(numeric_grad(f, p.bk))) < 1e-8


def test_grad_attention_with_query_slice():
    p = small_transformer(1, T=9)
    X = Tensor(np.random.default_rng(2).normal(size=(2, 9, 16)), requires_grad=True, name="X")
    assert_grads(lambda: random_projection(multi_head_attention(p, X, query_start=4)),
                 [X, p.wq, p.wk, p.wv])


def test_grad_full_transformer_mae():
    # default width, full 192-step input, two samples, MAE against distant targets
    rng = np.random.default_rng(5)
    p = TransformerParams.init(rng)
    U = Tensor(rng.normal(size=(2, 192, 10)), requires_grad=True, name="U")
    target = Tensor(rng.normal(size=(2, 120)) + 5.0)
    f = lambda: mae_loss(transformer_forward(p, U), target)  # noqa: E731
    assert_grads(f, [U] + list(p.named().values()))


# ---------------------------------------------------------------- attention invariants

def test_attention_rows_sum_to_one():
    p = small_transformer(3, T=20)
    X = np.random.default_rng(4).normal(size=(3, 20, 16)) * 3
    _, w = multi_head_attention(p, X, return_weights=True)
    assert w.shape == (3, 4, 20, 20)
    assert np.max(np.abs(w.sum(axis=-1) - 1.0)) < 1e-9
    assert np.all(w >= 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 24), st.integers(0, 10_000))
def test_attention_permutation_equivariant(T, seed):
    rng = np.random.default_rng(seed)
    p = small_transformer(seed % 97, T=T)
    X = rng.normal(size=(T, 16))
    perm = rng.permutation(T)
    out = multi_head_attention(p, X).data
    out_perm = multi_head_attention(p, X[perm]).data
    assert np.max(np.abs(out_perm - out[perm])) < 1e-10


def test_length_one_returns_projected_value():
    p = small_transformer(6, T=1)
    x = np.random.default_rng(7).normal(size=(1, 16))
    expected = (x @ p.wv.data + p.bv.data) @ p.wo.data + p.bo.data
    out = multi_head_attention(p, x).data
    assert np.array_equal(out, expected)


def test_zero_keys_give_uniform_weights():
    p = small_transformer(8, T=10)
    p.wk.data[...] = 0.0
    p.bk.data[...] = 0.0
    _, w = multi_head_attention(p, np.random.default_rng(9).normal(size=(10, 16)),
                                return_weights=True)
    np.testing.assert_allclose(w, 0.1, rtol=0, atol=1e-15)


def test_query_slice_matches_full_rows():
    p = small_transformer(2, T=30)
    X = np.random.default_rng(3).normal(size=(2, 30, 16))
    full = multi_head_attention(p, X).data
    tail = multi_head_attention(p, X, query_start=18).data
    np.testing.assert_allclose(tail, full[:, 18:], rtol=0, atol=1e-13)


def test_transformer_batch_independence():
    p = small_transformer(4)
    U = np.random.default_rng(5).normal(size=(3, 192, 10))
    together = transformer_forward(p, U).data
    for i in range(3):
        alone = transformer_forward(p, U[i:i + 1]).data
        assert np.max(np.abs(alone[0] - together[i])) < 1e-12


def test_transformer_rejects_wrong_length():
    with pytest.raises(ShapeError):
        transformer_forward(small_transformer(0), np.zeros((1, 191, 10)))
    with pytest.raises(ShapeError):
        TransformerParams.init(np.random.default_rng(0), 10, 30, 8, 32)


# ---------------------------------------------------------------- forecasters

@pytest.mark.parametrize("arch", ["lstm", "gru", "seq2seq", "transformer"])
def test_forecaster_output_shape_and_checkpoint(arch, tmp_path):
    w, stats = windows(stride=30)
    model = build_model(ForecasterConfig(arch, hidden_size=8, d_model=16, heads=4,
                                         ffn_dim=32, seed=3))
    pred = model.predict(w)
    assert pred.shape == (len(w), FUTURE_STEPS) and np.all(np.isfinite(pred))
    model.save(tmp_path / "m.ckpt", extra_meta={"note": "x"})
    again, meta = load_model(tmp_path / "m.ckpt")
    assert meta["extra"] == {"note": "x"}
    assert np.array_equal(again.predict(w), pred)
    assert again.config.policy == model.config.policy


def test_seeded_init_is_reproducible():
    a = build_model(ForecasterConfig("transformer", seed=9)).state_dict()
    b = build_model(ForecasterConfig("transformer", seed=9)).state_dict()
    c = build_model(ForecasterConfig("transformer", seed=10)).state_dict()
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert not np.array_equal(a["attn.wq"], c["attn.wq"])


def test_default_policies():
    assert ForecasterConfig("transformer").policy == "persistence"
    assert ForecasterConfig("lstm").policy == "zero_pad"
    assert ForecasterConfig("gru", policy="persistence").policy == "persistence"


def test_policy_changes_recurrent_input():
    w, _ = windows(stride=50)
    a = build_model(ForecasterConfig("gru", hidden_size=4, policy="zero_pad"))
    b = build_model(ForecasterConfig("gru", hidden_size=4, policy="persistence"))
    assert not np.array_equal(a.predict(w), b.predict(w))
    U = unify_arrays(w.past, w.future, "zero_pad")
    np.testing.assert_array_equal(a.predict(w), recurrent_forecast(
        "gru", a.cell, a.head_w, a.head_b, U).data)


def test_seq2seq_decoder_sees_encoder_state():
    w, _ = windows(stride=50)
    model = build_model(ForecasterConfig("seq2seq", hidden_size=8, seed=1))
    base = model.predict(w)
    past = w.past.copy()
    past[:, :, 2] += 1.0     # only the past discharge changes
    moved = model.forward(past, w.future).data
    assert np.all(np.abs(moved - base).max(axis=1) > 0)


def test_persistence_repeats_last_discharge():
    w, stats = windows(stride=25)
    np.testing.assert_array_equal(persistence_forecast(w),
                                  np.repeat(w.last_discharge[:, None], 120, axis=1))
    model = PersistenceForecaster()
    assert model.n_parameters() == 0
    np.testing.assert_array_equal(model.predict_physical(w), persistence_forecast(w))
    assert np.all(persistence_forecast(w[0]) == w.last_discharge[0])


def test_physical_predictions_denormalize():
    w, stats = windows(stride=25)
    model = build_model(ForecasterConfig("gru", hidden_size=4))
    z = model.predict(w)
    np.testing.assert_allclose(model.predict_physical(w, stats),
                               stats.denormalize_discharge("S1", z), rtol=1e-15)


# ---------------------------------------------------------------- training loop

def tiny_config(**kw):
    base = dict(arch="gru", hidden_size=4, batch_size=16, lr=1e-3, max_epochs=3, seed=2)
    base.update(kw)
    return ForecasterConfig(**base)


def test_training_is_deterministic():
    tr, _ = windows(seed=1, stride=6)
    va, _ = windows(seed=2, stride=12)
    runs = []
    for _ in range(2):
        model = build_model(tiny_config())
        res = train(model, tr, va)
        runs.append((model.state_dict(), [(r.train_mae, r.val_mae) for r in res.log]))
    assert runs[0][1] == runs[1][1]
    assert all(np.array_equal(runs[0][0][k], runs[1][0][k]) for k in runs[0][0])


def test_training_lowers_loss_and_restores_best():
    tr, _ = windows(seed=1, stride=6)
    model = build_model(tiny_config(max_epochs=6, lr=3e-3))
    res = train(model, tr, tr)
    assert res.log[-1].train_mae < res.log[0].train_mae
    best = min(r.val_mae for r in res.log)
    assert res.best_val_mae == best
    assert res.log[res.best_epoch - 1].val_mae == best
    pred = model.predict(tr)
    assert float(np.mean(np.abs(pred - tr.target_norm))) == pytest.approx(best, abs=1e-12)


def test_fabricated_plateau_schedule():
    tr, _ = windows(seed=1, stride=40)
    # one improvement, then flat forever
    seq = lambda e: 1.0 if e == 1 else 1.0 + 1e-3  # noqa: E731
    res = train(build_model(tiny_config(max_epochs=100)), tr, tr, validate=seq)
    lrs = [r.lr for r in res.log]
    assert lrs[:11] == [1e-3] * 11
    assert lrs[11] == 5e-4
    assert res.stopped_early and res.epochs_run == 21 and res.best_epoch == 1


def test_divergence_is_reported():
    tr, _ = windows(seed=1, stride=40)
    with pytest.raises(DivergenceError):
        train(build_model(tiny_config()), tr, tr, validate=lambda e: float("nan"))


def test_empty_training_set_rejected():
    tr, _ = windows(seed=1, stride=40)
    with pytest.raises(ContractError):
        train(build_model(tiny_config()), tr[:0], tr)
