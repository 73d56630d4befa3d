"""Gradient and contract tests for the reverse-mode engine."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alphagraph import autodiff as ad
from alphagraph import nn
from alphagraph.autodiff import Tape, Tensor, gradient_check
from alphagraph.errors import ConfigError, NumericalFault, ShapeError


def t(values, grad=True):
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=grad)


# ---------------------------------------------------------------------------
# Forward-value examples
# ---------------------------------------------------------------------------

def test_relu_definition():
    out = ad.relu(t([-1.0, 0.0, 2.0]))
    assert np.array_equal(out.values, [0.0, 0.0, 2.0])


def test_softmax_uniform_on_zero_vector():
    out = ad.softmax(t(np.zeros(4)))
    assert np.allclose(out.values, 0.25, atol=1e-15)


def test_softmax_sums_to_one_and_shift_invariant():
    x = np.array([0.3, -1.2, 2.5, 0.0])
    a = ad.softmax(t(x)).values
    b = ad.softmax(t(x + 17.3)).values
    assert abs(a.sum() - 1.0) <= 1e-12
    assert np.allclose(a, b, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=2, max_size=8),
       st.floats(-50, 50))
def test_softmax_shift_invariance_property(xs, shift):
    x = np.asarray(xs)
    a = ad.softmax(t(x)).values
    b = ad.softmax(t(x + shift)).values
    assert abs(a.sum() - 1.0) <= 1e-12
    assert np.allclose(a, b, atol=1e-12)


def test_sigmoid_extreme_inputs_no_overflow():
    out = ad.sigmoid(t([-1000.0, 0.0, 1000.0]))
    assert np.all(np.isfinite(out.values))
    assert out.values[0] == pytest.approx(0.0, abs=1e-12)
    assert out.values[2] == pytest.approx(1.0, abs=1e-12)


def test_softmax_large_inputs_guarded_by_max_subtraction():
    out = ad.softmax(t([800.0, 799.0, -800.0]))
    assert np.all(np.isfinite(out.values))
    assert out.values.sum() == pytest.approx(1.0, abs=1e-12)


def test_mean_and_sq_error_values():
    assert float(ad.mean(t([1.0, 2.0, 3.0])).values) == pytest.approx(2.0)
    assert float(ad.sq_error(t([1.0, 1.0]), np.zeros(2)).values) == pytest.approx(1.0)


def test_shape_mismatch_reports_both_shapes():
    with pytest.raises(ShapeError) as exc:
        ad.add(t(np.zeros(3)), t(np.zeros(4)))
    assert "(3,)" in str(exc.value) and "(4,)" in str(exc.value)


def test_non_finite_forward_raises_fault():
    with np.errstate(over="ignore"):
        with pytest.raises(NumericalFault):
            ad.mul(t([1e308]), t([1e308]))


# ---------------------------------------------------------------------------
# Per-primitive finite-difference checks
# ---------------------------------------------------------------------------

def _fd_case(build, params, seed, tol=1e-6):
    err = gradient_check(build, params, h=1e-5, seed=seed)
    assert err <= tol, f"max relative error {err}"


@pytest.mark.parametrize("seed", range(3))
def test_affine_backward_matches_fd(seed):
    rng = np.random.default_rng(seed)
    x, w, b = t(rng.normal(size=(3, 4))), t(rng.normal(size=(4, 5))), t(rng.normal(size=5))
    _fd_case(lambda: ad.mean(ad.affine(x, w, b)), [x, w, b], seed, tol=1e-7)


@pytest.mark.parametrize("op", [ad.relu, ad.tanh, ad.sigmoid])
def test_elementwise_backward_matches_fd(op):
    rng = np.random.default_rng(1)
    # keep relu inputs away from the kink
    x = t(rng.normal(size=7) + np.sign(rng.normal(size=7)) * 0.2)
    _fd_case(lambda: ad.mean(op(x)), [x], 0)


def test_softmax_backward_matches_fd():
    rng = np.random.default_rng(2)
    x = t(rng.normal(size=6))
    w = rng.normal(size=6)
    _fd_case(lambda: ad.matmul(ad.softmax(x), Tensor(w)), [x], 0)


@pytest.mark.parametrize("shapes", [((3, 4), (4, 5)), ((3, 4), (4,)), ((4,), (4, 5)), ((4,), (4,))])
def test_matmul_backward_matches_fd(shapes):
    rng = np.random.default_rng(3)
    a, b = t(rng.normal(size=shapes[0])), t(rng.normal(size=shapes[1]))
    out = ad.matmul(a, b)
    if out.ndim == 0:
        _fd_case(lambda: ad.matmul(a, b), [a, b], 0)
    else:
        _fd_case(lambda: ad.mean(ad.matmul(a, b)), [a, b], 0)


def test_structural_primitives_backward_matches_fd():
    rng = np.random.default_rng(4)
    m = t(rng.normal(size=(5, 3)))
    s = t(rng.normal(size=4))
    v1, v2 = t(rng.normal(size=3)), t(rng.normal(size=3))
    idx = np.array([0, 2, 2, 4])

    def build():
        g = ad.gather_rows(m, idx)             # (4, 3)
        g = ad.mul_rows(g, s)                  # rows scaled
        c = ad.concat([ad.take_row(m, 1), v1, v2], axis=0)
        st_ = ad.stack_rows([v1, v2, ad.take_col(g, 0)[:3]]) if False else ad.stack_rows([v1, v2])
        return ad.add(ad.mean(g), ad.add(ad.mean(c), ad.mean(st_)))

    _fd_case(build, [m, s, v1, v2], 0)


def test_take_col_and_stack_cols_backward():
    rng = np.random.default_rng(5)
    m = t(rng.normal(size=(4, 3)))
    cols = [ad.take_col(m, j) for j in range(3)]
    _fd_case(lambda: ad.mean(ad.stack_cols([ad.tanh(ad.take_col(m, j)) for j in range(3)])), [m], 0)


def test_sq_error_backward_matches_fd():
    rng = np.random.default_rng(6)
    pred = t(rng.normal(size=8))
    target = rng.normal(size=8)
    _fd_case(lambda: ad.sq_error(pred, target), [pred], 0)


# ---------------------------------------------------------------------------
# Tape semantics
# ---------------------------------------------------------------------------

def test_gradient_accumulation_is_additive():
    x = t([2.0])
    with Tape() as tape:
        loss = ad.add(ad.mul(x, x), ad.scale(x, 3.0))  # x^2 + 3x
        loss = ad.mean(loss)
        tape.backward(loss)
    assert x.grad[0] == pytest.approx(2 * 2.0 + 3.0)


def test_backward_of_sum_equals_sum_of_backwards():
    rng = np.random.default_rng(7)
    w = t(rng.normal(size=(3, 3)))
    x1, x2 = rng.normal(size=3), rng.normal(size=3)

    def loss_for(x):
        return ad.mean(ad.tanh(ad.matmul(w, Tensor(x))))

    w.zero_grad()
    with Tape() as tape:
        total = ad.add(loss_for(x1), loss_for(x2))
        tape.backward(total)
    g_sum = w.grad.copy()

    separate = np.zeros_like(g_sum)
    for x in (x1, x2):
        w.zero_grad()
        with Tape() as tape:
            tape.backward(loss_for(x))
        separate += w.grad
    assert np.allclose(g_sum, separate, atol=1e-12)


def test_no_tape_means_no_recording():
    x = t([1.0, 2.0])
    out = ad.tanh(x)
    assert out.requires_grad is False
    assert out.grad is None


def test_backward_requires_scalar_loss():
    x = t([1.0, 2.0])
    with Tape() as tape:
        y = ad.tanh(x)
        with pytest.raises(ShapeError):
            tape.backward(y)


# ---------------------------------------------------------------------------
# gradient_check contract
# ---------------------------------------------------------------------------

def test_gradient_check_linear_function_near_exact():
    rng = np.random.default_rng(8)
    w = t(rng.normal(size=6))
    c = rng.normal(size=6)
    # central differences are exact on linear functions for any h; a larger
    # step keeps float cancellation below the 1e-10 bar
    err = gradient_check(lambda: ad.matmul(w, Tensor(c)), [w], h=1e-3)
    assert err <= 1e-10


def test_gradient_check_square_at_one():
    x = t([1.0])
    err = gradient_check(lambda: ad.mean(ad.mul(x, x)), [x], h=1e-5)
    # numeric derivative of x^2 at 1 is exact to O(h^2); analytic is 2.0
    assert err <= 1e-9


# ---------------------------------------------------------------------------
# LSTM / BiLSTM
# ---------------------------------------------------------------------------

def _lstm_params(rng, in_dim, hidden, prefix="cell"):
    params = {}
    nn.init_lstm_params(rng, in_dim, hidden, params, prefix)
    return params


def test_lstm_zero_weights_zero_state_gives_zero_output():
    params = _lstm_params(np.random.default_rng(0), 3, 4)
    for p in params.values():
        p.values[:] = 0.0
    h, c = nn.lstm_cell(Tensor(np.zeros(3)), Tensor(np.zeros(4)), Tensor(np.zeros(4)),
                        params, "cell")
    assert np.allclose(h.values, 0.0)
    assert np.allclose(c.values, 0.0)


def test_lstm_saturated_gates_copy_cell_state():
    rng = np.random.default_rng(1)
    params = _lstm_params(rng, 3, 4)
    params["cell.f.b"].values[:] = 20.0   # forget ~ 1
    params["cell.i.b"].values[:] = -20.0  # input ~ 0
    c_prev = rng.normal(size=4)
    _, c = nn.lstm_cell(Tensor(rng.normal(size=3)), Tensor(rng.normal(size=4)),
                        Tensor(c_prev), params, "cell")
    assert np.allclose(c.values, c_prev, atol=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_lstm_cell_backward_matches_fd(seed):
    rng = np.random.default_rng(seed)
    params = _lstm_params(rng, 3, 4)
    x = t(rng.normal(size=3))
    h0 = t(rng.normal(size=4))
    c0 = t(rng.normal(size=4))

    def build():
        h, c = nn.lstm_cell(x, h0, c0, params, "cell")
        return ad.mean(ad.add(h, c))

    _fd_case(build, list(params.values()) + [x, h0, c0], seed)


def test_bilstm_output_shape_and_t1():
    rng = np.random.default_rng(2)
    params = {}
    nn.init_bilstm_params(rng, 3, 4, params, "b")
    out = nn.bilstm([Tensor(rng.normal(size=3))], 4, params, "b")
    assert len(out) == 1
    assert out[0].shape == (8,)
    assert np.all(np.isfinite(out[0].values))


def test_bilstm_empty_sequence_rejected():
    with pytest.raises(ShapeError):
        nn.bilstm([], 4, {}, "b")


def test_bilstm_palindrome_with_mirrored_parameters():
    rng = np.random.default_rng(3)
    params = {}
    nn.init_bilstm_params(rng, 3, 4, params, "b")
    # mirror: backward direction shares the forward parameters
    for gate in nn.GATES:
        for piece in ("w", "u", "b"):
            params[f"b.bwd.{gate}.{piece}"].values = params[f"b.fwd.{gate}.{piece}"].values.copy()
    seq = [rng.normal(size=3) for _ in range(3)]
    seq = seq + seq[-2::-1]  # palindrome of length 5
    out = nn.bilstm([Tensor(x) for x in seq], 4, params, "b")
    T = len(seq)
    for i in range(T):
        fwd_at_i = out[i].values[:4]
        bwd_at_mirror = out[T - 1 - i].values[4:]
        assert np.allclose(fwd_at_i, bwd_at_mirror, atol=1e-12)


@pytest.mark.parametrize("seed", range(2))
def test_bilstm_backward_matches_fd(seed):
    rng = np.random.default_rng(seed + 10)
    params = {}
    nn.init_bilstm_params(rng, 2, 3, params, "b")
    xs = [t(rng.normal(size=2)) for _ in range(3)]

    def build():
        out = nn.bilstm(xs, 3, params, "b")
        total = out[0]
        for v in out[1:]:
            total = ad.add(total, v)
        return ad.mean(total)

    _fd_case(build, list(params.values()) + xs, seed, tol=1e-5)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def test_adam_zero_gradient_leaves_parameters_unchanged():
    p = {"w": t(np.array([1.0, -2.0]))}
    opt = nn.Adam(p, lr=0.1)
    p["w"].grad = np.zeros(2)
    before = p["w"].values.copy()
    for _ in range(5):
        opt.step()
    assert np.array_equal(p["w"].values, before)


def test_adam_first_step_magnitude_close_to_lr():
    p = {"w": t(np.array([0.0, 0.0]))}
    opt = nn.Adam(p, lr=1e-3)
    p["w"].grad = np.array([0.5, -2.0])
    opt.step()
    # bias-corrected ratio is 1 at t=1, so |update| ~ lr per coordinate
    assert np.allclose(np.abs(p["w"].values), 1e-3, rtol=1e-6)
    assert np.sign(p["w"].values[0]) == -1.0 and np.sign(p["w"].values[1]) == 1.0


def test_adam_two_runs_bitwise_identical():
    def run():
        rng = np.random.default_rng(0)
        p = {"w": t(rng.normal(size=4))}
        opt = nn.Adam(p, lr=1e-2)
        for k in range(20):
            p["w"].grad = np.sin(np.arange(4) + k)
            opt.step()
        return p["w"].values.copy()

    assert np.array_equal(run(), run())


def test_adam_rejects_nonpositive_lr():
    with pytest.raises(ConfigError):
        nn.Adam({"w": t(np.zeros(1))}, lr=0.0)
