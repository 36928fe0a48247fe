import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from bevlift import numeric as nm
from bevlift.numeric import Tensor


def fd_grad(f, x, eps=1e-6):
    """Plain central differences, written independently of the package harness."""
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[i] += eps
        xm[i] -= eps
        g[i] = (f(xp) - f(xm)) / (2 * eps)
    return g


# -- matmul -----------------------------------------------------------------

def test_matmul_identity():
    a = np.arange(6.0).reshape(2, 3)
    out = nm.matmul(Tensor(np.eye(2)), Tensor(a))
    assert np.array_equal(out.data, a)


def test_matmul_hand_example():
    out = nm.matmul(Tensor([[1, 2], [3, 4]]), Tensor([[1], [1]]))
    assert out.data.tolist() == [[3.0], [7.0]]


def test_matmul_zeros():
    b = np.random.default_rng(0).normal(size=(3, 4))
    assert not nm.matmul(Tensor(np.zeros((2, 3))), Tensor(b)).data.any()


def test_matmul_shape_error():
    with pytest.raises(nm.ShapeError):
        nm.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))


# -- softmax ----------------------------------------------------------------

def test_softmax_equal_logits():
    assert np.allclose(nm.softmax(Tensor([2.5, 2.5])).data, [0.5, 0.5], atol=0)


def test_softmax_ln3():
    out = nm.softmax(Tensor([0.0, np.log(3.0)])).data
    assert np.allclose(out, [0.25, 0.75], rtol=0, atol=1e-15)


def test_softmax_no_overflow():
    out = nm.softmax(Tensor([1000.0, 0.0])).data
    assert np.isfinite(out).all()
    assert out[0] == pytest.approx(1.0) and out[1] < 1e-300


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 7)),
                  elements=st.floats(-50, 50)))
def test_softmax_rows_are_distributions(x):
    out = nm.softmax(Tensor(x), axis=-1).data
    assert (out >= 0).all()
    assert np.abs(out.sum(axis=-1) - 1).max() < 1e-12


# -- layer norm -------------------------------------------------------------

def test_layer_norm_constant_row_is_zero():
    out = nm.layer_norm(Tensor([[4.0, 4.0, 4.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3)), 1e-5)
    assert np.array_equal(out.data, np.zeros((1, 3)))


def test_layer_norm_two_values():
    out = nm.layer_norm(Tensor([[1.0, 3.0]]), Tensor(np.ones(2)), Tensor(np.zeros(2)), 1e-5).data
    # population variance is 1, so only the eps term perturbs the result
    assert np.allclose(out, [[-1.0, 1.0]], atol=1e-5)


def test_layer_norm_zero_gain_gives_bias():
    x = np.random.default_rng(1).normal(size=(4, 3))
    out = nm.layer_norm(Tensor(x), Tensor(np.zeros(3)), Tensor([1.0, -2.0, 0.5]))
    assert np.array_equal(out.data, np.tile([1.0, -2.0, 0.5], (4, 1)))


# -- backward ---------------------------------------------------------------

def test_backward_sum_gives_ones():
    x = Tensor(np.random.default_rng(2).normal(size=(3, 2)), requires_grad=True)
    nm.backward(x.sum())
    assert np.array_equal(x.grad, np.ones((3, 2)))


def test_backward_square():
    x = Tensor([1.0, 2.0], requires_grad=True)
    nm.backward((x * x).sum())
    assert x.grad.tolist() == [2.0, 4.0]


def test_backward_softmax_matches_fd():
    rng = np.random.default_rng(3)
    x0 = rng.normal(size=(3, 4))
    w = rng.normal(size=(3, 4))

    def f_np(v):
        e = np.exp(v - v.max(axis=1, keepdims=True))
        return float(((e / e.sum(axis=1, keepdims=True)) * w).sum())

    x = Tensor(x0, requires_grad=True)
    nm.backward((nm.softmax(x, axis=1) * Tensor(w)).sum())
    num = fd_grad(f_np, x0)
    rel = np.abs(x.grad - num) / np.maximum(np.maximum(np.abs(x.grad), np.abs(num)), 1e-8)
    assert rel.max() < 1e-4


def test_backward_untracked_leaf_untouched():
    x = Tensor([1.0, 2.0], requires_grad=True)
    c = Tensor([3.0, 4.0])
    nm.backward((x * c).sum())
    assert c.grad is None


def test_backward_rejects_non_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(nm.ContractError):
        nm.backward(x * 2.0)


def test_gradient_accumulates_on_reuse():
    x = Tensor([3.0], requires_grad=True)
    nm.backward((x * x + x).sum())
    assert x.grad.tolist() == [7.0]


def test_graph_is_topologically_ordered():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    y = nm.relu(nm.matmul(x, x) + x)
    loss = nm.softmax(y).sum()
    g = nm.ComputeGraph.from_root(loss)
    assert g.check_order()
    assert g.nodes[-1] is loss


def test_non_finite_forward_raises():
    with pytest.raises(nm.NonFiniteError), np.errstate(divide="ignore"):
        Tensor([1.0]) / Tensor([0.0])


# -- every op against finite differences ------------------------------------

OPS = {
    "matmul": lambda x, w: nm.matmul(x, w),
    "batched_matmul": lambda x, w: nm.matmul(x.reshape(2, 2, 3), x.reshape(2, 3, 2)),
    "add_bias": lambda x, w: x + Tensor(w.data[0]),
    "mul": lambda x, w: x * x,
    "div": lambda x, w: x / (x * x + 1.0),
    "relu": lambda x, w: nm.relu(x),
    "sigmoid": lambda x, w: nm.sigmoid(x),
    "exp": lambda x, w: nm.exp(x * 0.3),
    "log": lambda x, w: nm.log(x * x + 1.0),
    "softmax": lambda x, w: nm.softmax(x, axis=0),
    "layer_norm": lambda x, w: nm.layer_norm(x, Tensor(w.data[0]), Tensor(w.data[1])),
    "transpose": lambda x, w: x.transpose(1, 0) * Tensor(np.arange(12.0).reshape(3, 4)),
    "mean": lambda x, w: x.mean(axis=0) * x,
    "concat": lambda x, w: nm.concat([x, x * x], axis=0),
    "index_select": lambda x, w: nm.index_select(x, np.array([[0, 2], [2, 1]]), axis=0),
    "unfold2d": lambda x, w: nm.unfold2d(x.reshape(1, 4, 3, 1), 3, stride=(2, 1), pad=1),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients_match_finite_differences(name):
    rng = np.random.default_rng(abs(hash(name)) % 2**32)
    op = OPS[name]
    worst = 0.0
    for trial in range(10):
        w = Tensor(rng.normal(size=(3, 2)) if name == "matmul" else rng.normal(size=(2, 3)))
        probe = rng.normal(size=op(Tensor(rng.normal(size=(4, 3))), w).shape)
        x0 = rng.normal(size=(4, 3))
        if name == "relu":
            x0 = np.where(np.abs(x0) < 1e-3, 0.5, x0)
        worst = max(worst, nm.grad_check(lambda x: (op(x, w) * Tensor(probe)).sum(), Tensor(x0), eps=1e-6))
    assert worst < 1e-4


def test_grad_check_linear_is_exact():
    x = Tensor(np.random.default_rng(5).normal(size=5))
    c = Tensor(np.arange(5.0))
    assert nm.grad_check(lambda v: (v * c).sum(), x) < 1e-10


def test_grad_check_detects_corrupted_rule():
    from bevlift.numeric import tensor as tmod

    # d(x^2)/dx registered as x instead of 2x
    def bad(x):
        return tmod._make(x.data ** 2, (x,), lambda g: tmod._accum(x, g * x.data), "bad").sum()

    x = Tensor(np.array([0.7, -1.3, 2.0]))
    assert nm.grad_check(bad, x) > 1e-2


# -- Adam -------------------------------------------------------------------

def test_adam_zero_grads_leave_params_unchanged():
    p = {"w": Tensor([1.0, -2.0], requires_grad=True)}
    st_ = nm.AdamState(lr=0.1)
    nm.adam_step(p, {"w": np.zeros(2)}, st_)
    assert p["w"].data.tolist() == [1.0, -2.0]
    assert st_.step == 1


def test_adam_first_moments():
    g = np.array([0.5, -3.0])
    st_ = nm.AdamState(lr=0.01)
    nm.adam_step({"w": Tensor([0.0, 0.0])}, {"w": g}, st_)
    assert np.allclose(st_.m["w"], 0.1 * g, rtol=0, atol=1e-15)
    assert np.allclose(st_.v["w"], 0.001 * g * g, rtol=0, atol=1e-15)


def test_adam_converges_on_quadratic():
    w = Tensor([0.0], requires_grad=True)
    opt = nm.Adam({"w": w}, lr=1e-2)
    for _ in range(2000):
        opt.zero_grad()
        d = w - 3.0
        nm.backward((d * d).sum())
        opt.step()
    assert abs(w.data[0] - 3.0) < 1e-3


def test_adam_shape_mismatch():
    with pytest.raises(nm.ShapeError):
        nm.adam_step({"w": Tensor([0.0, 0.0])}, {"w": np.zeros(3)}, nm.AdamState())


def _train_tiny(seed, steps=50):
    rng = np.random.default_rng(seed)
    w = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    b = Tensor(np.zeros(3), requires_grad=True)
    x = Tensor(rng.normal(size=(8, 4)))
    y = rng.integers(0, 2, size=(8, 3)).astype(float)
    opt = nm.Adam({"w": w, "b": b}, lr=1e-2)
    for _ in range(steps):
        opt.zero_grad()
        p = nm.sigmoid(nm.matmul(x, w) + b)
        d = p - Tensor(y)
        nm.backward((d * d).mean())
        opt.step()
    return w.data.copy(), b.data.copy()


def test_training_is_bit_deterministic():
    a, b = _train_tiny(7), _train_tiny(7)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_random_steps_stay_finite():
    rng = np.random.default_rng(11)
    w = Tensor(rng.normal(size=(6, 6)) * 0.5, requires_grad=True)
    g = Tensor(np.ones(6), requires_grad=True)
    bb = Tensor(np.zeros(6), requires_grad=True)
    opt = nm.Adam({"w": w, "g": g, "b": bb}, lr=1e-2)
    for _ in range(1000):
        x = Tensor(rng.normal(size=(5, 6)) * rng.uniform(0.1, 10))
        h = nm.layer_norm(nm.relu(nm.matmul(x, w)), g, bb)
        loss = (nm.softmax(h, axis=-1) * Tensor(rng.random((5, 6)))).sum()
        opt.zero_grad()
        nm.backward(loss)
        opt.step()
    from bevlift.numeric.tensor import parameters_finite
    assert parameters_finite([w, g, bb])


def test_plateau_halving_once_per_window():
    sched = nm.PlateauHalving(patience=3)
    fired = [sched.update(1.0) for _ in range(11)]
    # first epoch sets the best value; afterwards every third flat epoch halves
    assert [i for i, f in enumerate(fired) if f] == [3, 6, 9]


# -- checkpoints ------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path):
    params = {"enc.w": np.arange(6.0).reshape(2, 3), "bias": np.array([1.5]), "s": np.array(2.0)}
    nm.save_params(tmp_path / "m.zbt", params)
    raw = (tmp_path / "m.zbt").read_bytes()
    assert raw[:4] == b"ZBT1"
    # first record: name length then name
    assert int.from_bytes(raw[4:12], "little") == len("enc.w")
    back = nm.load_params(tmp_path / "m.zbt")
    assert list(back) == list(params)
    for k in params:
        assert np.array_equal(back[k], params[k]) and back[k].shape == params[k].shape


def test_checkpoint_rejects_bad_magic(tmp_path):
    (tmp_path / "x").write_bytes(b"NOPE")
    with pytest.raises(nm.CheckpointError):
        nm.load_params(tmp_path / "x")
