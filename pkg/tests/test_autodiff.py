import numpy as np
import pytest

from omicgat import autodiff as ad
from conftest import finite_diff_error


def test_sum_of_parameter_gives_ones():
    w = ad.parameter(np.arange(6.0).reshape(2, 3))
    loss = ad.total(w)
    ad.backward(loss)
    assert np.array_equal(w.grad, np.ones((2, 3)))


def test_matmul_gradient_pattern_2x2():
    a = ad.parameter(np.array([[1.0, 2.0], [3.0, 4.0]]))
    b = ad.parameter(np.array([[5.0, 6.0], [7.0, 8.0]]))
    loss = ad.total(ad.matmul(a, b))
    ad.backward(loss)
    # d/dA sum(AB) = 1 @ B^T
    assert np.allclose(a.grad, np.ones((2, 2)) @ b.value.T)
    assert np.allclose(b.grad, a.value.T @ np.ones((2, 2)))


def test_backward_rejects_non_scalar():
    w = ad.parameter(np.ones((2, 2)))
    with pytest.raises(ValueError):
        ad.backward(ad.add(w, w))


def test_unreachable_parameter_keeps_none_grad():
    used = ad.parameter(np.ones(3))
    unused = ad.parameter(np.ones(3))
    loss = ad.total(used)
    ad.backward(loss)
    assert unused.grad is None


def test_reused_tensor_accumulates_gradient():
    x = ad.parameter(np.array([2.0]))
    loss = ad.total(ad.add(ad.mul(x, x), x))  # x^2 + x -> 2x + 1 = 5
    ad.backward(loss)
    assert np.allclose(x.grad, [5.0])


def test_segment_softmax_singleton_is_one():
    logits = ad.constant(np.array([3.7]))
    out = ad.segment_softmax(logits, np.array([0]), 1)
    assert np.allclose(out.value, [1.0])


def test_segment_softmax_two_equal_logits():
    out = ad.segment_softmax(ad.constant(np.array([1.3, 1.3])), np.array([0, 0]), 1)
    assert np.allclose(out.value, [0.5, 0.5])


def test_segment_softmax_matches_naive_exp_normalization(rng):
    logits = rng.normal(size=7)
    out = ad.segment_softmax(ad.constant(logits), np.zeros(7, dtype=int), 1)
    naive = np.exp(logits) / np.exp(logits).sum()
    assert np.max(np.abs(out.value - naive)) < 1e-12


def test_segment_softmax_sums_to_one_per_segment(rng):
    segments = rng.integers(0, 5, size=40)
    logits = rng.normal(size=40) * 10
    out = ad.segment_softmax(ad.constant(logits), segments, 5)
    sums = np.zeros(5)
    np.add.at(sums, segments, out.value)
    present = np.unique(segments)
    assert np.all(np.abs(sums[present] - 1.0) < 1e-9)


def test_segment_softmax_stable_for_huge_logits():
    logits = ad.constant(np.array([1000.0, 1000.0, -1000.0]))
    out = ad.segment_softmax(logits, np.array([0, 0, 0]), 1)
    assert np.all(np.isfinite(out.value))
    assert abs(out.value.sum() - 1.0) < 1e-12


def test_dropout_rate_zero_is_identity(rng):
    x = ad.constant(rng.normal(size=(4, 3)))
    assert ad.dropout(x, 0.0, rng) is x


def test_dropout_mask_reproducible_with_seed():
    x = ad.constant(np.ones((8, 8)))
    a = ad.dropout(x, 0.4, np.random.default_rng(7)).value
    b = ad.dropout(x, 0.4, np.random.default_rng(7)).value
    assert np.array_equal(a, b)


def test_dropout_scales_kept_entries():
    x = ad.constant(np.ones((500, 4)))
    out = ad.dropout(x, 0.25, np.random.default_rng(3)).value
    kept = out[out != 0]
    assert np.allclose(kept, 1.0 / 0.75)


@pytest.mark.parametrize(
    "name",
    [
        "add",
        "sub",
        "mul",
        "matmul",
        "leaky_relu",
        "exp",
        "log",
        "log_softmax",
        "gather_rows",
        "segment_sum",
        "segment_mean",
        "segment_softmax",
        "concat_cols",
        "pairwise_expand",
        "reshape",
        "scale",
    ],
)
def test_operator_gradients_match_finite_differences(name, rng):
    a = ad.parameter(rng.normal(size=(5, 4)))
    b = ad.parameter(rng.normal(size=(5, 4)))
    segments = np.array([0, 2, 2, 1, 0])

    if name == "add":
        build = lambda: ad.total(ad.mul(ad.add(a, b), ad.constant(rng2())))
    elif name == "sub":
        build = lambda: ad.total(ad.mul(ad.sub(a, b), ad.constant(rng2())))
    elif name == "mul":
        build = lambda: ad.total(ad.mul(a, b))
    elif name == "matmul":
        c = ad.parameter(rng.normal(size=(4, 3)))
        build = lambda: ad.total(ad.matmul(a, c))
        fd = finite_diff_error(build, [a, c])
        assert fd < 1e-4
        return
    elif name == "leaky_relu":
        build = lambda: ad.total(ad.leaky_relu(a, 0.01))
    elif name == "exp":
        build = lambda: ad.total(ad.exp(ad.scale(a, 0.3)))
    elif name == "log":
        pos = ad.parameter(np.abs(rng.normal(size=(5, 4))) + 1.0)
        build = lambda: ad.total(ad.log(pos))
        assert finite_diff_error(build, [pos]) < 1e-4
        return
    elif name == "log_softmax":
        build = lambda: ad.total(ad.mul(ad.log_softmax(a, axis=1), ad.constant(rng2())))
    elif name == "gather_rows":
        idx = np.array([0, 2, 2, 4, 1, 0])
        build = lambda: ad.total(ad.mul(ad.gather_rows(a, idx), ad.constant(np.arange(24.0).reshape(6, 4))))
    elif name == "segment_sum":
        build = lambda: ad.total(ad.mul(ad.segment_sum(a, segments, 3), ad.constant(np.arange(12.0).reshape(3, 4))))
    elif name == "segment_mean":
        build = lambda: ad.total(ad.mul(ad.segment_mean(a, segments, 4), ad.constant(np.arange(16.0).reshape(4, 4))))
    elif name == "segment_softmax":
        vec = ad.parameter(rng.normal(size=7))
        seg = np.array([0, 0, 1, 1, 1, 2, 2])
        weights = np.arange(1.0, 8.0)
        build = lambda: ad.total(ad.mul(ad.segment_softmax(vec, seg, 3), ad.constant(weights)))
        assert finite_diff_error(build, [vec]) < 1e-4
        return
    elif name == "concat_cols":
        build = lambda: ad.total(ad.mul(ad.concat_cols([a, b]), ad.constant(np.arange(40.0).reshape(5, 8))))
    elif name == "pairwise_expand":
        build = lambda: ad.total(ad.mul(ad.pairwise_expand(a, b), ad.constant(np.arange(80.0).reshape(5, 16))))
    elif name == "reshape":
        build = lambda: ad.total(ad.mul(ad.reshape(a, (4, 5)), ad.constant(np.arange(20.0).reshape(4, 5))))
    elif name == "scale":
        build = lambda: ad.total(ad.scale(a, -2.5))
    assert finite_diff_error(build, [p for p in (a, b) if isinstance(p, ad.Tensor)]) < 1e-4


def rng2():
    # Fixed weighting matrix so the loss is not permutation-symmetric.
    return np.arange(20.0).reshape(5, 4) / 7.0 + 0.1


def test_three_layer_composite_gradient():
    """Random small model: matmul + leaky + softmax chain against FD."""
    gen = np.random.default_rng(0)
    w1 = ad.parameter(gen.normal(size=(6, 5)) * 0.4)
    w2 = ad.parameter(gen.normal(size=(5, 4)) * 0.4)
    w3 = ad.parameter(gen.normal(size=(4, 3)) * 0.4)
    x = np.asarray(gen.normal(size=(7, 6)))
    y = np.zeros((7, 3))
    y[np.arange(7), gen.integers(0, 3, 7)] = 1.0

    # Central differences are only a valid oracle away from the rectifier
    # kink; this seed keeps every pre-activation clear of the step size.
    h1 = x @ w1.value
    h2 = np.where(h1 >= 0, h1, 0.01 * h1) @ w2.value
    assert min(np.abs(h1).min(), np.abs(h2).min()) > 1e-3

    def build():
        h = ad.leaky_relu(ad.matmul(ad.constant(x), w1), 0.01)
        h = ad.leaky_relu(ad.matmul(h, w2), 0.01)
        logits = ad.matmul(h, w3)
        return ad.scale(ad.total(ad.mul(ad.log_softmax(logits, axis=1), ad.constant(y))), -1.0)

    assert finite_diff_error(build, [w1, w2, w3]) < 1e-4


def test_broadcast_bias_addition_gradient(rng):
    w = ad.parameter(rng.normal(size=(1, 4)))
    x = ad.constant(rng.normal(size=(6, 4)))
    build = lambda: ad.total(ad.mul(ad.add(x, w), ad.constant(np.arange(24.0).reshape(6, 4))))
    assert finite_diff_error(build, [w]) < 1e-4


def test_checkpoint_roundtrip(tmp_path, rng):
    params = [ad.parameter(rng.normal(size=s)) for s in [(3, 4), (4,), (2, 2)]]
    originals = [p.value.copy() for p in params]
    ad.save_params(params, tmp_path / "ckpt")
    for p in params:
        p.value = np.zeros_like(p.value)
    ad.load_params(params, tmp_path / "ckpt")
    for p, orig in zip(params, originals):
        assert np.array_equal(p.value, orig)


def test_checkpoint_shape_mismatch_rejected(tmp_path, rng):
    params = [ad.parameter(rng.normal(size=(3, 4)))]
    ad.save_params(params, tmp_path / "ckpt")
    other = [ad.parameter(np.zeros((4, 3)))]
    with pytest.raises(ValueError):
        ad.load_params(other, tmp_path / "ckpt")
