import numpy as np
import pytest

from omicgat import autodiff as ad
from omicgat.errors import DataError
from omicgat.fusion import FusionNet, discovery_vector, discovery_vector_tensor
from conftest import finite_diff_error


def stochastic(rng, n, c):
    x = rng.random((n, c)) + 1e-3
    return x / x.sum(axis=1, keepdims=True)


def test_dimension_is_c_power_m(rng):
    probs = [stochastic(rng, 5, 2) for _ in range(3)]
    assert discovery_vector(probs).shape == (5, 8)


def test_one_hot_outer_product():
    onehot = np.array([[1.0, 0.0]])
    out = discovery_vector([onehot, onehot, onehot])
    expected = np.zeros(8)
    expected[0] = 1.0
    assert np.array_equal(out[0], expected)


def test_two_omic_hand_example():
    p1 = np.array([[0.3, 0.7]])
    p2 = np.array([[0.6, 0.4]])
    out = discovery_vector([p1, p2])[0]
    assert np.allclose(out, [0.3 * 0.6, 0.3 * 0.4, 0.7 * 0.6, 0.7 * 0.4])


def test_first_omic_varies_slowest(rng):
    p1 = np.array([[0.2, 0.8]])
    p2 = np.array([[0.5, 0.5]])
    p3 = np.array([[0.9, 0.1]])
    out = discovery_vector([p1, p2, p3])[0]
    # index (i, j, k) -> i*4 + j*2 + k
    for i in range(2):
        for j in range(2):
            for k in range(2):
                assert out[i * 4 + j * 2 + k] == pytest.approx(
                    p1[0, i] * p2[0, j] * p3[0, k]
                )


def test_entries_nonnegative_sum_one(rng):
    for _ in range(20):
        probs = [stochastic(rng, 7, 3) for _ in range(2)]
        out = discovery_vector(probs)
        assert out.min() >= 0
        assert np.all(np.abs(out.sum(axis=1) - 1.0) < 1e-9)


def test_single_omic_rejected(rng):
    with pytest.raises(DataError, match="at least 2 omics"):
        discovery_vector([stochastic(rng, 3, 2)])


def test_tensor_variant_matches_plain(rng):
    probs = [stochastic(rng, 4, 3) for _ in range(3)]
    plain = discovery_vector(probs)
    tensor = discovery_vector_tensor([ad.constant(p) for p in probs])
    assert np.allclose(plain, tensor.value, atol=1e-15)


def test_gradient_through_outer_product(rng):
    a = ad.parameter(stochastic(rng, 4, 2))
    b = ad.parameter(stochastic(rng, 4, 3))
    weights = ad.constant(rng.random((4, 6)))

    def build():
        return ad.total(ad.mul(discovery_vector_tensor([a, b]), weights))

    assert finite_diff_error(build, [a, b]) < 1e-4


def test_fusion_net_gradient(rng):
    net = FusionNet(2, 2, rng)
    disc = ad.constant(stochastic(rng, 5, 4))
    onehot = np.zeros((5, 2))
    onehot[np.arange(5), rng.integers(0, 2, 5)] = 1.0

    def build():
        logp = ad.log_softmax(net.forward(disc), axis=1)
        return ad.scale(ad.total(ad.mul(logp, ad.constant(onehot))), -1.0)

    assert finite_diff_error(build, net.parameters()) < 1e-4


def test_untrained_fusion_outputs_probability_vector(rng):
    net = FusionNet(3, 2, rng)
    probs = [stochastic(rng, 6, 3) for _ in range(2)]
    out = net.predict_proba(probs)
    assert out.shape == (6, 3)
    assert np.all(out >= 0)
    assert np.all(np.abs(out.sum(axis=1) - 1.0) < 1e-9)


def test_fusion_input_dim_is_exact(rng):
    net = FusionNet(3, 3, rng)
    assert net.w1.value.shape == (27, 27)
    assert net.w2.value.shape == (27, 3)
