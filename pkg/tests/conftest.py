import numpy as np
import pytest

from omicgat import autodiff as ad


def finite_diff_error(build_loss, params, step=1e-5):
    """Max relative disagreement between backprop and central differences.

    ``build_loss`` must rebuild the scalar loss from the *current* parameter
    values each call; parameters are perturbed in place.
    """
    loss = build_loss()
    for p in params:
        p.zero_grad()
    ad.backward(loss)
    analytic = [
        p.grad.copy() if p.grad is not None else np.zeros_like(p.value) for p in params
    ]
    worst = 0.0
    for p, grads in zip(params, analytic):
        flat = p.value.ravel()
        gflat = grads.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = float(build_loss().value)
            flat[i] = orig - step
            down = float(build_loss().value)
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            denom = max(abs(numeric), abs(gflat[i]), 1e-6)
            worst = max(worst, abs(numeric - gflat[i]) / denom)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
