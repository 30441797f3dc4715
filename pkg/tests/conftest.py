import numpy as np
import pytest
import torch

from upres.series import TimeSeries


@pytest.fixture(autouse=True)
def _single_thread_torch():
    # keeps CPU reductions deterministic across test runs
    torch.set_num_threads(1)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def short_series():
    return TimeSeries(values=[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], step=900.0)


def finite_diff_grads(loss_fn, params, h=1e-6):
    """Central finite differences of a scalar loss w.r.t. a list of tensors."""
    grads = []
    for p in params:
        g = torch.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + h
            up = float(loss_fn().detach())
            flat[i] = orig - h
            down = float(loss_fn().detach())
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def assert_grads_close(loss_fn, params, rel=1e-4, h=1e-6):
    """Autograd gradients must match central differences within `rel`."""
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    numeric = finite_diff_grads(loss_fn, [p.data for p in params], h=h)
    for p, num in zip(params, numeric):
        assert p.grad is not None, "parameter got no gradient"
        scale = max(float(num.abs().max()), 1.0)
        err = float((p.grad - num).abs().max()) / scale
        assert err <= rel, f"gradient mismatch: {err:.3e} > {rel}"
