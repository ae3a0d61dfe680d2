import numpy as np
import pytest


def finite_difference(loss_fn, array, eps=1e-6):
    """Central finite-difference gradient of loss_fn w.r.t. array (in place)."""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        lp = loss_fn()
        flat[i] = orig - eps
        lm = loss_fn()
        flat[i] = orig
        gflat[i] = (lp - lm) / (2.0 * eps)
    return grad


def max_rel_err(analytic, numeric, floor=1e-4):
    """Relative error with an absolute floor: below ``floor`` the central
    finite difference's own roundoff (~1e-10) dominates any true signal."""
    return float(np.max(np.abs(analytic - numeric) / np.maximum(np.abs(numeric), floor)))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
