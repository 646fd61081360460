"""Central finite-difference gradient checking at float64."""

import numpy as np

from tiltlab.neural import tensor as T


def relative_errors(params, make_loss, h=1e-5):
    """Max relative error per parameter between analytic and numeric grads.

    ``make_loss`` rebuilds the loss from current parameter data; parameters
    must be float64 for the tolerances to be meaningful. The noise floor
    (1e-6) absorbs finite-difference round-off on structurally-zero
    gradients.
    """
    loss = make_loss()
    for p in params:
        p.zero_grad()
    T.backward(loss, params=list(params))
    errors = {}
    for idx, p in enumerate(params):
        analytic = p.grad.copy()
        flat = p.data.reshape(-1)
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(make_loss().data)
            flat[i] = orig - h
            down = float(make_loss().data)
            flat[i] = orig
            numeric[i] = (up - down) / (2 * h)
        numeric = numeric.reshape(p.data.shape)
        denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
        errors[idx] = float(np.max(np.abs(analytic - numeric) / denom))
        p.zero_grad()
    return errors


def assert_grads_match(params, make_loss, tol=1e-3, h=1e-5):
    errors = relative_errors(params, make_loss, h=h)
    worst = max(errors.values())
    assert worst < tol, f"worst relative gradient error {worst} >= {tol}: {errors}"
