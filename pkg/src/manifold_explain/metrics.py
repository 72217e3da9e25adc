"""Regression fidelity metrics."""

import numpy as np

from manifold_explain.errors import ValidationError


def _pair(y_true, y_pred, min_len):
    a = np.asarray(y_true, dtype=float).ravel()
    b = np.asarray(y_pred, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValidationError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < min_len:
        raise ValidationError(f"need at least {min_len} values, got {a.size}")
    return a, b


def mse(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred, 1)
    d = a - b
    return float(d @ d / d.size)


def r2(y_true, y_pred) -> float:
    """Coefficient of determination ``1 - SSE/SST``."""
    a, b = _pair(y_true, y_pred, 2)
    dev = a - a.mean()
    sst = float(dev @ dev)
    if sst == 0.0:
        raise ValidationError("R^2 is undefined for constant y_true")
    d = a - b
    return 1.0 - float(d @ d) / sst
