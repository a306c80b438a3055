"""Complex-step differentiation helpers.

All kinematics/dynamics evaluators in this package are analytic in their
arguments, so first derivatives are computed to machine precision with a
single imaginary perturbation per column (no subtractive cancellation).
"""
from __future__ import annotations

import numpy as np

CS_EPS = 1e-20


def cstep_jacobian(f, x: np.ndarray) -> np.ndarray:
    """Jacobian of f at x, one complex evaluation per input component."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        xc = x.astype(complex)
        xc[j] += 1j * CS_EPS
        cols.append(np.imag(np.asarray(f(xc))) / CS_EPS)
    return np.stack(cols, axis=-1)
