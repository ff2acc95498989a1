"""Dense linear-algebra helpers with singularity guards.

Solves use LAPACK LU with partial pivoting via numpy; the reciprocal
condition number is the exact sigma_min / sigma_max ratio, cheap at the
library's design scale (n, m <= ~100).
"""

from __future__ import annotations

import numpy as np

from .errors import SingularJacobianError

# Reciprocal-condition threshold below which a matrix counts as singular.
RCOND_FLOOR = 1e-12


def rcond(mat: np.ndarray) -> float:
    """Reciprocal 2-norm condition number, 0.0 for an exactly zero matrix."""
    s = np.linalg.svd(np.asarray(mat, dtype=float), compute_uv=False)
    if s[0] == 0.0:
        return 0.0
    return float(s[-1] / s[0])


def solve_checked(mat: np.ndarray, rhs: np.ndarray, t=None, x=None) -> np.ndarray:
    """Solve ``mat @ v = rhs``, raising ``SingularJacobianError`` when rcond < 1e-12."""
    rc = rcond(mat)
    if rc < RCOND_FLOOR:
        raise SingularJacobianError(
            f"matrix is singular or ill-conditioned (rcond={rc:.3e})",
            t=t, x=x, rcond=rc,
        )
    return np.linalg.solve(mat, rhs)


def invert_checked(mat: np.ndarray, t=None, x=None) -> np.ndarray:
    """Inverse of a square matrix with the same rcond guard as ``solve_checked``."""
    rc = rcond(mat)
    if rc < RCOND_FLOOR:
        raise SingularJacobianError(
            f"matrix is singular or ill-conditioned (rcond={rc:.3e})",
            t=t, x=x, rcond=rc,
        )
    return np.linalg.inv(mat)
