"""
Operator norm estimation.

Small operators are densified and handed to LAPACK. Larger ones go
through power iteration on the Gram operator `A^H A`, applied
matrix-free through a `scipy.sparse.linalg.LinearOperator`.
"""
from dataclasses import dataclass
from logging import getLogger
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from rokhlindim.errors import ParameterError

lg = getLogger(__name__)

__all__ = ['NormEstimate', 'operator_norm', 'start_vector']

NormMethod = Literal['auto', 'dense', 'power']


@dataclass
class NormEstimate:
    """
    Attributes
    ----------
    value : float
        Estimated spectral norm
    iterations : int
        Power iterations performed (0 for dense)
    converged : bool
        Relative change fell below the tolerance
    method : {'dense', 'power'}
    """

    value: float
    iterations: int = 0
    converged: bool = True
    method: str = 'dense'

    def __float__(self) -> float:
        return float(self.value)

    def to_json(self) -> dict:
        return {
            'value': float(self.value),
            'iterations': self.iterations,
            'converged': self.converged,
            'method': self.method,
        }


def start_vector(size: int, seedless: bool = False) -> np.ndarray:
    """
    Initial vector of the power iteration.

    A fixed-seed Gaussian vector by default; a deterministic ramp when
    `seedless` is set.
    """
    if seedless:
        x = np.linspace(1.0, 2.0, size) + 1j * np.linspace(0.5, -0.5, size)
    else:
        rng = np.random.default_rng(0)
        x = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return x / np.linalg.norm(x)


def _dense(op) -> np.ndarray | None:
    if isinstance(op, np.ndarray):
        return op
    if sp.issparse(op):
        return op.toarray()
    return None


def operator_norm(
    op,
    *,
    max_iter: int = 200,
    tol: float = 1e-10,
    dense_threshold: int = 1024,
    method: NormMethod = 'auto',
    seedless: bool = False,
) -> NormEstimate:
    """
    Spectral norm of a matrix or linear operator

    Parameters
    ----------
    op : ndarray | sparse matrix | LinearOperator
        Operator
    max_iter : int
        Largest number of power iterations
    tol : float
        Relative change in the Gram eigenvalue that stops the iteration
    dense_threshold : int
        In 'auto' mode, operators with both dimensions at most this
        size are densified
    method : {'auto', 'dense', 'power'}
        Estimation method
    seedless : bool
        Use a deterministic ramp as start vector

    Returns
    -------
    NormEstimate
    """
    if method not in ('auto', 'dense', 'power'):
        raise ParameterError(f'Unknown norm method: {method!r}')
    shape = op.shape
    if 0 in shape:
        return NormEstimate(0.0)

    dense = _dense(op)
    if method == 'dense' or (
        method == 'auto' and max(shape) <= dense_threshold
    ):
        if dense is None:
            dense = op @ np.eye(shape[1])
        return NormEstimate(float(np.linalg.norm(dense, 2)))

    A = aslinearoperator(op) if not isinstance(op, LinearOperator) else op
    x = start_vector(shape[1], seedless)
    previous = None
    value = 0.0
    converged = False
    change = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        y = A.rmatvec(A.matvec(x))
        value = float(np.linalg.norm(y))
        if value == 0:
            converged = True
            break
        x = y / value
        if previous is not None:
            change = abs(value - previous) / previous
        if change < tol:
            converged = True
            break
        previous = value
    if not converged:
        lg.warning(
            f'power iteration stopped after {max_iter} iterations '
            f'(relative change {change:.3g})'
        )
    lg.debug(f'power iteration: {it} iterations, norm {np.sqrt(value):.6g}')
    return NormEstimate(float(np.sqrt(value)), it, converged, 'power')
