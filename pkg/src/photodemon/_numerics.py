"""Summation kernels for alternating binomial sums and their product forms.

Two routes evaluate the finite differences that appear in the click POVM:

* ``alternating_binomial_sum`` expands the difference term by term and
  accumulates with Neumaier compensation. Cheap, but the terms cancel, so the
  absolute error scales with ``sum_j C(m, j) |g(j)|``.
* ``complete_homogeneous`` supplies the cancellation-free product form. The
  m-th difference of ``x**n`` over equispaced nodes is
  ``m! h**m * h_{n-m}(x_0..x_m)`` and that of ``(c - x)**-(n+1)`` is
  ``m! h**m * prod(y_i) * h_n(y_0..y_m)`` with ``y_i = 1/(c - x_i)``, where
  ``h_k`` is the complete homogeneous symmetric polynomial. Every term is
  positive.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import lfilter


def compensated_sum(terms: np.ndarray, axis: int = 0) -> np.ndarray:
    """Neumaier-compensated sum of ``terms`` along ``axis``."""
    terms = np.moveaxis(np.asarray(terms, dtype=float), axis, 0)
    total = np.zeros(terms.shape[1:])
    carry = np.zeros(terms.shape[1:])
    for term in terms:
        new = total + term
        big = np.abs(total) >= np.abs(term)
        carry += np.where(big, (total - new) + term, (term - new) + total)
        total = new
    return total + carry


def binomial_signs(m: int) -> np.ndarray:
    """Coefficients ``C(m, j) (-1)**(m - j)`` for ``j = 0..m``."""
    return np.array([math.comb(m, j) * (-1) ** (m - j) for j in range(m + 1)], dtype=float)


def alternating_binomial_sum(values: np.ndarray) -> np.ndarray:
    """Return ``sum_j C(m, j) (-1)**(m-j) values[j]`` with ``m = len(values) - 1``.

    ``values`` may carry trailing axes; the sum runs over the first one.
    """
    values = np.asarray(values, dtype=float)
    m = values.shape[0] - 1
    coeffs = binomial_signs(m).reshape((-1,) + (1,) * (values.ndim - 1))
    return compensated_sum(coeffs * values, axis=0)


def alternating_error_bound(values: np.ndarray) -> np.ndarray:
    """A-priori round-off bound for ``alternating_binomial_sum(values)``."""
    values = np.asarray(values, dtype=float)
    m = values.shape[0] - 1
    coeffs = np.abs(binomial_signs(m)).reshape((-1,) + (1,) * (values.ndim - 1))
    return 4 * np.finfo(float).eps * np.sum(coeffs * np.abs(values), axis=0)


def complete_homogeneous(nodes, degree: int) -> np.ndarray:
    """Complete homogeneous symmetric polynomials ``h_0..h_degree`` of ``nodes``.

    Nodes are added one at a time through ``H_k <- H_k + y * H_{k-1}``, a
    first-order recursion with non-negative coefficients for non-negative
    nodes, so no cancellation occurs.
    """
    nodes = np.asarray(nodes, dtype=float)
    if degree < 0:
        return np.zeros(0)
    with np.errstate(under="ignore"):
        h = nodes[0] ** np.arange(degree + 1, dtype=float)
        for y in nodes[1:]:
            h = lfilter([1.0], [1.0, -y], h)
    return h


def log_falling_factorial(n: int, m: int) -> float:
    """``log(n! / (n - m)!)``, i.e. ``log(C(n, m) m!)``."""
    return math.lgamma(n + 1) - math.lgamma(n - m + 1)
