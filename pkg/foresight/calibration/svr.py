"""Epsilon support vector regression, dual solved by sequential minimal
optimization (two variables per step, second order working set selection).

The dual is written over 2n variables `a = [alpha; alpha*]` with labels
`z = [+1; -1]`:

    min  0.5 a'Qa + p'a   s.t.  z'a = 0,  0 <= a <= C
    Q_ij = z_i z_j K(i mod n, j mod n),  p = [eps - y; eps + y]

The regression function is `f(x) = sum_i (alpha_i - alpha*_i) K(x_i, x) + b`.
"""

import math

import numpy as np
from anystore.logging import get_logger
from sklearn.metrics.pairwise import rbf_kernel

from foresight.exceptions import NonConvergence

log = get_logger(__name__)

TAU = 1e-12


def kernel_matrix(x: np.ndarray, gamma: float) -> np.ndarray:
    return rbf_kernel(x, x, gamma=gamma)


def default_gamma(x: np.ndarray) -> float:
    """1 / (n_features * variance) of the (standardized) features"""
    variance = float(x.var())
    if variance <= 0:
        return 0.5
    return 1.0 / (x.shape[1] * variance)


def smooth_targets(x: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    """Replace binary targets by the outcome rate of the k nearest
    neighbours (including the point itself)"""
    k = min(k, len(y))
    diff = x[:, None, :] - x[None, :, :]
    distances = np.einsum("ijk,ijk->ij", diff, diff)
    neighbours = np.argsort(distances, axis=1, kind="stable")[:, :k]
    return y[neighbours].mean(axis=1)


def neighbours_for(n: int, configured: int | None) -> int:
    if configured is None:
        return math.ceil(math.sqrt(n))
    return configured


class Solution:
    def __init__(
        self, beta: np.ndarray, bias: float, iterations: int, residual: float
    ) -> None:
        self.beta = beta
        self.bias = bias
        self.iterations = iterations
        self.residual = residual


def _select(
    a: np.ndarray,
    grad: np.ndarray,
    z: np.ndarray,
    kernel: np.ndarray,
    diag: np.ndarray,
    n: int,
    C: float,
) -> tuple[int, int, float]:
    """Working pair (i, j) and the maximal KKT violation, j = -1 if the
    optimality condition holds"""
    zg = z * grad
    up = ((z > 0) & (a < C)) | ((z < 0) & (a > 0))
    low = ((z > 0) & (a > 0)) | ((z < 0) & (a < C))
    if not up.any():
        return -1, -1, 0.0
    scores = np.where(up, -zg, -np.inf)
    i = int(np.argmax(scores))
    g_max = float(scores[i])
    if not low.any():
        return i, -1, 0.0
    g_max2 = float(np.max(np.where(low, zg, -np.inf)))
    residual = g_max + g_max2
    ii = i % n
    krow = np.tile(kernel[ii], 2)
    quad = diag[ii] + np.tile(diag, 2) - 2.0 * krow
    quad = np.where(quad > 0, quad, TAU)
    grad_diff = g_max + zg
    candidates = low & (grad_diff > 0)
    if not candidates.any():
        return i, -1, residual
    obj = np.where(candidates, -(grad_diff**2) / quad, np.inf)
    j = int(np.argmin(obj))
    return i, j, residual


def _rho(a: np.ndarray, grad: np.ndarray, z: np.ndarray, C: float) -> float:
    zg = z * grad
    at_upper = a >= C
    at_lower = a <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(zg[free].mean())
    # bound variables only: midpoint of the feasible interval
    to_ub = (at_upper & (z < 0)) | (at_lower & (z > 0))
    to_lb = (at_upper & (z > 0)) | (at_lower & (z < 0))
    ub = float(zg[to_ub].min()) if to_ub.any() else math.inf
    lb = float(zg[to_lb].max()) if to_lb.any() else -math.inf
    return (ub + lb) / 2


def solve(
    kernel: np.ndarray,
    y: np.ndarray,
    C: float,
    epsilon: float,
    tol: float = 1e-6,
    max_passes: int = 10_000,
) -> Solution:
    """Solve the epsilon-SVR dual for a precomputed kernel matrix.

    Args:
        kernel: (n, n) kernel matrix of the training inputs
        y: targets
        C: box constraint
        epsilon: tube width
        tol: stop once the maximal KKT violation is below
        max_passes: iteration budget, in multiples of n

    Returns:
        dual coefficients (alpha - alpha*), bias, iterations and the final
        KKT residual
    """
    n = len(y)
    z = np.concatenate([np.ones(n), -np.ones(n)])
    a = np.zeros(2 * n)
    grad = np.concatenate([epsilon - y, epsilon + y]).astype(np.float64)
    diag = np.diag(kernel).copy()
    max_iter = max_passes * max(n, 1)

    iterations = 0
    residual = math.inf
    while True:
        i, j, residual = _select(a, grad, z, kernel, diag, n, C)
        if j < 0 or residual < tol:
            break
        if iterations >= max_iter:
            raise NonConvergence(
                f"SVR solver did not converge after {iterations} iterations",
                residual=residual,
            )
        iterations += 1
        ii, jj = i % n, j % n
        quad = kernel[ii, ii] + kernel[jj, jj] - 2.0 * kernel[ii, jj]
        if quad <= 0:
            quad = TAU
        old_i, old_j = a[i], a[j]
        if z[i] != z[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            elif a[j] > C:
                a[j] = C
                a[i] = C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            elif a[j] < 0:
                a[j] = 0.0
                a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = total
        d = z[i] * (a[i] - old_i) * kernel[ii] + z[j] * (a[j] - old_j) * kernel[jj]
        grad[:n] += d
        grad[n:] -= d

    beta = a[:n] - a[n:]
    bias = -_rho(a, grad, z, C)
    log.debug("SVR solved", n=n, iterations=iterations, residual=residual)
    return Solution(beta, bias, iterations, max(residual, 0.0))
