"""Closed-form affine step maps for linear-Gaussian models."""

import logging
from typing import Tuple

import numpy as np
import scipy.linalg

from ..errors import MatrixError
from ..models.linear_gaussian import LinearGaussianSSM
from ..transport.composition import AffineMap
from .steps import StepLayout, StepMap

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


def _symmetric_power(matrix: np.ndarray, power: float, name: str) -> np.ndarray:
    """matrix^power for a symmetric positive definite matrix, by eigendecomposition."""
    values, vectors = scipy.linalg.eigh(0.5 * (matrix + matrix.T))
    if np.any(values <= 0.0):
        raise MatrixError(f"{name} is not positive definite")
    return (vectors * values**power) @ vectors.T


def _cholesky(matrix: np.ndarray, name: str) -> np.ndarray:
    try:
        return scipy.linalg.cholesky(0.5 * (matrix + matrix.T), lower=True)
    except np.linalg.LinAlgError as exc:
        raise MatrixError(f"{name} is not symmetric positive definite") from exc


def _predict_sqrt(F: np.ndarray, C: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Lower-triangular square root of F C C^T F^T + Q from a QR factorization."""
    stacked = np.vstack([(F @ C).T, _cholesky(Q, "Q").T])
    r = scipy.linalg.qr(stacked, mode="r")[0][: F.shape[0]]
    # Fix signs so the factor has a positive diagonal.
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    return (signs[:, None] * r).T


def square_root_update(
    mean: np.ndarray,
    sqrt_cov: np.ndarray,
    H: np.ndarray,
    R: np.ndarray,
    y: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Condition N(mean, S S^T) on y = H z + N(0, R).

    Returns:
        Updated mean, lower-triangular square root of the updated covariance
        and the predictive log-density of y.
    """
    cov = sqrt_cov @ sqrt_cov.T
    S = H @ cov @ H.T + R
    L = _cholesky(S, "innovation covariance")
    innovation = np.asarray(y, dtype=float) - H @ mean
    gain = scipy.linalg.cho_solve((L, True), H @ cov).T
    joseph = np.eye(mean.size) - gain @ H
    updated = joseph @ cov @ joseph.T + gain @ R @ gain.T
    white = scipy.linalg.solve_triangular(L, innovation, lower=True)
    log_lik = float(
        -0.5 * innovation.size * LOG_2PI - np.sum(np.log(np.diag(L))) - 0.5 * white @ white
    )
    return mean + gain @ innovation, _cholesky(updated, "filtering covariance"), log_lik


def _step_map(
    index: int,
    A: np.ndarray,
    B: np.ndarray,
    a: np.ndarray,
    C: np.ndarray,
    c: np.ndarray,
    log_c: float,
) -> StepMap:
    n = C.shape[0]
    matrix = np.block([[A, B], [np.zeros((n, n)), C]])
    return StepMap(
        index=index,
        layout=StepLayout(0, n),
        transport=AffineMap(matrix, np.concatenate([a, c])),
        log_c=log_c,
    )


def initial_linear_step(
    model: LinearGaussianSSM, y0: np.ndarray, y1: np.ndarray
) -> StepMap:
    """Affine map pushing eta to pi(z_0, z_1 | y_0, y_1).

    M^1_0(x_1) = m_1 + C_1 x_1 with (m_1, C_1 C_1^T) the filtering moments of
    Z_1; M^0_0 is the conditional of Z_0 given Z_1 and y_0, with the symmetric
    square root of its covariance.
    """
    F, Q, H, R = model.F, model.Q, model.H, model.R
    m0, C0, ll0 = square_root_update(
        model.mu0, _cholesky(model.Gamma0, "Gamma0"), H, R, y0
    )
    sqrt_pred = _predict_sqrt(F, C0, Q)
    m1, C1, ll1 = square_root_update(F @ m0, sqrt_pred, H, R, y1)

    P0 = C0 @ C0.T
    P_pred = sqrt_pred @ sqrt_pred.T
    G = scipy.linalg.cho_solve((_cholesky(P_pred, "predicted covariance"), True), F @ P0).T
    conditional = P0 - G @ P_pred @ G.T
    A = _symmetric_power(conditional, 0.5, "conditional covariance of Z_0")
    a = m0 + G @ (m1 - F @ m0)
    return _step_map(0, A, G @ C1, a, C1, m1, ll0 + ll1)


def linear_gaussian_step(
    F: np.ndarray,
    Q: np.ndarray,
    H: np.ndarray,
    R: np.ndarray,
    c_prev: np.ndarray,
    C_prev: np.ndarray,
    y_next: np.ndarray,
    index: int,
) -> StepMap:
    """Closed-form step map for i >= 1 from the previous filtering square root.

    With J = I + C^T F^T Q^{-1} F C and P = -C^T F^T Q^{-1}, the blocks are
    A = J^{-1/2}, B = -J^{-1} P C_k and a = J^{-1} P (F c_{k-1} - c_k), where
    (c_k, C_k) is the square-root Kalman update with y_next.

    Raises:
        MatrixError: If Q, R or an intermediate covariance is not SPD.
    """
    n = C_prev.shape[0]
    Q_factor = (_cholesky(Q, "Q"), True)
    FC = F @ C_prev
    P = -scipy.linalg.cho_solve(Q_factor, FC).T
    J = np.eye(n) - P @ FC
    A = _symmetric_power(J, -0.5, "J")
    J_inv_P = scipy.linalg.solve(J, P, assume_a="pos")

    sqrt_pred = _predict_sqrt(F, C_prev, Q)
    c_k, C_k, log_c = square_root_update(F @ c_prev, sqrt_pred, H, R, y_next)
    B = -J_inv_P @ C_k
    a = J_inv_P @ (F @ c_prev - c_k)
    logger.debug("closed-form step %d, log c = %.10g", index, log_c)
    return _step_map(index, A, B, a, C_k, c_k, log_c)
