"""
Spectral step - truncated SVD of the sparse observed matrix, the shrunk spectral estimate and the Soft-Impute
baseline.

The shrunk estimate uses t = 1 / (1 + lambda): X0, Y0 are the top singular frames of N^E and S0 = t diag(s).
lambda may be negative (t > 1) to undo the p scaling of partial observation.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from optspace.formats import kv_format, mm_format
from optspace.mc_errors import DimensionError
from optspace.mc_obsmat import ObservedMatrix
from optspace.mc_utils import fmt_float, logger, stable_hash

ORTHONORMAL_TOL = 1e-8


@dataclass
class Factorization:
    """X S Y^T with orthonormal frames X (m x r), Y (n x r) and core S (r x r)."""

    X: np.ndarray
    S: np.ndarray
    Y: np.ndarray

    @property
    def rank(self) -> int:
        return self.S.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.X.shape[0], self.Y.shape[0]

    def orthonormality_error(self) -> float:
        """Largest ||F^T F - I||_F over the two frames."""
        eye = np.eye(self.rank)
        return max(np.linalg.norm(self.X.T @ self.X - eye), np.linalg.norm(self.Y.T @ self.Y - eye))

    def is_orthonormal(self, tol: float = ORTHONORMAL_TOL) -> bool:
        return self.orthonormality_error() <= tol


@dataclass
class SvdTriple:
    """Top singular triples, singular values nonincreasing."""

    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray
    converged: bool = True
    iterations: int = 0


def lambda_to_shrinkage(lam: float) -> float:
    if lam <= -1:
        raise ValueError(f"Regularization must be > -1, got {lam}")
    return 1 / (1 + lam)


def shrinkage_to_lambda(t: float) -> float:
    if t <= 0:
        raise ValueError(f"Shrinkage must be positive, got {t}")
    return 1 / t - 1


def fix_signs(left: np.ndarray, right: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Flip singular vector pairs so the largest magnitude entry of each left vector is positive."""
    pivots = left[np.argmax(np.abs(left), axis=0), np.arange(left.shape[1])]
    signs = np.where(pivots < 0, -1.0, 1.0)
    return left * signs, right * signs


def truncated_svd(
    obs: ObservedMatrix, r: int, tol: float = 1e-10, max_iters: int = 1000, seed: int = 0, oversample: int = 10
) -> SvdTriple:
    """Top r singular triples of N^E by block power (subspace) iteration with Rayleigh-Ritz extraction.

    Stops when every returned pair satisfies ||A^T A v - s^2 v|| <= tol s_1^2. Hitting max_iters returns the last
    iterate with ``converged`` False.

    :param obs: observed entries, not all zero.
    :param r: number of triples, at most min(m, n).
    :param tol: relative residual tolerance.
    :param max_iters: iteration budget.
    :param seed: seed of the random starting block.
    :param oversample: extra block columns beyond r.
    """
    m, n = obs.shape
    if not 1 <= r <= min(m, n):
        raise DimensionError(f"Rank {r} must be in [1, {min(m, n)}]")
    if not np.any(obs.values):
        raise DimensionError("Observed matrix is zero, singular vectors undefined")
    matrix = obs.to_sparse()
    matrix_t = matrix.T.tocsr()
    block = min(r + oversample, m, n)
    rng = np.random.default_rng(seed)
    left_basis = np.linalg.qr(matrix @ rng.standard_normal((n, block)))[0]

    converged = False
    iterations = 0
    while True:
        right_basis = np.linalg.qr(matrix_t @ left_basis)[0]
        image = matrix @ right_basis
        left_basis = np.linalg.qr(image)[0]
        u_small, singulars, vt_small = np.linalg.svd(left_basis.T @ image)
        left = left_basis @ u_small[:, :r]
        right = right_basis @ vt_small[:r].T
        singulars = singulars[:r]
        residual = matrix_t @ (matrix @ right) - right * singulars**2
        worst = float(np.max(np.linalg.norm(residual, axis=0)))
        logger.debug("Subspace iteration %d residual %.3e", iterations, worst)
        if worst <= tol * singulars[0] ** 2:
            converged = True
            break
        if iterations >= max_iters:
            break
        iterations += 1
    if not converged:
        logger.warning("Truncated SVD did not converge in %d iterations (residual %.3e)", max_iters, worst)
    left, right = fix_signs(left, right)
    return SvdTriple(left=left, singulars=singulars, right=right, converged=converged, iterations=iterations)


def spectral_estimate(
    obs_trimmed: ObservedMatrix, r: int, lam: float = 0.0, tol: float = 1e-10, max_iters: int = 1000, seed: int = 0
) -> Factorization:
    """Minimizer of 1/2 ||N^E - X S Y^T||^2 + 1/2 lambda ||S||^2 over orthonormal frames and core.

    :param obs_trimmed: trimmed observations.
    :param r: rank.
    :param lam: regularization, > -1.
    """
    shrink = lambda_to_shrinkage(lam)
    svd = truncated_svd(obs_trimmed, r, tol=tol, max_iters=max_iters, seed=seed)
    return Factorization(X=svd.left, S=np.diag(svd.singulars * shrink), Y=svd.right)


def reconstruct(f: Factorization) -> np.ndarray:
    return f.X @ f.S @ f.Y.T


def surrogate_cost(obs: ObservedMatrix, f: Factorization, lam: float) -> float:
    """1/2 ||N^E - X S Y^T||_F^2 + 1/2 lambda ||S||_F^2 for orthonormal frames."""
    projected = f.X.T @ (obs.to_sparse() @ f.Y)
    fit = obs.frobenius_norm() ** 2 - 2 * np.sum(f.S * projected) + np.sum(f.S**2)
    return float(0.5 * fit + 0.5 * lam * np.sum(f.S**2))


def soft_impute_baseline(obs: ObservedMatrix, lambda_nn: float, tol: float = 1e-6, max_iters: int = 500) -> np.ndarray:
    """Soft-Impute fixed point Z = SVT_lambda(P_E(N) + P_E-perp(Z)), started at Z = 0.

    :param obs: observed entries.
    :param lambda_nn: singular value soft threshold, >= 0.
    :param tol: stop when ||Z_new - Z||_F / max(||Z_new||_F, ||Z||_F) < tol.
    :param max_iters: iteration budget, exceeding it logs a warning and returns the last iterate.
    """
    if obs.nnz == 0:
        raise DimensionError("Soft-Impute needs at least one observation")
    if lambda_nn < 0:
        raise ValueError(f"Threshold must be nonnegative, got {lambda_nn}")
    observed = obs.mask()
    data = obs.to_dense()
    estimate = np.zeros(obs.shape)
    for iteration in range(1, max_iters + 1):
        left, singulars, right_t = np.linalg.svd(np.where(observed, data, estimate), full_matrices=False)
        shrunk = np.clip(singulars - lambda_nn, 0, None)
        updated = (left * shrunk) @ right_t
        scale = max(np.linalg.norm(updated), np.linalg.norm(estimate))
        change = np.linalg.norm(updated - estimate) / scale if scale else 0.0
        estimate = updated
        if change < tol:
            logger.debug("Soft-Impute converged after %d iterations, rank %d", iteration, int((shrunk > 0).sum()))
            return estimate
    logger.warning("Soft-Impute did not converge in %d iterations (change %.3e)", max_iters, change)
    return estimate


def provenance_hash(obs: ObservedMatrix, **settings: object) -> str:
    """Digest of the observations and the settings that produced a factorization."""
    return stable_hash(obs.shape, obs.rows, obs.cols, obs.values, sorted(settings.items()))


def save_factorization(f: Factorization, directory: Union[str, Path], lam: float, provenance: str = "") -> Path:
    """Write X, S, Y as MatrixMarket arrays plus a factorization.cfg manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    mm_format.write_array(directory / "X.mtx", f.X)
    mm_format.write_array(directory / "S.mtx", f.S)
    mm_format.write_array(directory / "Y.mtx", f.Y)
    kv_format.write_kv(
        directory / "factorization.cfg", [("r", f.rank), ("lambda", fmt_float(lam)), ("provenance", provenance)]
    )
    return directory


def load_factorization(directory: Union[str, Path]) -> Tuple[Factorization, Optional[float], str]:
    """Read a factorization written by save_factorization.

    :return: (factorization, lambda, provenance).
    """
    directory = Path(directory)
    meta = {key: values[-1] for key, values in kv_format.read_kv(directory / "factorization.cfg").items()}
    f = Factorization(
        X=mm_format.read_array(directory / "X.mtx"),
        S=mm_format.read_array(directory / "S.mtx"),
        Y=mm_format.read_array(directory / "Y.mtx"),
    )
    if f.rank != int(meta["r"]):
        raise DimensionError(f"Manifest rank {meta['r']} differs from stored core rank {f.rank}")
    lam = float(meta["lambda"]) if meta.get("lambda") else None
    return f, lam, meta.get("provenance", "")
