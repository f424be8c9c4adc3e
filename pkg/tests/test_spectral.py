"""
Truncated SVD, spectral estimate and Soft-Impute tests.
"""
import logging
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg

from optspace.mc_errors import DimensionError
from optspace.mc_obsmat import ObservedMatrix, trim
from optspace.mc_spectral import (
    Factorization,
    lambda_to_shrinkage,
    load_factorization,
    provenance_hash,
    reconstruct,
    save_factorization,
    shrinkage_to_lambda,
    soft_impute_baseline,
    spectral_estimate,
    surrogate_cost,
    truncated_svd,
)
from optspace.mc_synth import SynthInstance

logger = logging.getLogger("optspace")


def _dense_obs(dense: np.ndarray) -> ObservedMatrix:
    return ObservedMatrix.from_dense_mask(np.ones(dense.shape, dtype=bool), dense)


def _random_sparse(m: int, n: int, density: float, seed: int) -> ObservedMatrix:
    rng = np.random.default_rng(seed)
    return ObservedMatrix.from_dense_mask(rng.random((m, n)) < density, rng.standard_normal((m, n)))


def _random_frame(rng: np.random.Generator, size: int, r: int) -> np.ndarray:
    return np.linalg.qr(rng.standard_normal((size, r)))[0]


def test_shrinkage() -> None:
    """t = 1 / (1 + lambda) and back."""
    logger.info(test_shrinkage.__doc__.strip())

    assert lambda_to_shrinkage(0) == 1
    assert lambda_to_shrinkage(1) == 0.5
    assert lambda_to_shrinkage(-0.5) == 2
    assert shrinkage_to_lambda(0.25) == pytest.approx(3)
    with pytest.raises(ValueError):
        lambda_to_shrinkage(-1)
    with pytest.raises(ValueError):
        shrinkage_to_lambda(0)


def test_truncated_svd_small() -> None:
    """Diagonal and rank one inputs."""
    logger.info(test_truncated_svd_small.__doc__.strip())

    svd = truncated_svd(_dense_obs(np.diag([3.0, 2.0, 1.0])), 2)
    assert svd.converged
    assert svd.singulars == pytest.approx([3, 2])
    assert np.abs(svd.left) == pytest.approx(np.eye(3)[:, :2], abs=1e-8)
    assert np.abs(svd.right) == pytest.approx(np.eye(3)[:, :2], abs=1e-8)

    u, v = np.array([1.0, 2.0, 2.0, 0.0]), np.array([3.0, 0.0, 4.0])
    svd = truncated_svd(_dense_obs(np.outer(u, v)), 2)
    assert svd.singulars[0] == pytest.approx(15)
    assert svd.singulars[1] == pytest.approx(0, abs=1e-8)


def test_truncated_svd_oracle() -> None:
    """Random sparse 50x40 matrix against the dense SVD."""
    logger.info(test_truncated_svd_oracle.__doc__.strip())

    obs = _random_sparse(50, 40, 0.3, seed=1)
    svd = truncated_svd(obs, 5, seed=3)
    left, singulars, right_t = np.linalg.svd(obs.to_dense())
    assert svd.converged
    assert svd.singulars == pytest.approx(singulars[:5], abs=1e-8)
    assert np.max(scipy.linalg.subspace_angles(svd.left, left[:, :5])) < 1e-6
    assert np.max(scipy.linalg.subspace_angles(svd.right, right_t[:5].T)) < 1e-6
    assert np.all(np.diff(svd.singulars) <= 0)

    again = truncated_svd(obs, 5, seed=3)
    assert np.array_equal(again.left, svd.left)


def test_truncated_svd_errors() -> None:
    """Invalid rank and zero input are rejected, an exhausted budget is reported."""
    logger.info(test_truncated_svd_errors.__doc__.strip())

    obs = _random_sparse(10, 8, 0.5, seed=2)
    with pytest.raises(DimensionError):
        truncated_svd(obs, 9)
    with pytest.raises(DimensionError):
        truncated_svd(obs, 0)
    with pytest.raises(DimensionError):
        truncated_svd(obs.with_values(np.zeros(obs.nnz)), 2)

    svd = truncated_svd(_random_sparse(80, 70, 0.3, seed=4), 5, tol=1e-30, max_iters=2)
    assert not svd.converged
    assert svd.iterations == 2


def test_spectral_estimate() -> None:
    """The core is the shrunk diagonal of top singular values."""
    logger.info(test_spectral_estimate.__doc__.strip())

    obs = _random_sparse(30, 25, 0.4, seed=5)
    plain = spectral_estimate(obs, 3, 0.0)
    halved = spectral_estimate(obs, 3, 1.0)
    singulars = np.linalg.svd(obs.to_dense(), compute_uv=False)[:3]
    assert np.diag(plain.S) == pytest.approx(singulars)
    assert halved.S == pytest.approx(plain.S / 2)
    assert plain.is_orthonormal()
    for lam in (-0.5, 0.3, 4.0):
        shrunk = spectral_estimate(obs, 3, lam)
        assert np.linalg.norm(shrunk.S) == pytest.approx(np.linalg.norm(plain.S) / (1 + lam))
    with pytest.raises(ValueError):
        spectral_estimate(obs, 3, -1.0)


def test_spectral_estimate_core_optimal() -> None:
    """With the frames fixed the core minimizes the surrogate cost and scales as 1 / (1 + lambda)."""
    logger.info(test_spectral_estimate_core_optimal.__doc__.strip())

    for seed in range(10):
        obs = _random_sparse(20, 15, 0.5, seed=seed)
        dense = obs.to_dense()
        plain = spectral_estimate(obs, 3, 0.0)
        for lam in (0.0, 0.5, 2.0):
            estimate = spectral_estimate(obs, 3, lam)
            assert np.array_equal(estimate.X, plain.X) and np.array_equal(estimate.Y, plain.Y)
            # Least squares over vec(S): vec(X S Y^T) = (Y kron X) vec(S), the penalty as sqrt(lambda) I rows.
            system = np.vstack([np.kron(estimate.Y, estimate.X), np.sqrt(lam) * np.eye(9)])
            target = np.concatenate([dense.ravel(order="F"), np.zeros(9)])
            brute = np.linalg.lstsq(system, target, rcond=None)[0].reshape(3, 3, order="F")
            assert estimate.S == pytest.approx(brute, abs=1e-8)
            assert estimate.S * (1 + lam) == pytest.approx(plain.S, rel=1e-14, abs=1e-14)
            assert np.linalg.norm(estimate.S) == pytest.approx(np.linalg.norm(plain.S) / (1 + lam), rel=1e-14)

    rng = np.random.default_rng(6)
    obs = _dense_obs(rng.standard_normal((6, 6)))
    lam = 0.3
    estimate = spectral_estimate(obs, 2, lam)
    best = surrogate_cost(obs, estimate, lam)
    for _ in range(20):
        other = Factorization(estimate.X, estimate.S + 1e-3 * rng.standard_normal((2, 2)), estimate.Y)
        assert surrogate_cost(obs, other, lam) >= best


def test_spectral_local_optimality() -> None:
    """Random orthonormal perturbations of the frames never lower the surrogate cost."""
    logger.info(test_spectral_local_optimality.__doc__.strip())

    rng = np.random.default_rng(7)
    obs = _random_sparse(20, 15, 0.5, seed=7)
    for lam in (0.0, 0.5):
        estimate = spectral_estimate(obs, 3, lam)
        best = surrogate_cost(obs, estimate, lam)
        for _ in range(100):
            x = np.linalg.qr(estimate.X + 0.05 * rng.standard_normal(estimate.X.shape))[0]
            y = np.linalg.qr(estimate.Y + 0.05 * rng.standard_normal(estimate.Y.shape))[0]
            core = x.T @ obs.to_dense() @ y / (1 + lam)
            assert surrogate_cost(obs, Factorization(x, core, y), lam) >= best - 1e-10


def test_reconstruct() -> None:
    """X S Y^T."""
    logger.info(test_reconstruct.__doc__.strip())

    rng = np.random.default_rng(8)
    x, y = _random_frame(rng, 5, 2), _random_frame(rng, 4, 2)
    assert not reconstruct(Factorization(x, np.zeros((2, 2)), y)).any()

    f = Factorization(np.eye(2), np.array([[2.0, 1.0], [0.0, 3.0]]), np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.array_equal(reconstruct(f), np.array([[1.0, 2.0], [3.0, 0.0]]))

    dense = rng.standard_normal((7, 3)) @ rng.standard_normal((3, 6))
    left, singulars, right_t = np.linalg.svd(dense)
    f = Factorization(left[:, :3], np.diag(singulars[:3]), right_t[:3].T)
    assert np.max(np.abs(reconstruct(f) - dense)) < 1e-10


def _soft_impute_oracle(obs: ObservedMatrix, lambda_nn: float, iterations: int) -> np.ndarray:
    observed = obs.mask()
    data = obs.to_dense()
    estimate = np.zeros(obs.shape)
    for _ in range(iterations):
        filled = data * observed + estimate * ~observed
        u, s, vt = np.linalg.svd(filled)
        estimate = u[:, : s.size] @ np.diag(np.maximum(s - lambda_nn, 0)) @ vt[: s.size]
    return estimate


def test_soft_impute() -> None:
    """Soft-Impute limits and an independent dense iteration."""
    logger.info(test_soft_impute.__doc__.strip())

    rng = np.random.default_rng(9)
    dense = rng.standard_normal((8, 2)) @ rng.standard_normal((2, 8))
    full = _dense_obs(dense)

    top = np.linalg.svd(dense, compute_uv=False)[0]
    assert not soft_impute_baseline(full, top + 1).any()
    assert soft_impute_baseline(full, 0.0) == pytest.approx(dense, abs=1e-10)

    half = ObservedMatrix.from_dense_mask(rng.random((8, 8)) < 0.5, dense)
    estimate = soft_impute_baseline(half, 1.0, tol=1e-12, max_iters=5000)
    assert estimate == pytest.approx(_soft_impute_oracle(half, 1.0, 5000), abs=1e-6)

    with pytest.raises(DimensionError):
        soft_impute_baseline(ObservedMatrix.empty(3, 3), 1.0)
    with pytest.raises(ValueError):
        soft_impute_baseline(full, -1.0)


def test_factorization_files(tmp_path: Path, small_instance: SynthInstance) -> None:
    """Factorizations survive a save and load with their manifest."""
    logger.info(test_factorization_files.__doc__.strip())

    obs = small_instance.observed
    f = spectral_estimate(trim(obs), 2, 0.25)
    provenance = provenance_hash(obs, rank=2, lam=0.25)
    assert provenance == provenance_hash(obs, lam=0.25, rank=2)
    assert provenance != provenance_hash(obs, rank=3, lam=0.25)

    save_factorization(f, tmp_path, 0.25, provenance)
    loaded, lam, stored = load_factorization(tmp_path)
    assert np.array_equal(loaded.X, f.X)
    assert np.array_equal(loaded.S, f.S)
    assert np.array_equal(loaded.Y, f.Y)
    assert lam == 0.25
    assert stored == provenance
