"""
Synthetic matrix completion instances and the error metrics used to score reconstructions.

Random streams: the instance seed feeds ``numpy.random.SeedSequence`` which is split into four substreams, in
order - left factor, right factor, noise, mask. Changing e.g. p never changes the factors or the noise.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from optspace.formats import kv_format, mm_format
from optspace.mc_errors import DimensionError
from optspace.mc_obsmat import ObservedMatrix, complement_mask, read_observed, write_observed
from optspace.mc_theory import ModelParams
from optspace.mc_utils import fmt_float, fmt_floats, logger, parse_floats

MASK_KINDS = ("bernoulli", "fixed")


@dataclass
class SynthInstance:
    """Ground truth M, noise W and the observed part of N = M + W.

    ``U`` and ``V`` are kept for spiked instances only (normalized so U^T U = m I, V^T V = n I).
    """

    M: np.ndarray
    W: np.ndarray
    observed: ObservedMatrix
    params: ModelParams
    seed: int
    r: int
    kind: str = "recipe"
    U: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None

    @property
    def m(self) -> int:
        return self.M.shape[0]

    @property
    def n(self) -> int:
        return self.M.shape[1]

    @property
    def N(self) -> np.ndarray:
        return self.M + self.W

    @property
    def signal_variance(self) -> float:
        """Var(M_ij) of the generating model: r for the recipe, ||Sigma||_F^2 for spiked instances."""
        if self.kind == "spiked":
            return float(np.sum(np.square(self.params.sigma_diag)))
        return float(self.r)

    @property
    def snr(self) -> float:
        if self.params.sigma2 == 0:
            return float("inf")
        return sigma2_to_snr(self.params.sigma2, self.signal_variance, self.m, self.n)


def _check_shape(m: int, n: int, r: int) -> None:
    if m < 1 or n < 1 or r < 1:
        raise DimensionError(f"Dimensions must be positive, got m={m} n={n} r={r}")
    if r > min(m, n):
        raise DimensionError(f"Rank {r} exceeds min(m, n) = {min(m, n)}")


def _check_noise(sigma2: float, p: float) -> None:
    if sigma2 < 0:
        raise ValueError(f"Noise scale must be nonnegative, got {sigma2}")
    if not 0 < p <= 1:
        raise ValueError(f"Observation probability must be in (0, 1], got {p}")


def _streams(seed: int) -> Sequence[np.random.Generator]:
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(4)]


def _noise(rng: np.random.Generator, m: int, n: int, sigma2: float) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(sigma2 * np.sqrt(m * n)), size=(m, n))


def _mask(rng: np.random.Generator, m: int, n: int, p: float, mask: str) -> np.ndarray:
    if mask == "bernoulli":
        return rng.random((m, n)) < p
    if mask == "fixed":
        chosen = np.zeros(m * n, dtype=bool)
        chosen[rng.choice(m * n, size=int(np.floor(p * m * n + 0.5)), replace=False)] = True
        return chosen.reshape(m, n)
    raise ValueError(f"Mask kind {mask} not supported - use one of {MASK_KINDS}")


def generate(m: int, n: int, r: int, sigma2: float, p: float, seed: int, mask: str = "bernoulli") -> SynthInstance:
    """Draw an instance: M = U_bar V_bar^T with standard normal factors, W_ij ~ N(0, sigma^2 sqrt(mn)).

    :param m: rows.
    :param n: columns.
    :param r: rank of M.
    :param sigma2: noise scale.
    :param p: observation probability (fixed masks observe round(p mn) entries).
    :param seed: instance seed.
    :param mask: bernoulli or fixed.
    """
    _check_shape(m, n, r)
    _check_noise(sigma2, p)
    rng_u, rng_v, rng_w, rng_mask = _streams(seed)
    truth = rng_u.standard_normal((m, r)) @ rng_v.standard_normal((n, r)).T
    noise = _noise(rng_w, m, n, sigma2)
    observed = ObservedMatrix.from_dense_mask(_mask(rng_mask, m, n, p, mask), truth + noise)
    sigma = np.linalg.svd(truth, compute_uv=False)[:r] / np.sqrt(m * n)
    params = ModelParams(tuple(sigma), sigma2, p, m / n)
    logger.debug("Generated %dx%d rank %d instance, seed %d, %d observed", m, n, r, seed, observed.nnz)
    return SynthInstance(M=truth, W=noise, observed=observed, params=params, seed=seed, r=r)


def generate_spiked(
    m: int, n: int, sigma_diag: Sequence[float], sigma2: float, p: float, seed: int, mask: str = "bernoulli"
) -> SynthInstance:
    """Draw an instance with prescribed normalized spectrum: M = U diag(Sigma) V^T, U^T U = m I, V^T V = n I.

    :param sigma_diag: Sigma_1 >= ... >= Sigma_r > 0.
    """
    sigma = np.asarray(sigma_diag, dtype=float)
    r = sigma.size
    _check_shape(m, n, r)
    _check_noise(sigma2, p)
    params = ModelParams(tuple(sigma), sigma2, p, m / n)
    rng_u, rng_v, rng_w, rng_mask = _streams(seed)
    left = np.linalg.qr(rng_u.standard_normal((m, r)))[0] * np.sqrt(m)
    right = np.linalg.qr(rng_v.standard_normal((n, r)))[0] * np.sqrt(n)
    truth = (left * sigma) @ right.T
    noise = _noise(rng_w, m, n, sigma2)
    observed = ObservedMatrix.from_dense_mask(_mask(rng_mask, m, n, p, mask), truth + noise)
    return SynthInstance(M=truth, W=noise, observed=observed, params=params, seed=seed, r=r, kind="spiked", U=left, V=right)


def snr_to_sigma2(snr: float, signal_variance: float, m: int, n: int) -> float:
    """Noise scale for a target SNR = sqrt(Var(M_ij) / Var(W_ij)).

    :param signal_variance: Var(M_ij), r for recipe instances and ||Sigma||_F^2 for spiked ones.
    """
    if snr <= 0:
        raise ValueError(f"SNR must be positive, got {snr}")
    return signal_variance / (snr**2 * np.sqrt(m * n))


def sigma2_to_snr(sigma2: float, signal_variance: float, m: int, n: int) -> float:
    if sigma2 <= 0:
        raise ValueError(f"Noise scale must be positive, got {sigma2}")
    return float(np.sqrt(signal_variance / (sigma2 * np.sqrt(m * n))))


def _ratio(numerator: float, denominator: float, what: str) -> float:
    if denominator == 0:
        raise ValueError(f"{what}: reference norm is zero")
    return float(numerator / denominator)


def test_error(M_true: np.ndarray, M_hat: np.ndarray, mask: ObservedMatrix) -> float:
    """||P_E-perp(M_true - M_hat)||^2 / ||P_E-perp(M_true)||^2 over the unobserved positions."""
    M_true, M_hat = np.asarray(M_true), np.asarray(M_hat)
    if M_true.shape != mask.shape or M_hat.shape != mask.shape:
        raise DimensionError(f"Shapes {M_true.shape}, {M_hat.shape} do not match mask {mask.shape}")
    hidden = complement_mask(mask)
    if not hidden.any():
        raise DimensionError("Test error undefined - every entry is observed")
    return _ratio(np.sum((M_true - M_hat)[hidden] ** 2), np.sum(M_true[hidden] ** 2), "Test error")


test_error.__test__ = False


def train_error(N_obs: ObservedMatrix, M_hat: np.ndarray) -> float:
    """||P_E(N - M_hat)||^2 / ||P_E(N)||^2 over the observed positions."""
    M_hat = np.asarray(M_hat)
    if M_hat.shape != N_obs.shape:
        raise DimensionError(f"Shape {M_hat.shape} does not match observations {N_obs.shape}")
    if N_obs.nnz == 0:
        raise DimensionError("Train error undefined - nothing observed")
    residual = N_obs.values - M_hat[N_obs.rows, N_obs.cols]
    return _ratio(np.sum(residual**2), np.sum(N_obs.values**2), "Train error")


def rel_fro_error(M_true: np.ndarray, M_hat: np.ndarray) -> float:
    """||M_hat - M_true||_F^2 / ||M_true||_F^2."""
    M_true, M_hat = np.asarray(M_true), np.asarray(M_hat)
    if M_true.shape != M_hat.shape:
        raise DimensionError(f"Shapes {M_true.shape} and {M_hat.shape} differ")
    return _ratio(np.sum((M_hat - M_true) ** 2), np.sum(M_true**2), "Relative error")


def save_instance(instance: SynthInstance, directory: Union[str, Path]) -> Path:
    """Write M, W (array files), observed entries (coordinate file) and an instance.cfg sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    mm_format.write_array(directory / "M.mtx", instance.M)
    mm_format.write_array(directory / "W.mtx", instance.W)
    write_observed(instance.observed, directory / "observed.mtx")
    if instance.U is not None:
        mm_format.write_array(directory / "U.mtx", instance.U)
        mm_format.write_array(directory / "V.mtx", instance.V)
    params = instance.params
    snr = "inf" if params.sigma2 == 0 else fmt_float(instance.snr)
    kv_format.write_kv(
        directory / "instance.cfg",
        [
            ("kind", instance.kind),
            ("m", instance.m),
            ("n", instance.n),
            ("r", instance.r),
            ("sigma2", fmt_float(params.sigma2)),
            ("p", fmt_float(params.p)),
            ("seed", instance.seed),
            ("snr", snr),
            ("alpha", fmt_float(params.alpha)),
            ("sigma_diag", fmt_floats(params.sigma_diag)),
        ],
    )
    return directory


def load_instance(directory: Union[str, Path]) -> SynthInstance:
    directory = Path(directory)
    meta = {key: values[-1] for key, values in kv_format.read_kv(directory / "instance.cfg").items()}
    params = ModelParams(
        tuple(parse_floats(meta["sigma_diag"])), float(meta["sigma2"]), float(meta["p"]), float(meta["alpha"])
    )
    spiked = (directory / "U.mtx").exists()
    return SynthInstance(
        M=mm_format.read_array(directory / "M.mtx"),
        W=mm_format.read_array(directory / "W.mtx"),
        observed=read_observed(directory / "observed.mtx"),
        params=params,
        seed=int(meta["seed"]),
        r=int(meta["r"]),
        kind=meta.get("kind", "recipe"),
        U=mm_format.read_array(directory / "U.mtx") if spiked else None,
        V=mm_format.read_array(directory / "V.mtx") if spiked else None,
    )
