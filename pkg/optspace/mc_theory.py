"""
Closed form large system predictions for the spectral step.

Model: N = U Sigma V^T + W with U^T U = m I, V^T V = n I, W_ij of variance sqrt(mn) sigma^2, each entry observed
with probability p, alpha = m / n. Singular values of the observed matrix are reported divided by n.

A direction i is recoverable iff Sigma_i^2 > sigma^2 / p. At equality it counts as below threshold.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from optspace.mc_errors import TheoryError


@dataclass(frozen=True)
class ModelParams:
    """Spectral description of the ground truth and of the sampling.

    :param sigma_diag: normalized singular values Sigma_1 >= ... >= Sigma_r > 0.
    :param sigma2: noise scale sigma^2 (entry variance is sqrt(mn) sigma^2).
    :param p: observation probability.
    :param alpha: aspect ratio m / n.
    :param m_max: entry bound, informational only.
    """

    sigma_diag: Tuple[float, ...]
    sigma2: float
    p: float
    alpha: float = 1.0
    m_max: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma_diag", tuple(float(s) for s in np.atleast_1d(self.sigma_diag)))
        self.validate()

    def validate(self) -> None:
        sigma = np.array(self.sigma_diag)
        if sigma.size == 0 or (sigma <= 0).any():
            raise TheoryError(f"Sigma must be nonempty and positive, got {self.sigma_diag}")
        if (np.diff(sigma) > 0).any():
            raise TheoryError(f"Sigma must be nonincreasing, got {self.sigma_diag}")
        if not 0 < self.p <= 1:
            raise TheoryError(f"Observation probability must be in (0, 1], got {self.p}")
        if self.alpha <= 0:
            raise TheoryError(f"Aspect ratio must be positive, got {self.alpha}")
        if self.sigma2 < 0:
            raise TheoryError(f"Noise scale must be nonnegative, got {self.sigma2}")

    @property
    def r(self) -> int:
        return len(self.sigma_diag)

    @property
    def sigma(self) -> np.ndarray:
        return np.array(self.sigma_diag)

    def truncated(self, rank: int) -> ModelParams:
        """Parameters of the leading rank directions."""
        return ModelParams(self.sigma_diag[:rank], self.sigma2, self.p, self.alpha, self.m_max)

    def noise_ratio(self) -> np.ndarray:
        """x_i = sigma^2 / (p Sigma_i^2)."""
        return self.sigma2 / (self.p * self.sigma**2)

    def above(self) -> np.ndarray:
        return self.sigma**2 > self.sigma2 / self.p


@dataclass
class TheoryPrediction:
    """Asymptotic outputs for one parameter set."""

    z: np.ndarray
    a: np.ndarray
    b: np.ndarray
    k: int
    rel_mse: float
    bulk_edge: float
    t_star: Optional[float] = None
    lambda_star: Optional[float] = None
    shrinkage_error: Optional[float] = None
    params: Optional[ModelParams] = field(default=None, repr=False)

    def as_pairs(self) -> List[Tuple[str, str]]:
        """Ordered (key, value) pairs for key=value printing and CSV output."""

        def join(values: np.ndarray) -> str:
            return ";".join(f"{v:.17g}" for v in values)

        def opt(value: Optional[float]) -> str:
            return "" if value is None else f"{value:.17g}"

        return [
            ("k", str(self.k)),
            ("z", join(self.z)),
            ("a", join(self.a)),
            ("b", join(self.b)),
            ("rel_mse", f"{self.rel_mse:.17g}"),
            ("bulk_edge", f"{self.bulk_edge:.17g}"),
            ("t_star", opt(self.t_star)),
            ("lambda_star", opt(self.lambda_star)),
            ("shrinkage_error", opt(self.shrinkage_error)),
        ]


def threshold_rank(params: ModelParams) -> int:
    """Largest k with Sigma_k^2 > sigma^2 / p (0 if none)."""
    return int(params.above().sum())


def bulk_edge(params: ModelParams) -> float:
    """Top edge of the noise bulk, sigma sqrt(p alpha^(1/2)) (1 + sqrt(alpha))."""
    if params.alpha <= 0:
        raise TheoryError(f"Aspect ratio must be positive, got {params.alpha}")
    root = np.sqrt(params.alpha)
    return float(np.sqrt(params.sigma2) * np.sqrt(params.p * root) * (1 + root))


def _outlier_values(params: ModelParams) -> np.ndarray:
    """The above threshold singular value expression, evaluated for every index."""
    x = params.noise_ratio()
    root = np.sqrt(params.alpha)
    return params.p * params.sigma * np.sqrt(params.alpha * (x + 1 / root) * (x + root))


def predict_singular_values(params: ModelParams) -> np.ndarray:
    """Limits z_i of the top r singular values divided by n."""
    return np.where(params.above(), _outlier_values(params), bulk_edge(params))


def predict_overlaps(params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """Limits (a_i, b_i) of the left and right singular vector alignments.

    a_i^2 = (1 - x_i^2) / (1 + sqrt(alpha) x_i), b_i^2 = (1 - x_i^2) / (1 + x_i / sqrt(alpha)), zero below threshold.
    """
    x = params.noise_ratio()
    root = np.sqrt(params.alpha)
    above = params.above()
    gain = np.where(above, 1 - x**2, 0.0)
    a = np.sqrt(gain / (1 + root * x))
    b = np.sqrt(gain / (1 + x / root))
    return a, b


def predict_rel_mse(params: ModelParams) -> float:
    """Relative squared error ||M_hat - M||^2 / ||M||^2 of the optimally shrunk spectral estimate.

    Below threshold directions enter the denominator with the above threshold expression, so when 0 < k < r the
    value differs from shrinkage_rel_error at t*, which models the rank r_used estimate actually computed.
    """
    x = params.noise_ratio()
    root = np.sqrt(params.alpha)
    sigma_sq = params.sigma**2
    gain = np.sum(sigma_sq * np.clip(1 - x**2, 0, None))
    spread = np.sum(sigma_sq * (1 + root * x) * (1 + x / root))
    value = 1 - gain**2 / (np.sum(sigma_sq) * spread)
    return float(np.clip(value, 0.0, 1.0))


def rel_mse_from_overlaps(params: ModelParams, z: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Relative error recomposed from singular value and overlap limits.

    1 - (sum_k Sigma_k a_k b_k z_k)^2 / (||Sigma||^2 ||z_bar||^2) where z_bar takes the above threshold expression
    at every index.
    """
    overlap = np.sum(params.sigma * a * b * z)
    z_bar = _outlier_values(params)
    value = 1 - overlap**2 / (np.sum(params.sigma**2) * np.sum(z_bar**2))
    return float(np.clip(value, 0.0, 1.0))


def mp_density(lam: np.ndarray, alpha: float) -> np.ndarray:
    """Marcenko-Pastur density alpha sqrt((lam - c_-^2)(c_+^2 - lam)) / (2 pi lam), c_+- = 1 +- alpha^(-1/2).

    The continuous part carries mass 1 for alpha >= 1 and alpha for alpha < 1.

    :param lam: evaluation point(s).
    :param alpha: aspect ratio, positive.
    """
    if alpha <= 0:
        raise ValueError(f"Aspect ratio must be positive, got {alpha}")
    lam = np.asarray(lam, dtype=float)
    low = (1 - alpha**-0.5) ** 2
    high = (1 + alpha**-0.5) ** 2
    inside = (lam > low) & (lam < high) & (lam > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = alpha * np.sqrt((lam - low) * (high - lam)) / (2 * np.pi * lam)
    density = np.where(inside, value, 0.0)
    return density if density.ndim else float(density)


def mp_support(alpha: float) -> Tuple[float, float]:
    """Support [c_-^2, c_+^2] of the Marcenko-Pastur density."""
    if alpha <= 0:
        raise ValueError(f"Aspect ratio must be positive, got {alpha}")
    return (1 - alpha**-0.5) ** 2, (1 + alpha**-0.5) ** 2


def _rank_limited(params: ModelParams, rank_used: Optional[int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Sigma, a, b, z seen by a rank rank_used spectral estimate.

    Extra directions beyond the model rank are pure noise, at the bulk edge with zero overlap.
    """
    rank_used = params.r if rank_used is None else int(rank_used)
    if rank_used < 1:
        raise TheoryError(f"Rank must be positive, got {rank_used}")
    z = predict_singular_values(params)
    a, b = predict_overlaps(params)
    sigma = params.sigma
    if rank_used <= params.r:
        return sigma[:rank_used], a[:rank_used], b[:rank_used], z[:rank_used]
    extra = rank_used - params.r
    pad = np.zeros(extra)
    return (
        np.concatenate([sigma, pad]),
        np.concatenate([a, pad]),
        np.concatenate([b, pad]),
        np.concatenate([z, np.full(extra, bulk_edge(params))]),
    )


def theory_lambda(params: ModelParams, rank_used: Optional[int] = None) -> Tuple[float, float]:
    """Asymptotically optimal shrinkage t* and the matching lambda* = 1 / t* - 1.

    t* minimizes ||M - t X0 (X0^T N^E Y0) Y0^T||_F^2 using the singular value and overlap limits:
    t* = sqrt(alpha) sum_k Sigma_k a_k b_k z_k / ||z||^2.

    :param params: model parameters.
    :param rank_used: rank of the spectral estimate, defaults to the model rank.
    """
    if threshold_rank(params) == 0:
        raise TheoryError(
            f"No direction above threshold (sigma^2/p = {params.sigma2 / params.p:.6g} >= Sigma_1^2 = "
            f"{params.sigma_diag[0] ** 2:.6g}), observations carry no usable signal"
        )
    sigma, a, b, z = _rank_limited(params, rank_used)
    t_star = float(np.sqrt(params.alpha) * np.sum(sigma * a * b * z) / np.sum(z**2))
    if t_star <= 0:
        raise TheoryError(f"Shrinkage vanishes for rank {rank_used}")
    return t_star, 1 / t_star - 1


def shrinkage_rel_error(params: ModelParams, t: float, rank_used: Optional[int] = None) -> float:
    """Asymptotic relative error of the estimate t X0 (X0^T N^E Y0) Y0^T for any shrinkage t."""
    sigma, a, b, z = _rank_limited(params, rank_used)
    cross = np.sum(sigma * a * b * z) / np.sqrt(params.alpha)
    norm_sq = np.sum(z**2) / params.alpha
    total = np.sum(params.sigma**2)
    return float((total - 2 * t * cross + t**2 * norm_sq) / total)


def predict(params: ModelParams, rank_used: Optional[int] = None) -> TheoryPrediction:
    """Bundle every prediction for the given parameters."""
    a, b = predict_overlaps(params)
    prediction = TheoryPrediction(
        z=predict_singular_values(params),
        a=a,
        b=b,
        k=threshold_rank(params),
        rel_mse=predict_rel_mse(params),
        bulk_edge=bulk_edge(params),
        params=params,
    )
    if prediction.k:
        prediction.t_star, prediction.lambda_star = theory_lambda(params, rank_used)
        prediction.shrinkage_error = shrinkage_rel_error(params, prediction.t_star, rank_used)
    return prediction
