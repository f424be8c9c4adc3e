"""
Stand alone samples for optspace package functionality.

Setup:
Nothing - every sample draws its own synthetic instance.
"""
import logging
import sys
import tempfile
from pathlib import Path

import numpy as np

from optspace.mc_harness import ExperimentConfig, run, run_optspace, select_lambda, summarize
from optspace.mc_manifold import DescentOptions
from optspace.mc_obsmat import read_observed, trim, write_observed
from optspace.mc_spectral import reconstruct, spectral_estimate
from optspace.mc_synth import generate, generate_spiked, snr_to_sigma2, test_error
from optspace.mc_theory import ModelParams, predict

logger = logging.getLogger("log")
logger.setLevel("INFO")
logger.addHandler(logging.StreamHandler(sys.stdout))

M = N = 200
RANK = 5
P = 0.3
SNR = 1.0
SEED = 2024


def complete_instance() -> None:
    """Demonstrates the full pipeline on a noisy instance."""
    sigma2 = snr_to_sigma2(SNR, RANK, M, N)
    instance = generate(M, N, RANK, sigma2, P, SEED)

    # Spectral estimate alone (trim first, shrink singular values with t = 1 / (1 + lambda)).
    spectral = spectral_estimate(trim(instance.observed), RANK, lam=0.0)
    print(f"spectral test error: {test_error(instance.M, reconstruct(spectral), instance.observed):.4f}")

    # Spectral start followed by manifold descent.
    factorization, trace = run_optspace(instance.observed, RANK, opts=DescentOptions(max_iters=100))
    print(f"OptSpace(0) test error: {test_error(instance.M, reconstruct(factorization), instance.observed):.4f}")
    print(f"descent stopped on {trace.reason} after {len(trace.records) - 1} iterations")

    # Regularized version with lambda chosen on a holdout split.
    lam, table = select_lambda(instance.observed, RANK, seed=SEED, opts=DescentOptions(max_iters=100), params=instance.params)
    for candidate, score in table:
        print(f"\tlambda {candidate:8.4f} holdout error {score:.4e}")
    factorization, _ = run_optspace(instance.observed, RANK, lam, opts=DescentOptions(max_iters=100))
    print(f"OptSpace({lam:.3f}) test error: {test_error(instance.M, reconstruct(factorization), instance.observed):.4f}")


def theory_predictions() -> None:
    """Demonstrates the asymptotic predictions against one large spiked instance."""
    params = ModelParams((2.0, 1.5, 1.0), sigma2=1.0, p=0.5)
    prediction = predict(params)
    for key, value in prediction.as_pairs():
        print(f"{key}={value}")

    instance = generate_spiked(1000, 1000, params.sigma_diag, params.sigma2, params.p, SEED)
    singulars = np.linalg.svd(instance.observed.to_dense(), compute_uv=False)[: params.r] / instance.n
    print(f"measured z: {singulars}")
    print(f"predicted z: {prediction.z}")


def files() -> None:
    """Demonstrates reading and writing observed entries."""
    instance = generate(50, 40, 2, 0.0, 0.5, SEED)
    with tempfile.TemporaryDirectory() as directory:
        path = Path(directory).joinpath("observed.mtx")
        write_observed(instance.observed, path)
        assert read_observed(path) == instance.observed


def small_sweep() -> None:
    """Demonstrates a small rank sweep."""
    config = ExperimentConfig(
        kind="sweep_rank", m=[100], n=[100], r_true=[4], rank_used=[2, 4, 6], p=[0.4], snr=[1.0], replicates=2, max_iters=50
    )
    for record in summarize(run(config)):
        print(record["method"], record["rank_used_mean"], record["test_error_mean"])


if __name__ == "__main__":
    complete_instance()
    theory_predictions()
    files()
    small_sweep()
