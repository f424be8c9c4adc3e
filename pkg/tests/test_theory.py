"""
Asymptotic prediction tests.
"""
import logging

import numpy as np
import pytest
from scipy import integrate

from optspace.mc_errors import TheoryError
from optspace.mc_theory import (
    ModelParams,
    bulk_edge,
    mp_density,
    mp_support,
    predict,
    predict_overlaps,
    predict_rel_mse,
    predict_singular_values,
    rel_mse_from_overlaps,
    shrinkage_rel_error,
    theory_lambda,
    threshold_rank,
)

logger = logging.getLogger("optspace")

ROOT2 = np.sqrt(2)


def test_params_validation() -> None:
    """Invalid parameter sets are rejected."""
    logger.info(test_params_validation.__doc__.strip())

    params = ModelParams([3, 2, 2], 0.5, 0.4, 2.0)
    assert params.r == 3
    assert params.sigma_diag == (3.0, 2.0, 2.0)
    assert params.truncated(2).sigma_diag == (3.0, 2.0)
    for bad in (
        {"sigma_diag": (1.0, 2.0)},
        {"sigma_diag": (1.0, 0.0)},
        {"sigma_diag": ()},
        {"p": 0.0},
        {"p": 1.5},
        {"alpha": 0.0},
        {"sigma2": -0.1},
    ):
        arguments = {"sigma_diag": (1.0,), "sigma2": 1.0, "p": 0.5, "alpha": 1.0}
        arguments.update(bad)
        with pytest.raises(TheoryError):
            ModelParams(**arguments)


def test_threshold_rank() -> None:
    """Directions count as recoverable strictly above sigma^2 / p."""
    logger.info(test_threshold_rank.__doc__.strip())

    assert threshold_rank(ModelParams((3.0, 2.0, 1.0), 0.0, 0.3)) == 3
    assert threshold_rank(ModelParams((2.0, 1.0), 0.75, 0.5)) == 1
    assert threshold_rank(ModelParams((2.0, 1.0), 4.0, 1.0)) == 0
    assert threshold_rank(ModelParams((2.0, 1.0), 1.0, 1.0)) == 1


def test_singular_values() -> None:
    """Singular value limits above and below threshold."""
    logger.info(test_singular_values.__doc__.strip())

    noiseless = ModelParams((3.0, 1.0), 0.0, 0.4, 4.0)
    assert predict_singular_values(noiseless) == pytest.approx([0.4 * 3 * 2, 0.4 * 1 * 2])
    assert predict_singular_values(ModelParams((3.0, 1.0), 0.0, 0.4)) == pytest.approx([1.2, 0.4])

    assert predict_singular_values(ModelParams((ROOT2,), 1.0, 1.0)) == pytest.approx([3 / ROOT2])
    assert predict_singular_values(ModelParams((0.5,), 1.0, 1.0)) == pytest.approx([2.0])

    mixed = ModelParams((2.0, 0.5), 1.0, 1.0)
    z = predict_singular_values(mixed)
    assert z[1] == pytest.approx(bulk_edge(mixed))
    assert z[0] > z[1]


def test_overlaps() -> None:
    """Overlap limits, including the aspect ratio dependence of the right overlap."""
    logger.info(test_overlaps.__doc__.strip())

    a, b = predict_overlaps(ModelParams((2.0, 1.0), 0.0, 0.7, 3.0))
    assert a == pytest.approx([1, 1])
    assert b == pytest.approx([1, 1])

    a, b = predict_overlaps(ModelParams((ROOT2,), 1.0, 1.0))
    assert a == pytest.approx([1 / ROOT2])
    assert b == pytest.approx([1 / ROOT2])

    a, b = predict_overlaps(ModelParams((1.0,), 0.5, 0.5))
    assert a[0] == 0 and b[0] == 0

    # x = 1/2, alpha = 4: a^2 = (3/4) / 2, b^2 = (3/4) / (5/4).
    a, b = predict_overlaps(ModelParams((ROOT2,), 1.0, 1.0, 4.0))
    assert a == pytest.approx([np.sqrt(3 / 8)])
    assert b == pytest.approx([np.sqrt(3 / 5)])

    a, b = predict_overlaps(ModelParams((3.0, 1.5, 0.5), 1.0, 0.8, 0.5))
    assert np.all((0 <= a) & (a <= 1)) and np.all((0 <= b) & (b <= 1))


def test_rel_mse() -> None:
    """Relative error limits."""
    logger.info(test_rel_mse.__doc__.strip())

    assert predict_rel_mse(ModelParams((3.0, 1.0), 0.0, 0.3)) == pytest.approx(0)
    assert predict_rel_mse(ModelParams((1.0, 0.5), 2.0, 1.0)) == 1
    assert predict_rel_mse(ModelParams((ROOT2,), 1.0, 1.0)) == pytest.approx(0.75)


def test_rel_mse_consistency() -> None:
    """The overlap composed form agrees with the direct form."""
    logger.info(test_rel_mse_consistency.__doc__.strip())

    for params in (
        ModelParams((ROOT2,), 1.0, 1.0),
        ModelParams((3.0, 2.0, 0.4), 0.7, 0.6, 1.0),
        ModelParams((3.0, 2.0, 0.4), 0.7, 0.6, 2.5),
        ModelParams((1.5, 1.2), 0.2, 0.3, 0.4),
    ):
        a, b = predict_overlaps(params)
        z = predict_singular_values(params)
        assert rel_mse_from_overlaps(params, z, a, b) == pytest.approx(predict_rel_mse(params), abs=1e-12)


def test_rel_mse_monotone() -> None:
    """Error grows with noise and shrinks with sampling."""
    logger.info(test_rel_mse_monotone.__doc__.strip())

    sigma = (2.0, 1.2, 0.6)
    noise = [predict_rel_mse(ModelParams(sigma, s2, 0.5, 1.5)) for s2 in np.linspace(0, 3, 31)]
    assert np.all(np.diff(noise) >= -1e-15)
    sampling = [predict_rel_mse(ModelParams(sigma, 0.5, p, 1.5)) for p in np.linspace(0.05, 1, 20)]
    assert np.all(np.diff(sampling) <= 1e-15)


def test_continuity() -> None:
    """Predictions agree on both sides of the threshold."""
    logger.info(test_continuity.__doc__.strip())

    for alpha in (0.5, 1.0, 2.0):
        edge = 1.3**2 * 0.6
        below = ModelParams((1.3,), edge * (1 + 1e-6), 0.6, alpha)
        above = ModelParams((1.3,), edge * (1 - 1e-6), 0.6, alpha)
        assert threshold_rank(below) == 0 and threshold_rank(above) == 1
        assert predict_singular_values(above) == pytest.approx(predict_singular_values(below), abs=1e-5)
        assert predict_rel_mse(above) == pytest.approx(predict_rel_mse(below), abs=1e-5)
        for left, right in zip(predict_overlaps(above), predict_overlaps(below)):
            assert left == pytest.approx(right, abs=2e-3)


def test_mp_density() -> None:
    """Marcenko-Pastur support and mass."""
    logger.info(test_mp_density.__doc__.strip())

    assert mp_support(1.0) == pytest.approx((0, 4))
    assert mp_density(4.5, 1.0) == 0
    assert mp_density(-1.0, 1.0) == 0
    assert mp_density(np.array([0.1, 5.0]), 1.0)[1] == 0
    for alpha, mass in ((1.0, 1.0), (4.0, 1.0), (0.25, 0.25)):
        low, high = mp_support(alpha)
        value, _ = integrate.quad(mp_density, low, high, args=(alpha,), limit=200)
        assert value == pytest.approx(mass, abs=1e-6)
    with pytest.raises(ValueError):
        mp_density(1.0, 0.0)


def test_bulk_edge() -> None:
    """Top edge of the noise bulk."""
    logger.info(test_bulk_edge.__doc__.strip())

    assert bulk_edge(ModelParams((1.0,), 1.0, 1.0)) == pytest.approx(2)
    assert bulk_edge(ModelParams((1.0,), 4.0, 0.25, 4.0)) == pytest.approx(2 * np.sqrt(0.5) * 3)


def test_theory_lambda() -> None:
    """Optimal shrinkage and the matching lambda."""
    logger.info(test_theory_lambda.__doc__.strip())

    assert theory_lambda(ModelParams((2.0, 1.0), 0.0, 1.0)) == pytest.approx((1, 0))
    assert theory_lambda(ModelParams((2.0, 1.0), 0.0, 0.5)) == pytest.approx((2, -0.5))
    assert theory_lambda(ModelParams((2.0, 1.0), 0.0, 0.5, 3.0)) == pytest.approx((2, -0.5))
    assert theory_lambda(ModelParams((ROOT2,), 1.0, 1.0)) == pytest.approx((1 / 3, 2))

    with pytest.raises(TheoryError):
        theory_lambda(ModelParams((1.0,), 2.0, 1.0))


def test_theory_lambda_minimizes_error() -> None:
    """t* minimizes the asymptotic shrinkage error and reaches the predicted relative error."""
    logger.info(test_theory_lambda_minimizes_error.__doc__.strip())

    for params in (ModelParams((ROOT2,), 1.0, 1.0), ModelParams((2.5, 1.5), 0.8, 0.5, 2.0)):
        t_star, _ = theory_lambda(params)
        grid = np.linspace(0.01, 3, 2000)
        errors = [shrinkage_rel_error(params, t) for t in grid]
        assert abs(grid[int(np.argmin(errors))] - t_star) < 2e-3
        assert shrinkage_rel_error(params, t_star) == pytest.approx(predict_rel_mse(params), abs=1e-12)

    params = ModelParams((2.0,), 1.0, 1.0)
    assert theory_lambda(params, rank_used=3)[0] < theory_lambda(params)[0]


def test_predict() -> None:
    """Bundled prediction and its printable pairs."""
    logger.info(test_predict.__doc__.strip())

    prediction = predict(ModelParams((2.0, 0.5), 1.0, 1.0))
    assert prediction.k == 1
    assert prediction.a[1] == prediction.b[1] == 0
    assert prediction.z[1] == pytest.approx(prediction.bulk_edge)
    assert 0 <= prediction.rel_mse <= 1
    pairs = dict(prediction.as_pairs())
    assert list(pairs) == ["k", "z", "a", "b", "rel_mse", "bulk_edge", "t_star", "lambda_star", "shrinkage_error"]
    assert pairs["k"] == "1"
    assert len(pairs["z"].split(";")) == 2

    useless = predict(ModelParams((1.0,), 2.0, 1.0))
    assert useless.k == 0
    assert useless.t_star is None
    assert dict(useless.as_pairs())["lambda_star"] == ""
    assert useless.shrinkage_error is None


def test_shrinkage_error_mixed_regime() -> None:
    """With a direction below threshold the reported shrinkage error follows the rank actually used."""
    logger.info(test_shrinkage_error_mixed_regime.__doc__.strip())

    # Sigma = (2, 0.5), sigma^2 = p = 1: x = (1/4, 4), z = (5/2, 2), a_1 b_1 = 3/4, ||Sigma||^2 = 17/4.
    params = ModelParams((2.0, 0.5), 1.0, 1.0)
    assert predict_rel_mse(params) == pytest.approx(1 - 14.0625 / 53.125)

    leading = predict(params, 1)
    assert leading.t_star == pytest.approx(0.6)
    assert leading.shrinkage_error == pytest.approx(8 / 17)
    assert leading.shrinkage_error == pytest.approx(shrinkage_rel_error(params, leading.t_star, 1), abs=1e-15)

    full = predict(params, 2)
    assert full.t_star == pytest.approx(3.75 / 10.25)
    assert full.shrinkage_error == pytest.approx(1 - 14.0625 / 43.5625)
    assert float(dict(full.as_pairs())["shrinkage_error"]) == pytest.approx(full.shrinkage_error)
    assert leading.shrinkage_error < full.shrinkage_error < full.rel_mse

    single = predict(ModelParams((ROOT2,), 1.0, 1.0))
    assert single.shrinkage_error == pytest.approx(single.rel_mse, abs=1e-12)
