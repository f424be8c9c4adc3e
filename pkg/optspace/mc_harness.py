"""
Experiment runner - OptSpace pipeline, holdout lambda selection, parameter sweeps and their CSV output.

A sweep is a grid of cells (m, n, r_true, p, noise, rank_used) times replicates. Every (cell, replicate) gets its own
seed derived from the base seed, so rows are identical whatever order or process they run in.
"""
from __future__ import annotations

import csv
import hashlib
import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, fields, replace
from os import path
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from optspace import mc_theory
from optspace.formats import kv_format
from optspace.mc_errors import ExperimentError, McError, TheoryError
from optspace.mc_manifold import DescentOptions, DescentTrace, descend
from optspace.mc_obsmat import ObservedMatrix, split_holdout, trim
from optspace.mc_spectral import Factorization, reconstruct, soft_impute_baseline, spectral_estimate, truncated_svd
from optspace.mc_synth import (
    SynthInstance,
    generate,
    generate_spiked,
    rel_fro_error,
    sigma2_to_snr,
    snr_to_sigma2,
    test_error,
    train_error,
)
from optspace.mc_utils import fmt_float, fmt_floats, logger

KINDS = ("sweep_rank", "sweep_noise", "sweep_lambda", "theory_check", "single_run")
SPIKED_KINDS = ("sweep_noise", "theory_check")

LAMBDA_MULTIPLIERS = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)
LAMBDA_BRACKET = (0.25, 0.5, 1.0, 2.0, 4.0)

CELL_ERRORS = (McError, ArithmeticError, ValueError, np.linalg.LinAlgError)


#
# OptSpace pipeline.
#


@contextmanager
def _stage(name: str) -> Iterator[None]:
    """Prefix errors raised inside a pipeline stage with the stage name."""
    try:
        yield
    except (McError, np.linalg.LinAlgError) as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def run_optspace(
    obs: ObservedMatrix,
    rank_used: int,
    lambda_spectral: float = 0.0,
    lambda_descent: Optional[float] = None,
    opts: Optional[DescentOptions] = None,
    trim_factor: float = 2.0,
    seed: int = 0,
) -> Tuple[Factorization, DescentTrace]:
    """Trim, spectral estimate, manifold descent.

    :param obs: observed entries.
    :param rank_used: rank of the reconstruction.
    :param lambda_spectral: spectral step regularization, > -1.
    :param lambda_descent: descent regularization, defaults to max(lambda_spectral, 0). It overrides opts.lam.
    :param opts: descent settings, max_iters == 0 returns the spectral estimate unchanged.
    :param trim_factor: trimming threshold as multiple of the average degree.
    :param seed: seed of the truncated SVD starting block.
    """
    opts = opts or DescentOptions()
    lam = max(lambda_spectral, 0.0) if lambda_descent is None else lambda_descent
    opts = replace(opts, lam=lam)
    with _stage("trim"):
        trimmed = trim(obs, trim_factor)
    with _stage("spectral"):
        initial = spectral_estimate(trimmed, rank_used, lambda_spectral, seed=seed)
    if opts.max_iters == 0:
        return initial, DescentTrace(reason="max_iters")
    with _stage("descent"):
        return descend(initial, obs, opts)


#
# Lambda selection.
#


def default_lambda_grid(params: Optional[mc_theory.ModelParams], rank_used: Optional[int] = None) -> List[float]:
    """lambda* times {0, 1/4, 1/2, 1, 2, 4} plus 0, filtered to lambda > -1.

    Without a usable positive lambda* (no params, nothing above threshold, or lambda* <= 0) the absolute bracket
    {1/4, 1/2, 1, 2, 4} is added.
    """
    grid = {0.0}
    lambda_star = None
    if params is not None:
        try:
            lambda_star = mc_theory.theory_lambda(params, rank_used)[1]
        except TheoryError as exc:
            logger.info("No theory lambda: %s", exc)
    if lambda_star is not None:
        grid.update(lambda_star * c for c in LAMBDA_MULTIPLIERS)
    if lambda_star is None or lambda_star <= 0:
        grid.update(LAMBDA_BRACKET)
    return sorted(v for v in grid if v > -1)


def select_lambda(
    obs: ObservedMatrix,
    rank_used: int,
    lambda_grid: Optional[Sequence[float]] = None,
    holdout_fraction: float = 0.2,
    seed: int = 0,
    opts: Optional[DescentOptions] = None,
    params: Optional[mc_theory.ModelParams] = None,
    trim_factor: float = 2.0,
) -> Tuple[float, List[Tuple[float, float]]]:
    """Pick the lambda whose OptSpace fit on the train part has the smallest squared error on the holdout part.

    Ties go to the smaller lambda. Failing lambdas score inf.

    :param lambda_grid: candidates, None means default_lambda_grid(params, rank_used).
    :return: (lambda_star, [(lambda, holdout squared error)] in ascending lambda order).
    """
    grid = sorted(set(default_lambda_grid(params, rank_used) if lambda_grid is None else lambda_grid))
    if not grid:
        raise ExperimentError("Lambda grid is empty")
    train, validation = split_holdout(obs, holdout_fraction, seed)
    if validation.nnz == 0:
        raise ExperimentError(f"Holdout fraction {holdout_fraction} leaves no validation entries")
    table = []
    for lam in grid:
        try:
            factorization, _ = run_optspace(train, rank_used, lam, opts=opts, trim_factor=trim_factor, seed=seed)
            estimate = reconstruct(factorization)
            score = float(np.sum((validation.values - estimate[validation.rows, validation.cols]) ** 2))
        except CELL_ERRORS as exc:
            logger.warning("lambda=%g failed: %s", lam, exc)
            score = float("inf")
        logger.debug("lambda=%g holdout error %.6e", lam, score)
        table.append((lam, score))
    best_lambda, best_score = table[0]
    for lam, score in table[1:]:
        if score < best_score:
            best_lambda, best_score = lam, score
    if not np.isfinite(best_score):
        raise ExperimentError(f"OptSpace failed for every lambda in {grid}")
    logger.info("Selected lambda %g (holdout error %.6e) for rank %d", best_lambda, best_score, rank_used)
    return best_lambda, table


#
# Experiment configuration.
#


@dataclass
class ExperimentConfig:
    """Declarative sweep description. List valued fields form the grid."""

    kind: str = "single_run"
    m: List[int] = field(default_factory=lambda: [100])
    n: List[int] = field(default_factory=lambda: [100])
    r_true: List[int] = field(default_factory=lambda: [10])
    rank_used: List[int] = field(default_factory=list)
    p: List[float] = field(default_factory=lambda: [0.5])
    snr: List[float] = field(default_factory=list)
    sigma2: List[float] = field(default_factory=list)
    noise_ratio: List[float] = field(default_factory=list)
    sigma_diag: List[float] = field(default_factory=list)
    lambdas: Union[str, List[float]] = "auto"
    soft_impute_lambda: List[float] = field(default_factory=list)
    replicates: int = 20
    seed: int = 0
    holdout_fraction: float = 0.2
    output: str = "results.csv"
    max_iters: int = 500
    mask: str = "bernoulli"
    trim_factor: float = 2.0
    workers: int = 1

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ExperimentError(f"Experiment kind {self.kind} not supported - use one of {KINDS}")
        if self.replicates < 1:
            raise ExperimentError(f"replicates must be >= 1, got {self.replicates}")
        if not 0 <= self.holdout_fraction <= 0.5:
            raise ExperimentError(f"holdout_fraction must be in [0, 0.5], got {self.holdout_fraction}")
        if sum(bool(axis) for axis in (self.snr, self.sigma2, self.noise_ratio)) != 1:
            raise ExperimentError("Exactly one of snr, sigma2, noise_ratio must be given")
        if self.noise_ratio and not self.sigma_diag:
            raise ExperimentError("noise_ratio needs sigma_diag")
        if self.kind in SPIKED_KINDS and not self.sigma_diag:
            raise ExperimentError(f"{self.kind} needs sigma_diag")
        if self.kind not in SPIKED_KINDS and not self.r_true:
            raise ExperimentError(f"{self.kind} needs r_true")
        for name in ("m", "n", "p"):
            if not getattr(self, name):
                raise ExperimentError(f"Grid axis {name} is empty")
        if self.lambdas == "auto":
            if self.kind in ("sweep_lambda",):
                raise ExperimentError("sweep_lambda needs an explicit lambda list")
            if self.holdout_fraction == 0 and self.kind in ("sweep_rank", "single_run"):
                raise ExperimentError("Automatic lambda selection needs holdout_fraction > 0")
        elif not self.lambdas:
            raise ExperimentError("Lambda list is empty")

    @property
    def lambda_list(self) -> Optional[List[float]]:
        return None if self.lambdas == "auto" else list(self.lambdas)


_INT_LISTS = ("m", "n", "r_true", "rank_used")
_FLOAT_LISTS = ("p", "snr", "sigma2", "noise_ratio", "sigma_diag", "soft_impute_lambda")
_SCALARS = {
    "kind": str,
    "replicates": int,
    "seed": int,
    "holdout_fraction": float,
    "output": str,
    "max_iters": int,
    "mask": str,
    "trim_factor": float,
    "workers": int,
}


def _as_list(value: object) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def config_from_mapping(mapping: Mapping[str, object]) -> ExperimentConfig:
    """Build a config from a YAML mapping or from key=value lists (repeated keys form grids)."""
    known = {f.name for f in fields(ExperimentConfig)} | {"lambda"}
    unknown = set(mapping) - known
    if unknown:
        raise ExperimentError(f"Unknown configuration keys {sorted(unknown)}")
    values: Dict[str, object] = {}
    for key, value in mapping.items():
        if key in _INT_LISTS:
            values[key] = [int(v) for v in _as_list(value)]
        elif key in _FLOAT_LISTS:
            values[key] = [float(v) for v in _as_list(value)]
        elif key in ("lambda", "lambdas"):
            items = _as_list(value)
            values["lambdas"] = "auto" if [str(v) for v in items] == ["auto"] else [float(v) for v in items]
        else:
            items = _as_list(value)
            if len(items) != 1:
                raise ExperimentError(f"Configuration key {key} takes a single value, got {items}")
            values[key] = _SCALARS[key](items[0])
    config = ExperimentConfig(**values)
    config.validate()
    return config


def load_config(config_file_name: Union[str, Path]) -> ExperimentConfig:
    """Load experiment configuration from yaml or key=value file.

    Configuration file type is extracted from the file suffix - yaml/yml or cfg/conf/txt.

    :param config_file_name: full path to the configuration file.
    """
    ext = path.splitext(str(config_file_name))[-1].lower()
    if ext in (".yaml", ".yml"):
        with open(config_file_name) as stream:
            mapping = yaml.safe_load(stream) or {}
        if not isinstance(mapping, dict):
            raise ExperimentError(f"{config_file_name} must hold a mapping")
    elif ext in (".cfg", ".conf", ".txt"):
        mapping = kv_format.read_kv(config_file_name)
    else:
        raise ValueError(f"Configuration file type {ext} not supported.")
    return config_from_mapping(mapping)


#
# Grid cells.
#


@dataclass(frozen=True)
class Cell:
    """One grid point. noise is (axis, value) with axis one of snr, sigma2, noise_ratio."""

    index: int
    m: int
    n: int
    r_true: int
    p: float
    noise: Tuple[str, float]
    rank_used: int
    signal_variance: float

    def sigma2(self, sigma_diag: Sequence[float]) -> float:
        axis, value = self.noise
        if axis == "sigma2":
            return value
        if axis == "snr":
            return snr_to_sigma2(value, self.signal_variance, self.m, self.n)
        return value * self.p * sigma_diag[0] ** 2

    def coords(self) -> tuple:
        return self.m, self.n, self.r_true, self.p, self.noise, self.rank_used


def cell_seed(base_seed: int, coords: tuple, replicate: int) -> int:
    """Seed of one (cell, replicate) - first 8 bytes of SHA-256 over the canonical cell text."""
    digest = hashlib.sha256(repr((int(base_seed), coords, int(replicate))).encode()).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def grid_cells(config: ExperimentConfig) -> List[Cell]:
    """Cells in deterministic grid order."""
    if config.snr:
        noise = [("snr", v) for v in config.snr]
    elif config.sigma2:
        noise = [("sigma2", v) for v in config.sigma2]
    else:
        noise = [("noise_ratio", v) for v in config.noise_ratio]
    spiked = config.kind in SPIKED_KINDS
    r_true = [len(config.sigma_diag)] if spiked else config.r_true
    cells = []
    for m, n, r, p, noise_point in itertools.product(config.m, config.n, r_true, config.p, noise):
        signal = float(np.sum(np.square(config.sigma_diag))) if spiked else float(r)
        for rank in config.rank_used or [r]:
            cells.append(Cell(len(cells), m, n, r, p, noise_point, rank, signal))
    return cells


#
# Result rows.
#


@dataclass
class ResultRow:
    """One CSV row - cell values, measured quantities and their theory counterparts."""

    kind: str
    method: str
    cell: int
    variant: int
    replicate: int
    seed: int
    m: int
    n: int
    r_true: int
    rank_used: int
    p: float
    sigma2: float
    snr: Optional[float] = None
    lambda_spectral: Optional[float] = None
    lambda_descent: Optional[float] = None
    lambda_nn: Optional[float] = None
    status: str = "ok"
    test_error: Optional[float] = None
    train_error: Optional[float] = None
    rel_fro_error: Optional[float] = None
    measured_z: Optional[np.ndarray] = None
    overlap_a: Optional[np.ndarray] = None
    overlap_b: Optional[np.ndarray] = None
    predicted_z: Optional[np.ndarray] = None
    predicted_a: Optional[np.ndarray] = None
    predicted_b: Optional[np.ndarray] = None
    predicted_rel_mse: Optional[float] = None
    predicted_shrinkage_error: Optional[float] = None
    iterations: Optional[int] = None
    wall_time: Optional[float] = None

    def as_record(self, include_timing: bool = False) -> Dict[str, str]:
        record = {}
        for name in columns(include_timing):
            record[name] = _format_value(getattr(self, name))
        return record


ERROR_COLUMNS = ("test_error", "train_error", "rel_fro_error", "predicted_rel_mse", "predicted_shrinkage_error")


def columns(include_timing: bool = False) -> List[str]:
    """CSV column order."""
    names = [f.name for f in fields(ResultRow)]
    return names if include_timing else [name for name in names if name != "wall_time"]


def _format_value(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, np.ndarray):
        return fmt_floats(value)
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "" if np.isnan(value) else fmt_float(value)
    return str(value)


#
# Cell evaluation.
#


def _instance(config: ExperimentConfig, cell: Cell, seed: int) -> SynthInstance:
    sigma2 = cell.sigma2(config.sigma_diag)
    if config.kind in SPIKED_KINDS:
        return generate_spiked(cell.m, cell.n, config.sigma_diag, sigma2, cell.p, seed, config.mask)
    return generate(cell.m, cell.n, cell.r_true, sigma2, cell.p, seed, config.mask)


def _score(row: ResultRow, instance: SynthInstance, estimate: np.ndarray) -> None:
    row.rel_fro_error = rel_fro_error(instance.M, estimate)
    row.train_error = train_error(instance.observed, estimate)
    if instance.observed.nnz < instance.m * instance.n:
        row.test_error = test_error(instance.M, estimate, instance.observed)


def _optspace_row(row: ResultRow, instance: SynthInstance, config: ExperimentConfig, lam: float) -> None:
    opts = DescentOptions(max_iters=config.max_iters)
    row.lambda_spectral = lam
    row.lambda_descent = max(lam, 0.0)
    factorization, trace = run_optspace(
        instance.observed, row.rank_used, lam, opts=opts, trim_factor=config.trim_factor, seed=row.seed
    )
    row.iterations = max(len(trace.records) - 1, 0)
    _score(row, instance, reconstruct(factorization))


def _selected_lambda(instance: SynthInstance, config: ExperimentConfig, rank_used: int, seed: int) -> float:
    if config.lambda_list is not None and len(config.lambda_list) == 1:
        return config.lambda_list[0]
    lam, _ = select_lambda(
        instance.observed,
        rank_used,
        config.lambda_list,
        config.holdout_fraction,
        seed,
        DescentOptions(max_iters=config.max_iters),
        instance.params,
        config.trim_factor,
    )
    return lam


def _spectral_theory_rows(base: ResultRow, instance: SynthInstance) -> List[ResultRow]:
    """Spectral estimate with the theory shrinkage and with the oracle shrinkage, against the predictions."""
    rank = base.rank_used
    prediction = mc_theory.predict(instance.params, rank)
    svd = truncated_svd(instance.observed, rank, seed=base.seed)
    overlap_u = np.linalg.svd(instance.U.T @ svd.left / np.sqrt(instance.m), compute_uv=False)
    overlap_v = np.linalg.svd(instance.V.T @ svd.right / np.sqrt(instance.n), compute_uv=False)
    spectral = (svd.left * svd.singulars) @ svd.right.T

    rows = []
    oracle_t = float(np.sum(instance.M * spectral) / np.sum(spectral**2))
    for method, t in (("spectral_theory", prediction.t_star or 0.0), ("spectral_oracle", oracle_t)):
        row = replace(base, method=method)
        row.lambda_spectral = 1 / t - 1 if t > 0 else None
        row.measured_z = svd.singulars / instance.n
        row.overlap_a, row.overlap_b = overlap_u, overlap_v
        row.predicted_z = prediction.z[:rank] if rank <= instance.params.r else None
        row.predicted_a = prediction.a[:rank] if rank <= instance.params.r else None
        row.predicted_b = prediction.b[:rank] if rank <= instance.params.r else None
        row.predicted_rel_mse = prediction.rel_mse
        row.predicted_shrinkage_error = mc_theory.shrinkage_rel_error(instance.params, t, rank)
        _score(row, instance, t * spectral)
        rows.append(row)
    return rows


def _cell_rows(config: ExperimentConfig, cell: Cell, replicate: int) -> List[ResultRow]:
    """Every row of one (cell, replicate). Failures are recorded in the status column."""
    seed = cell_seed(config.seed, cell.coords(), replicate)
    sigma2 = cell.sigma2(config.sigma_diag)
    snr = sigma2_to_snr(sigma2, cell.signal_variance, cell.m, cell.n) if sigma2 > 0 else None
    base = ResultRow(
        kind=config.kind,
        method="",
        cell=cell.index,
        variant=0,
        replicate=replicate,
        seed=seed,
        m=cell.m,
        n=cell.n,
        r_true=cell.r_true,
        rank_used=cell.rank_used,
        p=cell.p,
        sigma2=sigma2,
        snr=snr,
    )
    started = time.perf_counter()
    plans = _plans(config)
    rows: List[ResultRow] = []
    try:
        instance = _instance(config, cell, seed)
    except CELL_ERRORS as exc:
        return [replace(base, method=method, variant=variant, status=_status(exc)) for method, variant, _ in plans]

    for method, variant, value in plans:
        row = replace(base, method=method, variant=variant)
        try:
            if method == "spectral":
                rows.extend(_spectral_theory_rows(row, instance))
                continue
            if method == "optspace_lambda_star":
                _optspace_row(row, instance, config, _selected_lambda(instance, config, cell.rank_used, seed))
            elif method in ("optspace_0", "optspace_lambda"):
                _optspace_row(row, instance, config, value)
            elif method == "soft_impute":
                row.lambda_nn = value
                estimate = soft_impute_baseline(instance.observed, value, max_iters=config.max_iters)
                row.rank_used = int(np.linalg.matrix_rank(estimate)) if np.any(estimate) else 0
                _score(row, instance, estimate)
        except CELL_ERRORS as exc:
            row.status = _status(exc)
            logger.warning("Cell %d replicate %d %s failed: %s", cell.index, replicate, method, row.status)
        rows.append(row)
    elapsed = time.perf_counter() - started
    for row in rows:
        row.wall_time = elapsed
    return rows


def _status(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}".replace("\n", " ")


def _plans(config: ExperimentConfig) -> List[Tuple[str, int, Optional[float]]]:
    """(method, variant, value) evaluated in every (cell, replicate) for the experiment kind."""
    if config.kind in SPIKED_KINDS:
        return [("spectral", 0, None)]
    if config.kind == "sweep_lambda":
        return [("optspace_lambda", i, lam) for i, lam in enumerate(config.lambda_list)]
    if config.kind == "single_run":
        return [("optspace_lambda_star", 0, None)]
    plans = [("optspace_lambda_star", 0, None), ("optspace_0", 0, 0.0)]
    plans.extend(("soft_impute", i, lam) for i, lam in enumerate(config.soft_impute_lambda))
    return plans


def _work(item: Tuple[ExperimentConfig, Cell, int]) -> List[ResultRow]:
    config, cell, replicate = item
    return _cell_rows(config, cell, replicate)


def run(config: ExperimentConfig, output: Optional[Union[str, Path]] = None, include_timing: bool = False) -> List[ResultRow]:
    """Run every (cell, replicate) in grid order.

    Rows are written to output as they complete (in grid order whatever the worker count).

    :param config: experiment configuration.
    :param output: CSV path, None to skip writing.
    :param include_timing: add the wall_time column.
    """
    config.validate()
    work = [(config, cell, rep) for cell in grid_cells(config) for rep in range(config.replicates)]
    logger.info("Running %s: %d cells x %d replicates", config.kind, len(work) // config.replicates, config.replicates)
    rows: List[ResultRow] = []
    writer = _CsvWriter(output, include_timing) if output else None
    try:
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                results = pool.map(_work, work)
                for cell_rows in results:
                    rows.extend(cell_rows)
                    if writer:
                        writer.write(cell_rows)
        else:
            for item in work:
                cell_rows = _work(item)
                rows.extend(cell_rows)
                if writer:
                    writer.write(cell_rows)
    finally:
        if writer:
            writer.close()
    return rows


#
# Output.
#


class _CsvWriter:
    """Append-only CSV writer with a fixed header."""

    def __init__(self, output: Union[str, Path], include_timing: bool) -> None:
        self.include_timing = include_timing
        self.stream = open(output, "w", newline="")  # pylint: disable=consider-using-with
        self.writer = csv.DictWriter(self.stream, fieldnames=columns(include_timing), lineterminator="\n")
        self.writer.writeheader()

    def write(self, rows: Sequence[ResultRow]) -> None:
        for row in rows:
            self.writer.writerow(row.as_record(self.include_timing))
        self.stream.flush()

    def close(self) -> None:
        self.stream.close()


def emit_csv(rows: Sequence[ResultRow], output: Union[str, Path], include_timing: bool = False) -> None:
    """Write rows with a header, floats with 17 significant digits."""
    writer = _CsvWriter(output, include_timing)
    try:
        writer.write(rows)
    finally:
        writer.close()


def read_csv(csv_path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(csv_path, newline="") as stream:
        return list(csv.DictReader(stream))


def summarize(rows: Sequence[ResultRow]) -> List[Dict[str, str]]:
    """Mean and standard deviation of the error columns over replicates, per (cell, method, variant)."""
    groups: Dict[Tuple[int, str, int], List[ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.cell, row.method, row.variant), []).append(row)
    summary = []
    for (cell, method, variant), members in groups.items():
        first = members[0]
        record = {
            "kind": first.kind,
            "method": method,
            "cell": str(cell),
            "variant": str(variant),
            "m": str(first.m),
            "n": str(first.n),
            "r_true": str(first.r_true),
            "p": fmt_float(first.p),
            "sigma2": fmt_float(first.sigma2),
            "snr": _format_value(first.snr),
        }
        ok = [row for row in members if row.status == "ok"]
        record["count"] = str(len(ok))
        for name in ("rank_used", "lambda_spectral", "lambda_nn") + ERROR_COLUMNS:
            values = np.array([getattr(row, name) for row in ok if getattr(row, name) is not None], dtype=float)
            record[f"{name}_mean"] = fmt_float(values.mean()) if values.size else ""
            record[f"{name}_std"] = fmt_float(values.std(ddof=1)) if values.size > 1 else ("0" if values.size else "")
        summary.append(record)
    return summary


def emit_summary_csv(rows: Sequence[ResultRow], output: Union[str, Path]) -> None:
    summary = summarize(rows)
    with open(output, "w", newline="") as stream:
        if not summary:
            return
        writer = csv.DictWriter(stream, fieldnames=list(summary[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(summary)


_PLOT_AXES = {
    "sweep_rank": ("rank_used_mean", ("test_error_mean", "train_error_mean")),
    "single_run": ("rank_used_mean", ("test_error_mean", "train_error_mean")),
    "sweep_lambda": ("lambda_spectral_mean", ("test_error_mean", "train_error_mean")),
    "sweep_noise": ("sigma2", ("rel_fro_error_mean", "predicted_rel_mse_mean")),
    "theory_check": ("sigma2", ("rel_fro_error_mean", "predicted_rel_mse_mean")),
}


def emit_plotscript(rows: Sequence[ResultRow], output: Union[str, Path], summary_csv: Union[str, Path]) -> None:
    """Write a gnuplot script drawing one curve per method from the summary CSV.

    :param rows: result rows (the kind and methods select axes and curves).
    :param output: script path.
    :param summary_csv: summary CSV, referenced relative to the script directory.
    """
    output = Path(output)
    data = Path(path.relpath(Path(summary_csv).resolve(), output.resolve().parent)).as_posix()
    kind = rows[0].kind if rows else "sweep_rank"
    x_column, y_columns = _PLOT_AXES[kind]
    methods = list(dict.fromkeys(row.method for row in rows))
    lines = [
        "# gnuplot script",
        "set datafile separator ','",
        "set key outside",
        f"set xlabel '{x_column.replace('_mean', '')}'",
        f"set terminal pngcairo size 900,{320 * len(y_columns)}",
        f"set output '{output.stem}.png'",
        f"set multiplot layout {len(y_columns)},1",
    ]
    for y_column in y_columns:
        curves = [
            f"'{data}' using (strcol('method') eq '{method}' ? column('{x_column}') : 1/0):'{y_column}' "
            f"with linespoints title '{method}'"
            for method in methods
        ]
        lines.append(f"set ylabel '{y_column.replace('_mean', '')}'")
        lines.append("plot " + ", \\\n     ".join(curves) if curves else f"plot '{data}' using 1:2 notitle")
    lines.append("unset multiplot")
    output.write_text("\n".join(lines) + "\n")
