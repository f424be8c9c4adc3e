"""
Gradient descent over pairs of orthonormal frames for

    F(X, Y; S) = 1/2 ||P_E(N - X S Y^T)||_F^2 + 1/2 lambda ||S||_F^2

S is re-solved exactly after every frame update. Frames move along the projected (Stiefel) gradient with an Armijo
backtracking line search and a QR retraction.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.linalg
from scipy import sparse

from optspace.mc_errors import ConvergenceError, DimensionError
from optspace.mc_obsmat import ObservedMatrix
from optspace.mc_spectral import Factorization
from optspace.mc_utils import fmt_float, logger

REASONS = ("grad_tol", "cost_rel_tol", "max_iters", "line_search_failed")


@dataclass
class DescentOptions:
    """Descent settings.

    :param lam: regularization weight on ||S||^2, >= 0.
    :param grad_tol: gradient norm stop, None means 1e-7 ||N^E||_F.
    :param cost_rel_tol: relative cost decrease stop.
    :param armijo_c: sufficient decrease constant in (0, 1).
    :param backtrack_factor: step contraction in (0, 1).
    :param initial_step: first trial step, in units of the gradient norm.
    :param require_convergence: raise ConvergenceError when the budget runs out or the line search fails.
    """

    lam: float = 0.0
    max_iters: int = 500
    grad_tol: Optional[float] = None
    cost_rel_tol: float = 1e-9
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    require_convergence: bool = False

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError(f"Descent regularization must be nonnegative, got {self.lam}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be nonnegative, got {self.max_iters}")
        if self.grad_tol is not None and self.grad_tol <= 0:
            raise ValueError(f"grad_tol must be positive, got {self.grad_tol}")
        if self.cost_rel_tol <= 0 or self.initial_step <= 0:
            raise ValueError("cost_rel_tol and initial_step must be positive")
        for name in ("armijo_c", "backtrack_factor"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must be strictly inside (0, 1), got {getattr(self, name)}")


@dataclass
class DescentRecord:
    iteration: int
    cost: float
    grad_norm: float
    step: float


@dataclass
class DescentTrace:
    """Per iteration records and the termination reason."""

    records: List[DescentRecord] = field(default_factory=list)
    reason: str = ""

    @property
    def costs(self) -> np.ndarray:
        return np.array([record.cost for record in self.records])

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as stream:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(["iter", "cost", "grad_norm", "step"])
            for record in self.records:
                writer.writerow(
                    [record.iteration, fmt_float(record.cost), fmt_float(record.grad_norm), fmt_float(record.step)]
                )


def _check_frames(X: np.ndarray, Y: np.ndarray, obs: ObservedMatrix) -> None:
    if X.shape[0] != obs.m or Y.shape[0] != obs.n or X.shape[1] != Y.shape[1]:
        raise DimensionError(f"Frames {X.shape}, {Y.shape} do not fit a {obs.shape} matrix")


def _predictions(X: np.ndarray, Y: np.ndarray, S: np.ndarray, obs: ObservedMatrix) -> np.ndarray:
    """(X S Y^T)_ij on the observed positions."""
    return np.sum((X[obs.rows] @ S) * Y[obs.cols], axis=1)


def _residual(X: np.ndarray, Y: np.ndarray, S: np.ndarray, obs: ObservedMatrix) -> sparse.csr_matrix:
    values = obs.values - _predictions(X, Y, S, obs)
    return sparse.csr_matrix((values, (obs.rows, obs.cols)), shape=obs.shape)


def normal_equations(X: np.ndarray, Y: np.ndarray, obs: ObservedMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """Gram matrix and right hand side of the inner least squares problem in vec(S) (row major).

    G[(a,b),(c,d)] = <P_E(X e_a e_b^T Y^T), P_E(X e_c e_d^T Y^T)>, h[(a,b)] = <P_E(N), X e_a e_b^T Y^T>.
    """
    _check_frames(X, Y, obs)
    r = X.shape[1]
    right = Y[obs.cols]
    outer = (right[:, :, None] * right[:, None, :]).reshape(obs.nnz, r * r)
    selector = sparse.csr_matrix((np.ones(obs.nnz), (obs.rows, np.arange(obs.nnz))), shape=(obs.m, obs.nnz))
    per_row = np.asarray(selector @ outer).reshape(obs.m, r, r)
    gram = np.einsum("ia,ic,ibd->abcd", X, X, per_row, optimize=True).reshape(r * r, r * r)
    rhs = (X.T @ (obs.to_sparse() @ Y)).ravel()
    return gram, rhs


def solve_S(X: np.ndarray, Y: np.ndarray, obs: ObservedMatrix, lam: float) -> np.ndarray:
    """Exact minimizer of F over S for fixed frames.

    A singular system (possible only at lambda = 0) falls back to the least norm solution.
    """
    gram, rhs = normal_equations(X, Y, obs)
    r = X.shape[1]
    system = gram + lam * np.eye(r * r)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            solution = scipy.linalg.solve(system, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
        logger.warning("Core system is singular (lambda=%g), using least norm solution", lam)
        solution = scipy.linalg.lstsq(system, rhs)[0]
    return solution.reshape(r, r)


def cost(X: np.ndarray, Y: np.ndarray, S: np.ndarray, obs: ObservedMatrix, lam: float) -> float:
    """F(X, Y; S)."""
    _check_frames(X, Y, obs)
    residual = obs.values - _predictions(X, Y, S, obs)
    return float(0.5 * residual @ residual + 0.5 * lam * np.sum(S**2))


def _sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def tangent_project(X: np.ndarray, D: np.ndarray) -> np.ndarray:
    """(I - X X^T) D + X skew(X^T D) = D - X sym(X^T D)."""
    return D - X @ _sym(X.T @ D)


def riemannian_gradient(
    X: np.ndarray, Y: np.ndarray, S: np.ndarray, obs: ObservedMatrix, lam: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Frame gradients of F projected on the Stiefel tangent spaces.

    The regularizer does not depend on the frames, lam is accepted for a uniform signature.
    """
    del lam
    _check_frames(X, Y, obs)
    residual = _residual(X, Y, S, obs)
    grad_x = -(residual @ (Y @ S.T))
    grad_y = -(residual.T @ (X @ S))
    return tangent_project(X, np.asarray(grad_x)), tangent_project(Y, np.asarray(grad_y))


def qr_retract(X: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Orthonormal factor of X + xi, columns signed so diag(R) > 0."""
    q, r = np.linalg.qr(X + xi)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1
    return q * signs


def descend(
    init: Factorization, obs: ObservedMatrix, opts: Optional[DescentOptions] = None
) -> Tuple[Factorization, DescentTrace]:
    """Minimize F starting from the given frames.

    Each iteration: gradient at (X, Y) with S fixed, Armijo backtracking along the negative gradient with QR
    retraction, then S re-solved exactly. The recorded cost sequence is nonincreasing.

    :param init: initial factorization (its core is replaced by the exact solve).
    :param obs: observed entries.
    :param opts: descent settings.
    """
    opts = opts or DescentOptions()
    X, Y = init.X, init.Y
    _check_frames(X, Y, obs)
    lam = opts.lam
    grad_tol = opts.grad_tol if opts.grad_tol is not None else 1e-7 * obs.frobenius_norm()
    S = solve_S(X, Y, obs, lam)
    value = cost(X, Y, S, obs, lam)
    grad_x, grad_y = riemannian_gradient(X, Y, S, obs, lam)
    grad_norm = float(np.sqrt(np.sum(grad_x**2) + np.sum(grad_y**2)))
    trace = DescentTrace(records=[DescentRecord(0, value, grad_norm, 0.0)])
    previous_step = None
    trace.reason = "max_iters"

    for iteration in range(1, opts.max_iters + 1):
        if grad_norm < grad_tol:
            trace.reason = "grad_tol"
            break
        step = opts.initial_step / grad_norm if previous_step is None else 2 * previous_step
        while True:
            new_x = qr_retract(X, -step * grad_x)
            new_y = qr_retract(Y, -step * grad_y)
            trial = cost(new_x, new_y, S, obs, lam)
            if trial <= value - opts.armijo_c * step * grad_norm**2:
                break
            step *= opts.backtrack_factor
            if step * grad_norm < np.finfo(float).eps:
                break
        if step * grad_norm < np.finfo(float).eps:
            logger.warning("Line search failed at iteration %d (cost %.6e, gradient %.3e)", iteration, value, grad_norm)
            trace.reason = "line_search_failed"
            break

        X, Y = new_x, new_y
        new_s = solve_S(X, Y, obs, lam)
        new_value = cost(X, Y, new_s, obs, lam)
        if new_value <= trial:
            S, trial = new_s, new_value
        decrease = value - trial
        previous_value, value = value, trial
        previous_step = step
        grad_x, grad_y = riemannian_gradient(X, Y, S, obs, lam)
        grad_norm = float(np.sqrt(np.sum(grad_x**2) + np.sum(grad_y**2)))
        trace.records.append(DescentRecord(iteration, value, grad_norm, step))
        logger.debug("Descent iteration %d cost %.10e gradient %.3e step %.3e", iteration, value, grad_norm, step)
        if previous_value == 0 or decrease / previous_value < opts.cost_rel_tol:
            trace.reason = "cost_rel_tol"
            break
    else:
        if opts.max_iters and grad_norm < grad_tol:
            trace.reason = "grad_tol"

    logger.info("Descent stopped (%s) after %d iterations, cost %.6e", trace.reason, len(trace.records) - 1, value)
    if opts.require_convergence and trace.reason in ("max_iters", "line_search_failed"):
        raise ConvergenceError(f"Descent did not converge ({trace.reason}) after {len(trace.records) - 1} iterations")
    return Factorization(X=X, S=S, Y=Y), trace
