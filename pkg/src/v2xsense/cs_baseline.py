"""Classical sparse recovery from undersampled measurements.

Two solvers for the L1 spectrum reconstruction problem: orthogonal matching
pursuit (greedy atom selection with least-squares refits) and FISTA
(accelerated proximal gradient on the Lagrangian 0.5*||y - Ax||^2 +
lambda*||x||_1). Both operate natively on complex vectors; the L1 prox
shrinks by magnitude, x <- x * max(0, 1 - t/|x|).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sensing import Measurements, SensingMatrix


@dataclass(frozen=True)
class CsSolverConfig:
    epsilon: float = 0.0          # residual norm target (distortion threshold)
    max_iterations: int = 500
    lam: float | None = None      # L1 weight; defaults to 1e-3 * ||A^H y||_inf
    sparsity_k: int | None = None
    tolerance: float = 1e-8

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.epsilon < 0 or self.tolerance < 0:
            raise ValueError("epsilon and tolerance must be nonnegative")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lam must be nonnegative")


@dataclass(frozen=True)
class SolveInfo:
    iterations: int
    residual_norm: float
    converged: bool
    rank_deficient: bool = False
    objective: float | None = None
    objective_history: tuple[float, ...] = ()


def _as_measurement_vector(y) -> np.ndarray:
    if isinstance(y, Measurements):
        y = y.y
    return np.asarray(y, dtype=np.complex128)


def omp_reconstruct(y, phi: SensingMatrix,
                    config: CsSolverConfig) -> tuple[np.ndarray, SolveInfo]:
    """Greedy recovery: pick the column most correlated with the residual,
    refit least squares on the active set, stop at sparsity_k atoms or when
    the residual norm drops to epsilon."""
    if config.sparsity_k is None:
        raise ValueError("OMP requires sparsity_k")
    if config.sparsity_k > phi.m:
        raise ValueError("sparsity_k cannot exceed the number of measurements")
    y = _as_measurement_vector(y)
    if not np.isfinite(y).all():
        raise ValueError("measurements contain non-finite values")
    a = phi.entries
    col_norms = np.linalg.norm(a, axis=0)
    col_norms[col_norms == 0] = 1.0

    x = np.zeros(phi.n_s, dtype=np.complex128)
    residual = y.copy()
    support: list[int] = []
    rank_deficient = False
    res_norm = float(np.linalg.norm(residual))
    stop_eps = max(config.epsilon, 1e-12 * max(res_norm, 1.0))
    iters = 0
    for _ in range(min(config.sparsity_k, config.max_iterations)):
        if res_norm <= stop_eps:
            break
        scores = np.abs(a.conj().T @ residual) / col_norms
        scores[support] = -1.0
        atom = int(np.argmax(scores))
        support.append(atom)
        active = a[:, support]
        coef, _, rank, _ = np.linalg.lstsq(active, y, rcond=None)
        if rank < len(support):
            rank_deficient = True
        residual = y - active @ coef
        res_norm = float(np.linalg.norm(residual))
        iters += 1
    x[:] = 0
    if support:
        x[support] = coef
    if config.epsilon > 0:  # epsilon-mode: feasibility decides convergence
        converged = res_norm <= config.epsilon
    else:
        converged = res_norm <= stop_eps or len(support) >= config.sparsity_k
    info = SolveInfo(iterations=iters, residual_norm=res_norm,
                     converged=converged, rank_deficient=rank_deficient)
    return x, info


def _soft_threshold(x: np.ndarray, level: float) -> np.ndarray:
    mags = np.abs(x)
    shrink = np.maximum(0.0, 1.0 - level / np.maximum(mags, 1e-300))
    return x * shrink


def _spectral_norm_sq(a: np.ndarray, iterations: int = 60) -> float:
    """Squared largest singular value via power iteration on A^H A."""
    v = np.ones(a.shape[1], dtype=np.complex128) / math.sqrt(a.shape[1])
    lam = 0.0
    for _ in range(iterations):
        w = a.conj().T @ (a @ v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 1.0
        lam = norm
        v = w / norm
    return lam


def fista_reconstruct(y, phi: SensingMatrix,
                      config: CsSolverConfig) -> tuple[np.ndarray, SolveInfo]:
    """Accelerated proximal gradient for the complex LASSO, with restarts on
    objective increase so the reported objective is nonincreasing."""
    y = _as_measurement_vector(y)
    if not np.isfinite(y).all():
        raise ValueError("measurements contain non-finite values")
    a = phi.entries
    lam = config.lam
    if lam is None:
        lam = 1e-3 * float(np.max(np.abs(a.conj().T @ y), initial=0.0))
    if lam == 0.0:
        lam = 1e-12
    lip = _spectral_norm_sq(a)
    step = 1.0 / lip

    def objective(v: np.ndarray) -> float:
        r = y - a @ v
        return 0.5 * float(np.vdot(r, r).real) + lam * float(np.sum(np.abs(v)))

    x = np.zeros(phi.n_s, dtype=np.complex128)
    z = x.copy()
    t = 1.0
    best = x
    best_obj = objective(x)
    prev_obj = best_obj
    history = [best_obj]
    iters = 0
    converged = False
    for iters in range(1, config.max_iterations + 1):
        grad = a.conj().T @ (a @ z - y)
        x_next = _soft_threshold(z - step * grad, step * lam)
        obj = objective(x_next)
        if obj > prev_obj:  # momentum overshoot: restart acceleration
            t = 1.0
            z = x.copy()
            grad = a.conj().T @ (a @ z - y)
            x_next = _soft_threshold(z - step * grad, step * lam)
            obj = objective(x_next)
        t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        z = x_next + ((t - 1.0) / t_next) * (x_next - x)
        delta = abs(prev_obj - obj)
        x, t, prev_obj = x_next, t_next, obj
        history.append(obj)
        if obj < best_obj:
            best, best_obj = x, obj
        if delta < config.tolerance:
            converged = True
            break
    res_norm = float(np.linalg.norm(y - a @ best))
    info = SolveInfo(iterations=iters, residual_norm=res_norm,
                     converged=converged, objective=best_obj,
                     objective_history=tuple(history))
    return best, info
