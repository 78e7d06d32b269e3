"""Scikit-learn style wrappers around the compression/reconstruction core.

These let the operators participate in sklearn pipelines and grid searches:
every estimator exposes get_params/set_params, validates inputs in fit, and
maps arrays of spectra in transform. Rows are samples; spectra are complex
vectors of length n_s and measurements are complex vectors of length m.
"""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import reconstructor as nn
from .cs_baseline import CsSolverConfig, fista_reconstruct, omp_reconstruct
from .sensing import SensingMatrix, compress, random_sensing_matrix


def check_complex_rows(X, width: int | None = None, name: str = "X") -> np.ndarray:
    """Validate a 2-D array of complex row vectors; 1-D input becomes one row."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {X.shape}")
    if width is not None and X.shape[1] != width:
        raise ValueError(f"{name} must have {width} columns, got {X.shape[1]}")
    if not np.isfinite(X).all():
        raise ValueError(f"{name} contains non-finite values")
    return X.astype(np.complex128)


def _check_positive_int(value, name: str) -> int:
    if not isinstance(value, numbers.Integral) or value <= 0:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


class SubNyquistCompressor(BaseEstimator, TransformerMixin):
    """Compress spectra to m measurements with a seeded random matrix."""

    def __init__(self, m=32, kind="random_bernoulli", seed=0):
        self.m = m
        self.kind = kind
        self.seed = seed

    def fit(self, X, y=None):
        X = check_complex_rows(X, name="X")
        m = _check_positive_int(self.m, "m")
        self.n_s_ = X.shape[1]
        self.matrix_ = random_sensing_matrix(m, self.n_s_, kind=self.kind,
                                             rng=self.seed)
        return self

    def transform(self, X):
        self._check_fitted()
        X = check_complex_rows(X, self.n_s_, name="X")
        return X @ self.matrix_.entries.T

    def _check_fitted(self):
        if not hasattr(self, "matrix_"):
            raise RuntimeError("compressor is not fitted; call fit first")


class _BaseSolver(BaseEstimator, TransformerMixin):
    """Shared plumbing for solvers that invert a known sensing matrix."""

    def __init__(self, matrix=None):
        self.matrix = matrix

    def fit(self, X=None, y=None):
        if not isinstance(self.matrix, SensingMatrix):
            raise ValueError("matrix must be a SensingMatrix")
        self.matrix_ = self.matrix
        return self

    def transform(self, Y):
        self._check_fitted()
        Y = check_complex_rows(Y, self.matrix_.m, name="Y")
        out = np.empty((Y.shape[0], self.matrix_.n_s), dtype=np.complex128)
        infos = []
        for i, row in enumerate(Y):
            out[i], info = self._solve(row)
            infos.append(info)
        self.solve_info_ = infos
        return out

    def _check_fitted(self):
        if not hasattr(self, "matrix_"):
            raise RuntimeError("solver is not fitted; call fit first")

    def _solve(self, y):
        raise NotImplementedError


class OmpReconstructor(_BaseSolver):
    """Greedy orthogonal matching pursuit over a fixed sensing matrix."""

    def __init__(self, matrix=None, sparsity_k=25, epsilon=0.0,
                 max_iterations=500):
        super().__init__(matrix=matrix)
        self.sparsity_k = sparsity_k
        self.epsilon = epsilon
        self.max_iterations = max_iterations

    def _solve(self, y):
        config = CsSolverConfig(sparsity_k=self.sparsity_k, epsilon=self.epsilon,
                                max_iterations=self.max_iterations)
        return omp_reconstruct(y, self.matrix_, config)


class FistaReconstructor(_BaseSolver):
    """Accelerated L1 solver over a fixed sensing matrix."""

    def __init__(self, matrix=None, lam=None, tolerance=1e-8,
                 max_iterations=500):
        super().__init__(matrix=matrix)
        self.lam = lam
        self.tolerance = tolerance
        self.max_iterations = max_iterations

    def _solve(self, y):
        config = CsSolverConfig(lam=self.lam, tolerance=self.tolerance,
                                max_iterations=self.max_iterations)
        return fista_reconstruct(y, self.matrix_, config)


class LearnedReconstructor(BaseEstimator, TransformerMixin):
    """Inference wrapper over trained weights; compression happens inside the
    network, so transform consumes full noisy spectra."""

    def __init__(self, weights=None, weights_path=None):
        self.weights = weights
        self.weights_path = weights_path

    def fit(self, X=None, y=None):
        if self.weights is not None:
            w = self.weights
        elif self.weights_path is not None:
            w = nn.load_weights(self.weights_path)
        else:
            raise ValueError("provide weights or weights_path")
        if not isinstance(w, nn.ModelWeights):
            raise ValueError("weights must be a ModelWeights")
        self.weights_ = w
        return self

    def transform(self, X):
        if not hasattr(self, "weights_"):
            raise RuntimeError("reconstructor is not fitted; call fit first")
        X = check_complex_rows(X, self.weights_.architecture.n_s, name="X")
        return nn.forward_complex(X, self.weights_)

    @property
    def sensing_matrix_(self) -> SensingMatrix:
        if not hasattr(self, "weights_"):
            raise RuntimeError("reconstructor is not fitted; call fit first")
        return nn.extract_sensing_matrix(self.weights_)
