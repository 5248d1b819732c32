"""Probabilistic surrogates mapping a beam pair to a Gaussian (mu, sigma).

Three interchangeable models share a fit/predict surface:

* :class:`GaussianProcessSurrogate` -- zero-mean GP with a squared-exponential
  kernel, Cholesky-factorized posterior.
* :class:`GradientBoostedSurrogate` -- least-squares boosted regression trees;
  the predictive spread is the disagreement between per-tree full-model
  estimates ``s_b = F_0 + T * nu * h_b``.
* :class:`RandomForestSurrogate` -- bagged trees; predictive mean/variance are
  the empirical mean and (unbiased) variance of per-tree predictions.

All models standardize targets internally by default and undo the transform in
predict, so raw RSS magnitudes need no preprocessing. Refitting on the same
data with the same seed is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import _trees
from .channel import BeamPair
from .numerics import NotPositiveDefinite, cholesky_factor

__all__ = [
    "Dataset",
    "PosteriorPrediction",
    "squared_exponential",
    "GpConfig",
    "GaussianProcessSurrogate",
    "RegressionTree",
    "fit_regression_tree",
    "GbrtConfig",
    "GradientBoostedSurrogate",
    "RfConfig",
    "RandomForestSurrogate",
]

_JITTER_RETRIES = 3


@dataclass(frozen=True)
class Dataset:
    """Ordered observations: beam pairs ``z`` (m, 2) and their measured RSS ``y`` (m,)."""

    z: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        z = np.atleast_2d(np.asarray(self.z, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if z.shape[0] != y.shape[0]:
            raise ValueError(f"z has {z.shape[0]} rows but y has {y.shape[0]} entries")
        if z.shape[0] < 1:
            raise ValueError("dataset must contain at least one observation")
        if not (np.isfinite(z).all() and np.isfinite(y).all()):
            raise ValueError("dataset contains NaN or infinite values")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.z.shape[0]

    @classmethod
    def from_pairs(cls, pairs, values) -> "Dataset":
        z = np.array([[p.theta, p.phi] for p in pairs])
        return cls(z=z, y=np.asarray(values, dtype=np.float64))


@dataclass(frozen=True)
class PosteriorPrediction:
    """Gaussian predictive summary at one query point."""

    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


def squared_exponential(z_i, z_j, length_scale: float = 1.0) -> float:
    """exp(-0.5 * ||z_i - z_j||^2 / length_scale^2)."""
    d = np.asarray(z_i, dtype=np.float64) - np.asarray(z_j, dtype=np.float64)
    return float(np.exp(-0.5 * np.dot(d, d) / length_scale**2))


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # in-place accumulation; broadcasting temporaries dominate runtime otherwise
    d = a @ (-2.0 * b.T)
    d += (a * a).sum(1)[:, None]
    d += (b * b).sum(1)[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def _kernel_matrix(a: np.ndarray, b: np.ndarray, length_scale: float) -> np.ndarray:
    d = _sq_dists(a, b)
    d *= -0.5 / length_scale**2
    np.exp(d, out=d)
    return d


def _standardize(y: np.ndarray, enabled: bool):
    if not enabled:
        return y.copy(), 0.0, 1.0
    mean = float(y.mean())
    scale = float(y.std())
    if scale == 0.0 or not np.isfinite(scale):
        scale = 1.0
    return (y - mean) / scale, mean, scale


def _as_query(z) -> np.ndarray:
    if isinstance(z, BeamPair):
        return z.as_array()[None, :]
    q = np.atleast_2d(np.asarray(z, dtype=np.float64))
    return q


@dataclass(frozen=True)
class GpConfig:
    """Gaussian-process settings.

    Inputs are affinely mapped from [-pi/2, pi/2]^2 to the unit square before
    the kernel when ``rescale_inputs`` is set; ``length_scale`` then acts on
    unit-square coordinates. Setting ``rescale_inputs=False`` with
    ``length_scale=1.0`` gives the bare kernel on radians. The effective
    diagonal jitter is ``jitter_scale * mean(y_fit^2)`` where ``y_fit`` is the
    (possibly standardized) target.
    """

    length_scale: float = 0.1
    rescale_inputs: bool = True
    jitter_scale: float = 1e-6
    standardize: bool = True


class GaussianProcessSurrogate:
    """Zero-mean GP regressor with squared-exponential kernel.

    The posterior at z is mu = k^T (K + jI)^-1 y and
    sigma^2 = k(z, z) - k^T (K + jI)^-1 k, computed through a Cholesky
    factorization. A failed factorization is retried with jitter * 10 up to
    three times before :class:`NotPositiveDefinite` propagates.
    """

    def __init__(self, config: GpConfig = GpConfig()):
        self.config = config
        self._fitted = False

    def _map_inputs(self, z: np.ndarray) -> np.ndarray:
        if self.config.rescale_inputs:
            return (z + np.pi / 2.0) / np.pi
        return z

    def fit(self, data: Dataset, rng=None) -> "GaussianProcessSurrogate":
        x = self._map_inputs(data.z)
        ys, ymean, yscale = _standardize(data.y, self.config.standardize)
        base_jitter = self.config.jitter_scale * float(np.mean(ys * ys))
        k = _kernel_matrix(x, x, self.config.length_scale)
        eye = np.eye(len(ys))
        last_exc = None
        for attempt in range(1 + _JITTER_RETRIES):
            jitter = base_jitter * 10.0**attempt
            try:
                chol = cholesky_factor(k + jitter * eye)
            except NotPositiveDefinite as exc:
                last_exc = exc
                continue
            break
        else:
            raise NotPositiveDefinite(
                f"kernel matrix not positive definite after {_JITTER_RETRIES} jitter retries"
            ) from last_exc
        z = solve_triangular(chol, ys, lower=True, check_finite=False)
        self.x_ = x
        self.chol_ = chol
        self.weights_ = solve_triangular(chol.T, z, lower=False, check_finite=False)
        self.jitter_ = jitter
        self.y_mean_ = ymean
        self.y_scale_ = yscale
        self._fitted = True
        return self

    def predict_many(self, z) -> tuple[np.ndarray, np.ndarray]:
        if not self._fitted:
            raise RuntimeError("fit must be called before predict")
        q = self._map_inputs(_as_query(z))
        kq = _kernel_matrix(q, self.x_, self.config.length_scale)
        mu = kq @ self.weights_
        # kq is free to clobber once mu is out; saves a large copy per call
        v = solve_triangular(self.chol_, kq.T, lower=True, check_finite=False, overwrite_b=True)
        var = np.maximum(1.0 - np.einsum("ij,ij->j", v, v), 0.0)
        return self.y_mean_ + self.y_scale_ * mu, self.y_scale_ * np.sqrt(var)

    def predict(self, z) -> PosteriorPrediction:
        mu, sigma = self.predict_many(z)
        return PosteriorPrediction(mu=float(mu[0]), sigma=float(sigma[0]))


@dataclass
class RegressionTree:
    """Binary tree of axis-aligned splits; leaves predict the mean of their samples."""

    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def predict(self, z) -> np.ndarray:
        q = _as_query(z)
        out = np.empty(q.shape[0])
        _trees.predict_tree(self.feature, self.threshold, self.left, self.right, self.value, q, out)
        return out


def fit_regression_tree(
    data: Dataset, max_depth: int, min_leaf: int = 1, rng=None
) -> RegressionTree:
    """Exact greedy variance-reduction tree on the beam-pair coordinates.

    Splitting stops at ``max_depth``, when a node cannot produce two children
    of at least ``min_leaf`` samples, or when the node is pure. ``rng`` is
    accepted for interface symmetry; the fit itself is deterministic.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    feat, thr, left, right, value, n = _trees.fit_tree_arrays(
        data.z, data.y, max_depth, min_leaf
    )
    return RegressionTree(feature=feat, threshold=thr, left=left, right=right, value=value)


def _pad_ensemble(trees: list[RegressionTree]):
    width = max(t.n_nodes for t in trees)
    n = len(trees)
    features = np.full((n, width), -1, np.int64)
    thresholds = np.zeros((n, width))
    lefts = np.full((n, width), -1, np.int64)
    rights = np.full((n, width), -1, np.int64)
    values = np.zeros((n, width))
    for b, t in enumerate(trees):
        k = t.n_nodes
        features[b, :k] = t.feature
        thresholds[b, :k] = t.threshold
        lefts[b, :k] = t.left
        rights[b, :k] = t.right
        values[b, :k] = t.value
    return features, thresholds, lefts, rights, values


@dataclass(frozen=True)
class GbrtConfig:
    n_trees: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_leaf: int = 2
    standardize: bool = True


class GradientBoostedSurrogate:
    """Least-squares gradient-boosted trees with an ensemble-spread variance.

    Training: F_0 is the target mean; tree t fits the residuals of F_{t-1} and
    F_t = F_{t-1} + nu * h_t. Prediction treats each tree as a one-tree sketch
    of the full model, s_b = F_0 + T * nu * h_b, and reports their empirical
    mean (which telescopes to F_T(z) exactly) and unbiased variance. A single
    tree reports sigma = 0.
    """

    def __init__(self, config: GbrtConfig = GbrtConfig()):
        if config.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        self.config = config
        self._fitted = False

    def fit(self, data: Dataset, rng=None) -> "GradientBoostedSurrogate":
        cfg = self.config
        ys, ymean, yscale = _standardize(data.y, cfg.standardize)
        f0 = float(ys.mean())
        residual = ys - f0
        trees = []
        loss_path = [float(residual @ residual)]
        fitted = np.empty_like(residual)
        for _ in range(cfg.n_trees):
            feat, thr, left, right, value, n = _trees.fit_tree_arrays(
                data.z, residual, cfg.max_depth, cfg.min_leaf
            )
            tree = RegressionTree(feat, thr, left, right, value)
            _trees.predict_tree(feat, thr, left, right, value, data.z, fitted)
            residual = residual - cfg.learning_rate * fitted
            loss_path.append(float(residual @ residual))
            trees.append(tree)
        self.trees_ = trees
        self._packed = _pad_ensemble(trees)
        self.f0_ = f0
        self.y_mean_ = ymean
        self.y_scale_ = yscale
        self.train_loss_path_ = np.array(loss_path)
        self._fitted = True
        return self

    def predict_many(self, z) -> tuple[np.ndarray, np.ndarray]:
        if not self._fitted:
            raise RuntimeError("fit must be called before predict")
        q = _as_query(z)
        per_tree = _trees.predict_ensemble(*self._packed, q)  # (T, n)
        t = per_tree.shape[0]
        nu = self.config.learning_rate
        hsum = per_tree.sum(axis=0)
        mu = self.f0_ + nu * hsum
        if t > 1:
            dev = nu * (t * per_tree - hsum[None, :])  # s_b - mean(s_b)
            var = (dev * dev).sum(axis=0) / (t - 1)
        else:
            var = np.zeros_like(mu)
        return self.y_mean_ + self.y_scale_ * mu, self.y_scale_ * np.sqrt(var)

    def predict(self, z) -> PosteriorPrediction:
        mu, sigma = self.predict_many(z)
        return PosteriorPrediction(mu=float(mu[0]), sigma=float(sigma[0]))


@dataclass(frozen=True)
class RfConfig:
    n_trees: int = 50
    max_depth: int = 8
    min_leaf: int = 2
    standardize: bool = True


class RandomForestSurrogate:
    """Bagged regression trees; mean/variance across trees form the posterior.

    Each tree is fit on a bootstrap resample of the dataset (same size, drawn
    with replacement from ``rng``). A single-tree forest reports sigma = 0.
    """

    def __init__(self, config: RfConfig = RfConfig()):
        if config.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        self.config = config
        self._fitted = False

    def fit(self, data: Dataset, rng: np.random.Generator) -> "RandomForestSurrogate":
        if rng is None:
            raise ValueError("random forest fitting requires an explicit rng")
        cfg = self.config
        ys, ymean, yscale = _standardize(data.y, cfg.standardize)
        n = len(data)
        trees = []
        for _ in range(cfg.n_trees):
            idx = rng.integers(0, n, n)
            feat, thr, left, right, value, _ = _trees.fit_tree_arrays(
                data.z[idx], ys[idx], cfg.max_depth, cfg.min_leaf
            )
            trees.append(RegressionTree(feat, thr, left, right, value))
        self.trees_ = trees
        self._packed = _pad_ensemble(trees)
        self.y_mean_ = ymean
        self.y_scale_ = yscale
        self._fitted = True
        return self

    def predict_many(self, z) -> tuple[np.ndarray, np.ndarray]:
        if not self._fitted:
            raise RuntimeError("fit must be called before predict")
        q = _as_query(z)
        per_tree = _trees.predict_ensemble(*self._packed, q)
        mu = per_tree.mean(axis=0)
        if per_tree.shape[0] > 1:
            var = per_tree.var(axis=0, ddof=1)
        else:
            var = np.zeros_like(mu)
        return self.y_mean_ + self.y_scale_ * mu, self.y_scale_ * np.sqrt(var)

    def predict(self, z) -> PosteriorPrediction:
        mu, sigma = self.predict_many(z)
        return PosteriorPrediction(mu=float(mu[0]), sigma=float(sigma[0]))
