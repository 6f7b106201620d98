"""Gaussian mixture fitting over projected proof coordinates.

Maximum-likelihood EM with full covariance matrices, a diagonal
regularization of 1e-6 added at every M-step, and BIC-based selection of
the component count.  Initialization is k-means++ driven by an explicitly
documented splitmix64 generator so that identical (points, k, seed) inputs
reproduce bit-identical models anywhere:

* splitmix64: state advances by 0x9E3779B97F4A7C15 per draw; the output is
  the advanced state mixed by two xor-shift-multiply rounds
  (0xBF58476D1CE4E5B9 over >>30, 0x94D049BB133111EB over >>27) and a final
  >>31 xor.  Uniform floats in [0, 1) take the top 53 bits / 2^53.
* k-means++: candidate points are walked in lexicographic coordinate order
  (so permuting the input rows cannot change which point values are
  chosen); the first center is drawn uniformly, each later center with
  probability proportional to its squared distance to the nearest chosen
  center, one candidate per draw.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError, NumericError
from . import jsonio

__all__ = [
    "GmmModel",
    "SplitMix64",
    "TooFewPoints",
    "NonFiniteLikelihood",
    "NotPositiveDefinite",
    "fit_gmm",
    "select_gmm",
    "covariance_ellipse",
]

COVARIANCE_FLOOR = 1e-6
EM_REL_TOL = 1e-8
EM_MAX_ITERS = 500
_MASK64 = (1 << 64) - 1


class TooFewPoints(NumericError):
    pass


class NonFiniteLikelihood(NumericError):
    pass


class NotPositiveDefinite(NumericError):
    pass


class SplitMix64:
    """Deterministic 64-bit generator; the algorithm is part of the contract."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53


@dataclass(frozen=True)
class GmmModel:
    """A fitted mixture: weights, means, full covariances, and diagnostics."""

    k: int
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: float
    bic: float
    responsibilities: np.ndarray
    log_likelihood_trace: tuple[float, ...] = field(default=(), compare=False)
    n_iterations: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        for name in ("weights", "means", "covariances", "responsibilities"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if abs(float(self.weights.sum()) - 1.0) > 1e-9 or self.weights.min() < 0:
            raise NumericError("mixture weights must be nonnegative and sum to 1")
        row_sums = self.responsibilities.sum(axis=1)
        if row_sums.size and np.abs(row_sums - 1.0).max() > 1e-9:
            raise NumericError("responsibility rows must sum to 1")

    def to_json_text(self, include_responsibilities: bool = True) -> str:
        payload = {
            "k": self.k,
            "weights": list(self.weights),
            "means": [list(row) for row in self.means],
            "covariances": [[list(row) for row in cov] for cov in self.covariances],
            "log_likelihood": float(self.log_likelihood),
            "bic": float(self.bic),
        }
        if include_responsibilities:
            payload["responsibilities"] = [list(row) for row in self.responsibilities]
        return jsonio.dumps_canonical(payload)

    def save(self, path, include_responsibilities: bool = True) -> None:
        jsonio.write_atomic(path, self.to_json_text(include_responsibilities))

    @classmethod
    def from_json_text(cls, text: str) -> "GmmModel":
        try:
            payload = json.loads(text)
            responsibilities = payload.get("responsibilities")
            means = np.asarray(payload["means"], dtype=float)
            return cls(
                k=int(payload["k"]),
                weights=np.asarray(payload["weights"], dtype=float),
                means=means,
                covariances=np.asarray(payload["covariances"], dtype=float),
                log_likelihood=float(payload["log_likelihood"]),
                bic=float(payload["bic"]),
                responsibilities=(
                    np.zeros((0, int(payload["k"])))
                    if responsibilities is None
                    else np.asarray(responsibilities, dtype=float)
                ),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed GMM model: {exc}") from exc

    @classmethod
    def load(cls, path) -> "GmmModel":
        return cls.from_json_text(jsonio.read_text(path))


def _canonical_order(points: np.ndarray) -> np.ndarray:
    # lexsort's last key is primary: sort by column 0, then 1, ...
    return np.lexsort(tuple(points[:, j] for j in reversed(range(points.shape[1]))))


def _weighted_pick(rng: SplitMix64, order: np.ndarray, weights: np.ndarray) -> int:
    total = float(weights[order].sum())
    if total <= 0.0:
        # All mass is zero (duplicated points already covered): uniform pick.
        position = min(int(rng.next_float() * order.size), order.size - 1)
        return int(order[position])
    target = rng.next_float() * total
    cumulative = 0.0
    fallback = int(order[-1])
    for index in order:
        weight = float(weights[index])
        if weight <= 0.0:
            continue
        cumulative += weight
        fallback = int(index)
        if target < cumulative:
            return int(index)
    return fallback


def _kmeanspp_centers(points: np.ndarray, k: int, rng: SplitMix64) -> np.ndarray:
    n = points.shape[0]
    order = _canonical_order(points)
    first = min(int(rng.next_float() * n), n - 1)
    centers = [points[order[first]]]
    for _ in range(1, k):
        diffs = points[:, None, :] - np.asarray(centers)[None, :, :]
        nearest_sq = (diffs ** 2).sum(axis=2).min(axis=1)
        centers.append(points[_weighted_pick(rng, order, nearest_sq)])
    return np.asarray(centers, dtype=float)


def _log_gaussian(points: np.ndarray, mean: np.ndarray, covariance: np.ndarray) -> np.ndarray:
    dim = points.shape[1]
    try:
        chol = np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError as exc:
        raise NonFiniteLikelihood("covariance lost positive definiteness") from exc
    solved = np.linalg.solve(chol, (points - mean).T)
    mahalanobis = (solved ** 2).sum(axis=0)
    log_det = 2.0 * float(np.log(np.diag(chol)).sum())
    return -0.5 * (dim * math.log(2.0 * math.pi) + log_det + mahalanobis)


def _bic(log_likelihood: float, k: int, dim: int, n: int) -> float:
    params = (k - 1) + k * dim + k * dim * (dim + 1) // 2
    return -2.0 * log_likelihood + params * math.log(n)


def fit_gmm(points: np.ndarray, k: int, seed: int) -> GmmModel:
    """Fit a k-component full-covariance Gaussian mixture by EM.

    Deterministic for fixed (points, k, seed); the log-likelihood trace is
    non-decreasing, and covariance eigenvalues stay at or above the 1e-6
    regularization floor.
    """
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] < 1:
        raise DataError("points must form an (n, dim) array")
    n, dim = data.shape
    if k < 1:
        raise DataError("component count must be >= 1")
    if n < k:
        raise TooFewPoints(f"cannot fit {k} components to {n} points")
    if not np.isfinite(data).all():
        raise NonFiniteLikelihood("input points contain non-finite values")

    centers = _kmeanspp_centers(data, k, SplitMix64(seed))
    # Hard assignment to the nearest center seeds the first M-step, so each
    # component starts from its own cluster's statistics.
    sq = ((data[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = sq.argmin(axis=1)
    responsibilities = np.zeros((n, k))
    responsibilities[np.arange(n), labels] = 1.0

    weights = np.full(k, 1.0 / k)
    means = centers.copy()
    covariances = np.zeros((k, dim, dim))

    def m_step(resp: np.ndarray) -> None:
        nonlocal weights, means, covariances
        mass = resp.sum(axis=0)
        safe_mass = np.maximum(mass, 1e-300)
        weights = mass / n
        weights = weights / weights.sum()
        means = (resp.T @ data) / safe_mass[:, None]
        for j in range(k):
            deviation = data - means[j]
            weighted = resp[:, j][:, None] * deviation
            cov = (weighted.T @ deviation) / safe_mass[j]
            covariances[j] = 0.5 * (cov + cov.T) + COVARIANCE_FLOOR * np.eye(dim)

    m_step(responsibilities)

    def e_step() -> tuple[np.ndarray, float]:
        log_prob = np.empty((n, k))
        for j in range(k):
            log_prob[:, j] = math.log(max(weights[j], 1e-300)) + _log_gaussian(
                data, means[j], covariances[j]
            )
        row_max = log_prob.max(axis=1, keepdims=True)
        log_norm = row_max[:, 0] + np.log(np.exp(log_prob - row_max).sum(axis=1))
        total = float(log_norm.sum())
        if not math.isfinite(total):
            raise NonFiniteLikelihood("log-likelihood became non-finite")
        return np.exp(log_prob - log_norm[:, None]), total

    trace: list[float] = []
    log_likelihood = -np.inf
    iterations = 0
    for iteration in range(EM_MAX_ITERS):
        iterations = iteration + 1
        responsibilities, new_log_likelihood = e_step()
        trace.append(new_log_likelihood)
        if iteration > 0:
            improvement = (new_log_likelihood - log_likelihood) / max(
                abs(log_likelihood), 1e-12
            )
            log_likelihood = new_log_likelihood
            if improvement < EM_REL_TOL:
                break
        else:
            log_likelihood = new_log_likelihood
        m_step(responsibilities)
    else:
        # Iteration cap hit right after an M-step: realign the reported
        # likelihood and responsibilities with the final parameters.
        responsibilities, log_likelihood = e_step()
        trace.append(log_likelihood)

    return GmmModel(
        k=k,
        weights=weights,
        means=means,
        covariances=covariances,
        log_likelihood=log_likelihood,
        bic=_bic(log_likelihood, k, dim, n),
        responsibilities=responsibilities,
        log_likelihood_trace=tuple(trace),
        n_iterations=iterations,
    )


def select_gmm(points: np.ndarray, k_max: int, seed: int) -> GmmModel:
    """Fit k = 1..min(k_max, n) and keep the minimal-BIC model (ties -> smaller k)."""
    data = np.asarray(points, dtype=float)
    if k_max < 1:
        raise DataError("k_max must be >= 1")
    best: Optional[GmmModel] = None
    for k in range(1, min(k_max, data.shape[0]) + 1):
        model = fit_gmm(data, k, seed)
        if best is None or model.bic < best.bic:
            best = model
    assert best is not None
    return best


def covariance_ellipse(
    mean: np.ndarray, covariance: np.ndarray, n_sigma: float
) -> tuple[np.ndarray, tuple[float, float], float]:
    """(center, semi-axes, rotation) of the n-sigma ellipse of a 2x2 covariance.

    Semi-axes are n_sigma * sqrt(eigenvalues), descending; the rotation is
    the principal-eigenvector orientation in (-pi/2, pi/2].
    """
    center = np.asarray(mean, dtype=float)
    cov = np.asarray(covariance, dtype=float)
    if cov.shape != (2, 2) or center.shape != (2,):
        raise DataError("covariance_ellipse expects a 2-vector mean and 2x2 covariance")
    if n_sigma <= 0:
        raise DataError("n_sigma must be positive")
    a, b, c = float(cov[0, 0]), float(cov[0, 1]), float(cov[1, 1])
    if abs(b - float(cov[1, 0])) > 1e-9 * max(1.0, abs(b)):
        raise NotPositiveDefinite("covariance is not symmetric")
    half_trace = 0.5 * (a + c)
    radius = math.hypot(0.5 * (a - c), b)
    lam_max, lam_min = half_trace + radius, half_trace - radius
    if lam_min <= 0.0:
        raise NotPositiveDefinite(f"covariance has non-positive eigenvalue {lam_min}")
    angle = 0.5 * math.atan2(2.0 * b, a - c)
    if angle <= -math.pi / 2:
        angle += math.pi
    return (
        center.copy(),
        (n_sigma * math.sqrt(lam_max), n_sigma * math.sqrt(lam_min)),
        angle,
    )
