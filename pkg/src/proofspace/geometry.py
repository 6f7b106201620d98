"""Low-dimensional projection of distance matrices.

Classical (Torgerson) MDS: double-center the squared distances, take the
top-k eigenpairs of the resulting Gram matrix, and scale eigenvectors by
the square roots of their (non-negative-clamped) eigenvalues.  The
eigendecomposition is a cyclic Jacobi iteration, chosen because it is
deterministic, seed-free, and easy to validate against brute-force
characteristic-polynomial roots on small fixtures.

An optional SMACOF refinement iterates the Guttman transform to reduce raw
stress; stress never increases across iterations.  Fidelity is summarized
by ``r``, the Pearson correlation between input distances and embedded
Euclidean distances (the quantity reported per target dimension in the
analysis tables).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError, NumericError
from .corpus import DegenerateDistribution, DistanceMatrix
from . import jsonio

__all__ = [
    "MdsSolution",
    "TooFewPoints",
    "NonFiniteInput",
    "NonFiniteIterate",
    "classical_mds",
    "smacof_refine",
    "distance_correlation",
    "jacobi_eigh",
    "double_center",
]

JACOBI_MAX_SWEEPS = 100
JACOBI_TOL_FACTOR = 1e-12
STRESS_RATIO_EPS = 1e-15
_CONSTANT_REL_TOL = 1e-12


class TooFewPoints(NumericError):
    pass


class NonFiniteInput(NumericError):
    pass


class NonFiniteIterate(NumericError):
    """SMACOF produced a non-finite configuration or stress."""


@dataclass(frozen=True)
class MdsSolution:
    """Embedded coordinates plus the fidelity diagnostics of the projection.

    ``coordinates`` is (n, k) and column-mean-centered; ``stress`` is raw
    stress; ``r`` the distance correlation; ``eigenvalues_used`` the top-k
    eigenvalues (descending, possibly negative before clamping);
    ``clamped_count`` how many of those were clamped to zero for scaling.
    """

    k: int
    coordinates: np.ndarray
    stress: float
    r: float
    eigenvalues_used: tuple[float, ...]
    clamped_count: int = 0
    stress_trace: Optional[tuple[float, ...]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        coords = np.asarray(self.coordinates, dtype=float)
        object.__setattr__(self, "coordinates", coords)
        object.__setattr__(self, "eigenvalues_used", tuple(self.eigenvalues_used))
        if coords.ndim != 2 or coords.shape[1] != self.k:
            raise DataError(f"coordinates shape {coords.shape} does not match k={self.k}")
        if not -1.0 - 1e-9 <= self.r <= 1.0 + 1e-9:
            raise NumericError(f"distance correlation {self.r} outside [-1, 1]")
        col_sums = np.abs(coords.sum(axis=0))
        if coords.shape[0] and col_sums.max() > 1e-9 * max(coords.shape[0], 1):
            raise NumericError("coordinates are not column-mean-centered")

    def to_json_text(self) -> str:
        return jsonio.dumps_canonical(
            {
                "coordinates": [list(row) for row in self.coordinates],
                "stress": float(self.stress),
                "r": float(self.r),
                "eigenvalues_used": list(self.eigenvalues_used),
            }
        )

    def save(self, path) -> None:
        jsonio.write_atomic(path, self.to_json_text())

    @classmethod
    def from_json_text(cls, text: str) -> "MdsSolution":
        try:
            payload = json.loads(text)
            coords = np.asarray(payload["coordinates"], dtype=float)
            return cls(
                k=coords.shape[1] if coords.ndim == 2 else 0,
                coordinates=coords,
                stress=float(payload["stress"]),
                r=float(payload["r"]),
                eigenvalues_used=tuple(payload["eigenvalues_used"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed MDS solution: {exc}") from exc

    @classmethod
    def load(cls, path) -> "MdsSolution":
        return cls.from_json_text(jsonio.read_text(path))


def double_center(distances: DistanceMatrix) -> np.ndarray:
    """Gram matrix B = -1/2 J D^2 J with J the centering projector."""
    squared = distances.entries ** 2
    row_means = squared.mean(axis=1)
    grand_mean = squared.mean()
    return -0.5 * (squared - row_means[:, None] - row_means[None, :] + grand_mean)


def jacobi_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps row-major over the strict upper triangle, rotating away each
    pivot; converges when every off-diagonal magnitude drops below
    1e-12 * ||A||_F (Frobenius norm of the input), capped at 100 sweeps.
    Returns (eigenvalues, eigenvectors-as-columns, sweeps used), unsorted.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DataError("jacobi_eigh needs a square matrix")
    if not np.isfinite(a).all():
        raise NonFiniteInput("matrix contains non-finite entries")
    vectors = np.eye(n)
    threshold = JACOBI_TOL_FACTOR * float(np.linalg.norm(matrix, ord="fro"))
    sweeps = 0
    for sweep in range(JACOBI_MAX_SWEEPS):
        off = a - np.diag(np.diag(a))
        if np.abs(off).max() <= threshold:
            break
        sweeps = sweep + 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= threshold:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vec_p, vec_q = vectors[:, p].copy(), vectors[:, q].copy()
                vectors[:, p] = c * vec_p - s * vec_q
                vectors[:, q] = s * vec_p + c * vec_q
    return np.diag(a).copy(), vectors, sweeps


def _pairwise_distances(coords: np.ndarray) -> np.ndarray:
    deltas = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((deltas ** 2).sum(axis=2))


def _raw_stress(distances: np.ndarray, coords: np.ndarray) -> float:
    embedded = _pairwise_distances(coords)
    iu = np.triu_indices(distances.shape[0], k=1)
    diff = distances[iu] - embedded[iu]
    return float((diff ** 2).sum())


def _is_constant(values: np.ndarray) -> bool:
    spread = float(values.max() - values.min()) if values.size else 0.0
    scale = max(1.0, float(np.abs(values).max())) if values.size else 1.0
    return spread <= _CONSTANT_REL_TOL * scale


def distance_correlation(distances: DistanceMatrix, coordinates: np.ndarray) -> float:
    """Pearson correlation between input and embedded pairwise distances.

    When both distance lists are constant the configuration preserves all
    relative structure and r is 1 by convention (covers exact embeddings of
    equilateral configurations); a one-sided constant list is degenerate.
    """
    coords = np.asarray(coordinates, dtype=float)
    if coords.ndim != 2 or coords.shape[0] != distances.n:
        raise DataError("coordinates do not match the distance matrix")
    original = distances.upper_triangle()
    embedded = _pairwise_distances(coords)[np.triu_indices(distances.n, k=1)]
    const_original = _is_constant(original)
    const_embedded = _is_constant(embedded)
    if const_original and const_embedded:
        return 1.0
    if const_original or const_embedded:
        raise DegenerateDistribution(
            "one distance list has zero variance; correlation undefined"
        )
    centered_x = original - original.mean()
    centered_y = embedded - embedded.mean()
    return float(
        (centered_x @ centered_y)
        / math.sqrt((centered_x @ centered_x) * (centered_y @ centered_y))
    )


def _apply_sign_convention(coords: np.ndarray) -> np.ndarray:
    for j in range(coords.shape[1]):
        column = coords[:, j]
        nonzero = np.flatnonzero(column)
        if nonzero.size and column[nonzero[0]] < 0:
            coords[:, j] = -column
    return coords


def classical_mds(distances: DistanceMatrix, k: int) -> MdsSolution:
    """Torgerson MDS of a distance matrix into k dimensions."""
    n = distances.n
    if n < 2:
        raise TooFewPoints("classical MDS needs at least 2 points")
    if k < 1:
        raise DataError(f"target dimension must be >= 1, got {k}")
    if k > n - 1:
        raise TooFewPoints(f"k={k} needs at least {k + 1} points, got {n}")
    if not np.isfinite(distances.entries).all():
        raise NonFiniteInput("distance matrix contains non-finite entries")

    gram = double_center(distances)
    eigenvalues, eigenvectors, _ = jacobi_eigh(gram)
    order = np.argsort(-eigenvalues, kind="stable")
    top = order[:k]
    top_values = eigenvalues[top]
    clamped = int(np.sum(top_values < 0.0))
    scale = np.sqrt(np.maximum(top_values, 0.0))
    coords = _apply_sign_convention(eigenvectors[:, top] * scale[None, :])
    # Eigenvectors of the centered Gram matrix are centered up to round-off;
    # re-centering keeps the column-sum invariant exact.
    coords = coords - coords.mean(axis=0)

    return MdsSolution(
        k=k,
        coordinates=coords,
        stress=_raw_stress(distances.entries, coords),
        r=distance_correlation(distances, coords),
        eigenvalues_used=tuple(float(v) for v in top_values),
        clamped_count=clamped,
    )


def smacof_refine(
    distances: DistanceMatrix,
    init: MdsSolution,
    max_iters: int = 300,
    tol: float = 1e-9,
) -> MdsSolution:
    """Guttman-transform refinement of an initial configuration.

    Minimizes raw stress sum_{i<j} (d_ij - ||x_i - x_j||)^2; stops when the
    relative stress decrease falls below ``tol`` or after ``max_iters``
    transforms.  The recorded stress trace is non-increasing.
    """
    if tol <= 0:
        raise DataError("tol must be positive")
    n = distances.n
    target = distances.entries
    coords = np.array(init.coordinates, dtype=float)
    if coords.shape[0] != n:
        raise DataError("init does not match the distance matrix")

    stress = _raw_stress(target, coords)
    trace = [stress]
    for _ in range(max_iters):
        embedded = _pairwise_distances(coords)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(embedded > 0.0, target / embedded, 0.0)
        np.fill_diagonal(ratios, 0.0)
        b_matrix = -ratios
        np.fill_diagonal(b_matrix, ratios.sum(axis=1))
        coords = (b_matrix @ coords) / n
        new_stress = _raw_stress(target, coords)
        if not (np.isfinite(coords).all() and np.isfinite(new_stress)):
            raise NonFiniteIterate("SMACOF iterate is non-finite")
        trace.append(new_stress)
        improvement = (stress - new_stress) / max(stress, STRESS_RATIO_EPS)
        stress = new_stress
        if improvement < tol:
            break

    coords = coords - coords.mean(axis=0)
    return MdsSolution(
        k=init.k,
        coordinates=coords,
        stress=stress,
        r=distance_correlation(distances, coords),
        eigenvalues_used=init.eigenvalues_used,
        clamped_count=init.clamped_count,
        stress_trace=tuple(trace),
    )
