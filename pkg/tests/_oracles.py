"""Independent oracle computations shared by the tests.

Everything here deliberately avoids the code paths under test: eigenvalues
come from characteristic-polynomial roots, moments from plain Python
arithmetic, and synthetic corpora from numpy's eigensolver.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np


def char_poly_coefficients(matrix: np.ndarray) -> list[float]:
    """Faddeev-LeVerrier characteristic polynomial coefficients.

    Returns [1, c1, ..., cn] with p(x) = x^n + c1 x^(n-1) + ... + cn.
    """
    a = np.asarray(matrix, dtype=float)
    n = a.shape[0]
    coeffs = [1.0]
    m = np.zeros_like(a)
    c = 1.0
    for k in range(1, n + 1):
        m = a @ m + c * np.eye(n)
        c = -np.trace(a @ m) / k
        coeffs.append(c)
    return coeffs


def brute_force_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """Eigenvalues as roots of the characteristic polynomial, descending."""
    roots = np.roots(char_poly_coefficients(matrix))
    return np.sort(roots.real)[::-1]


def population_kurtosis(values) -> float:
    """Plain-Python m4/m2^2 moment computation."""
    data = [float(v) for v in values]
    mean = sum(data) / len(data)
    m2 = sum((v - mean) ** 2 for v in data) / len(data)
    m4 = sum((v - mean) ** 4 for v in data) / len(data)
    return m4 / (m2 * m2)


def pairwise_euclidean(points: np.ndarray) -> np.ndarray:
    diffs = points[:, None, :] - points[None, :, :]
    return np.sqrt((diffs ** 2).sum(axis=2))


def planar_cosine_embeddings(
    n: int, ambient: int, seed: int, scale: float = 0.9
) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors whose cosine distances equal a planar Euclidean metric.

    Builds the target similarity matrix S = 1 - eps*t from planar distances
    t and factors it with numpy's eigensolver (S is PSD for small eps since
    the double-centered unsquared Euclidean metric is PSD).  Returns
    (embeddings, target cosine-distance matrix).
    """
    rng = np.random.default_rng(seed)
    planar = rng.normal(size=(n, 2))
    target = pairwise_euclidean(planar)
    eps = scale / target.max()
    similarity = np.ones((n, n)) - eps * target
    np.fill_diagonal(similarity, 1.0)
    eigenvalues, eigenvectors = np.linalg.eigh(similarity)
    if eigenvalues.min() < -1e-9:
        raise AssertionError(f"similarity not PSD: {eigenvalues.min()}")
    factors = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
    factors = factors / np.linalg.norm(factors, axis=1, keepdims=True)
    if ambient > n:
        factors = np.hstack([factors, np.zeros((n, ambient - n))])
    return factors, eps * target


def toy_embedding(lean_text: str, dim: int = 32) -> list[float]:
    """Deterministic hash-based bag-of-token embedding for test corpora."""
    vector = [0.0] * dim
    token = []
    for ch in lean_text + " ":
        if ch.isalnum() or ch in "_.'":
            token.append(ch)
            continue
        if token:
            digest = hashlib.sha256("".join(token).encode("utf-8")).digest()
            index = int.from_bytes(digest[:4], "big") % dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vector[index] += sign
            token = []
    if all(v == 0.0 for v in vector):
        vector[0] = 1.0
    return vector


def corpus_line(proof_id, theorem_id, condition, lean_text, embedding) -> str:
    return json.dumps(
        {
            "proof_id": proof_id,
            "theorem_id": theorem_id,
            "condition": condition,
            "lean_text": lean_text,
            "embedding": [float(v) for v in embedding],
        },
        ensure_ascii=False,
    )


def write_corpus(path, rows) -> None:
    """rows: iterable of (proof_id, theorem_id, condition, lean_text, embedding)."""
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(corpus_line(*row) + "\n")


def planar_corpus_rows(n: int, ambient: int, seed: int, theorem_id: str = "thm_planar"):
    """Synthetic corpus rows whose cosine geometry is exactly planar."""
    embeddings, _ = planar_cosine_embeddings(n, ambient, seed)
    conditions = ["plain", "ablated"] * (n // 2) + ["plain"] * (n % 2)
    conditions[-1] = "human"
    return [
        (f"p{i:03d}", theorem_id, conditions[i], f"exact proof_{i}", embeddings[i])
        for i in range(n)
    ]
