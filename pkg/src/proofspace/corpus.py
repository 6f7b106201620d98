"""Proof-corpus ingestion and distance-level analysis.

Corpora are JSON Lines files, one proof per line, each carrying a condition
label (plain | ablated | human) and an embedding vector.  Comment stripping
is applied at load time; distance analysis is cosine-based; per-layer
distance stacks are ranked by the kurtosis of their pairwise distance
distribution (heavier tails = more structure).
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError, NumericError
from . import jsonio

__all__ = [
    "Condition",
    "ProofRecord",
    "DistanceMatrix",
    "LayerStack",
    "UnterminatedBlockComment",
    "MalformedRecord",
    "DuplicateProofId",
    "DimensionMismatch",
    "ZeroVector",
    "DegenerateDistribution",
    "strip_comments",
    "load_corpus",
    "cosine_distance_matrix",
    "kurtosis",
    "select_layer",
    "load_layer_stack",
    "save_layer_stack",
]


class UnterminatedBlockComment(DataError):
    def __init__(self, offset: int):
        super().__init__(f"unterminated block comment opened at byte offset {offset}")
        self.offset = offset


class MalformedRecord(DataError):
    def __init__(self, line_number: int, reason: str):
        super().__init__(f"malformed corpus record on line {line_number}: {reason}")
        self.line_number = line_number


class DuplicateProofId(DataError):
    pass


class DimensionMismatch(DataError):
    def __init__(self, proof_id: str, expected: int, got: int):
        super().__init__(
            f"embedding for {proof_id!r} has dimension {got}, expected {expected}"
        )
        self.proof_id = proof_id
        self.expected = expected
        self.got = got


class ZeroVector(NumericError):
    pass


class DegenerateDistribution(NumericError):
    """The value distribution has zero variance; the statistic is undefined."""


class Condition(enum.Enum):
    PLAIN = "plain"
    ABLATED = "ablated"
    HUMAN = "human"


@dataclass(frozen=True)
class ProofRecord:
    proof_id: str
    theorem_id: str
    condition: Condition
    lean_text: str
    embedding: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "embedding", np.asarray(self.embedding, dtype=float))
        if self.embedding.ndim != 1 or self.embedding.size == 0:
            raise DataError(f"embedding for {self.proof_id!r} must be a non-empty vector")


def strip_comments(lean_text: str) -> str:
    """Remove line (``--``) and nested block (``/- ... -/``) comments.

    String-literal contents are preserved verbatim; nothing else is
    collapsed, so the function is idempotent on comment-free text.
    """
    out: list[str] = []
    i, n = 0, len(lean_text)
    while i < n:
        ch = lean_text[i]
        two = lean_text[i:i + 2]
        if two == "/-":
            opened_at = i
            depth = 1
            i += 2
            while i < n and depth > 0:
                pair = lean_text[i:i + 2]
                if pair == "/-":
                    depth += 1
                    i += 2
                elif pair == "-/":
                    depth -= 1
                    i += 2
                else:
                    i += 1
            if depth > 0:
                raise UnterminatedBlockComment(len(lean_text[:opened_at].encode("utf-8")))
            continue
        if two == "--":
            while i < n and lean_text[i] != "\n":
                i += 1
            continue
        if ch == '"':
            out.append(ch)
            i += 1
            while i < n:
                ch = lean_text[i]
                out.append(ch)
                if ch == "\\" and i + 1 < n:
                    out.append(lean_text[i + 1])
                    i += 2
                    continue
                i += 1
                if ch == '"':
                    break
            continue
        out.append(ch)
        i += 1
    return "".join(out)


_REQUIRED_FIELDS = ("proof_id", "theorem_id", "condition", "lean_text", "embedding")


def load_corpus(path: str | os.PathLike) -> tuple[list[ProofRecord], int]:
    """Load a JSONL corpus; returns (records, embedding dimension)."""
    records: list[ProofRecord] = []
    seen_ids: set[str] = set()
    dimension: Optional[int] = None
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_number, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(raw, dict):
                raise MalformedRecord(line_number, "record is not an object")
            missing = [key for key in _REQUIRED_FIELDS if key not in raw]
            if missing:
                raise MalformedRecord(line_number, f"missing fields {missing}")
            try:
                condition = Condition(raw["condition"])
            except ValueError:
                raise MalformedRecord(
                    line_number, f"unknown condition {raw['condition']!r}"
                ) from None
            embedding = raw["embedding"]
            if not isinstance(embedding, list) or not embedding or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in embedding
            ):
                raise MalformedRecord(line_number, "embedding must be a non-empty number list")
            proof_id = raw["proof_id"]
            if not isinstance(proof_id, str) or not proof_id:
                raise MalformedRecord(line_number, "proof_id must be a non-empty string")
            if proof_id in seen_ids:
                raise DuplicateProofId(f"duplicate proof_id {proof_id!r} on line {line_number}")
            seen_ids.add(proof_id)
            if dimension is None:
                dimension = len(embedding)
            elif len(embedding) != dimension:
                raise DimensionMismatch(proof_id, dimension, len(embedding))
            try:
                text = strip_comments(raw["lean_text"])
            except TypeError:
                raise MalformedRecord(line_number, "lean_text must be a string") from None
            records.append(
                ProofRecord(
                    proof_id=proof_id,
                    theorem_id=raw["theorem_id"],
                    condition=condition,
                    lean_text=text,
                    embedding=np.asarray(embedding, dtype=float),
                )
            )
    if dimension is None:
        raise DataError(f"corpus file {os.fspath(path)!r} contains no records")
    return records, dimension


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric pairwise-distance matrix with a zero diagonal."""

    n: int
    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", entries)
        if entries.shape != (self.n, self.n):
            raise DataError(f"distance matrix shape {entries.shape} != ({self.n}, {self.n})")
        if not np.isfinite(entries).all():
            raise NumericError("distance matrix contains non-finite entries")
        if not np.array_equal(entries, entries.T):
            raise DataError("distance matrix must be symmetric")
        if np.any(np.diag(entries) != 0.0):
            raise DataError("distance matrix must have a zero diagonal")
        if entries.min() < 0.0 or entries.max() > 2.0 + 1e-9:
            raise DataError("cosine distances must lie in [0, 2]")

    def upper_triangle(self) -> np.ndarray:
        iu = np.triu_indices(self.n, k=1)
        return self.entries[iu]

    def to_json_text(self) -> str:
        return jsonio.dumps_canonical(
            {"n": self.n, "entries": [list(row) for row in self.entries]}
        )

    def save(self, path) -> None:
        jsonio.write_atomic(path, self.to_json_text())

    @classmethod
    def from_json_text(cls, text: str) -> "DistanceMatrix":
        try:
            payload = json.loads(text)
            return cls(n=int(payload["n"]), entries=np.asarray(payload["entries"], dtype=float))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed distance matrix: {exc}") from exc

    @classmethod
    def load(cls, path) -> "DistanceMatrix":
        return cls.from_json_text(jsonio.read_text(path))


def cosine_distance_matrix(
    embeddings: Sequence[np.ndarray] | np.ndarray,
    ids: Optional[Sequence[str]] = None,
) -> DistanceMatrix:
    """Pairwise cosine distances 1 - cos(v_i, v_j), symmetric by construction."""
    matrix = np.asarray(embeddings, dtype=float)
    if matrix.ndim != 2:
        raise DataError("embeddings must form an (n, d) array")
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        index = int(zero[0])
        label = ids[index] if ids is not None else f"index {index}"
        raise ZeroVector(f"embedding {label} is the zero vector")
    unit = matrix / norms[:, None]
    distances = 1.0 - unit @ unit.T
    np.clip(distances, 0.0, 2.0, out=distances)
    # Sub-ulp residue from the normalized dot product: parallel vectors are
    # exactly distance 0.
    distances[distances < 1e-14] = 0.0
    upper = np.triu(distances, k=1)
    return DistanceMatrix(n=matrix.shape[0], entries=upper + upper.T)


def kurtosis(values: Sequence[float] | np.ndarray) -> float:
    """Population Pearson kurtosis m4 / m2^2 (normal distribution -> 3)."""
    data = np.asarray(values, dtype=float)
    if data.ndim != 1 or data.size < 2:
        raise DataError("kurtosis needs at least two values")
    centered = data - data.mean()
    m2 = float(np.mean(centered ** 2))
    if m2 == 0.0:
        raise DegenerateDistribution("kurtosis undefined for zero-variance values")
    m4 = float(np.mean(centered ** 4))
    return m4 / (m2 * m2)


@dataclass(frozen=True)
class LayerStack:
    """Per-layer distance matrices over one proof population."""

    layers: tuple[tuple[int, DistanceMatrix], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        indices = [index for index, _ in self.layers]
        if any(index < 0 for index in indices):
            raise DataError("layer indices must be nonnegative")
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise DataError("layer indices must be strictly increasing")
        sizes = {matrix.n for _, matrix in self.layers}
        if len(sizes) > 1:
            raise DataError("all layers must cover the same proofs")


def select_layer(stack: LayerStack) -> int:
    """Layer index whose distance distribution has maximal kurtosis.

    Ties break to the smallest layer index.
    """
    if not stack.layers:
        raise DataError("layer stack is empty")
    best_index: Optional[int] = None
    best_value = -np.inf
    for index, matrix in stack.layers:
        if matrix.n < 3:
            raise DataError(f"layer {index} has fewer than 3 proofs")
        try:
            value = kurtosis(matrix.upper_triangle())
        except DegenerateDistribution as exc:
            raise DegenerateDistribution(
                f"layer {index}: distance distribution has zero variance"
            ) from exc
        if value > best_value:
            best_value = value
            best_index = index
    assert best_index is not None
    return best_index


def save_layer_stack(directory: str | os.PathLike, stack: LayerStack) -> None:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {"layers": []}
    for index, matrix in stack.layers:
        file_name = f"layer_{index}.dist.json"
        matrix.save(root / file_name)
        manifest["layers"].append({"layer_index": index, "file": file_name})
    jsonio.write_atomic(root / "manifest.json", jsonio.dumps_canonical(manifest))


def load_layer_stack(directory: str | os.PathLike) -> LayerStack:
    root = Path(directory)
    try:
        manifest = json.loads((root / "manifest.json").read_text("utf-8"))
        entries = manifest["layers"]
    except FileNotFoundError as exc:
        raise DataError(f"layer stack manifest not found in {os.fspath(directory)!r}") from exc
    except (json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"malformed layer stack manifest: {exc}") from exc
    layers = []
    for item in entries:
        try:
            index = int(item["layer_index"])
            matrix = DistanceMatrix.load(root / item["file"])
        except (KeyError, TypeError, FileNotFoundError) as exc:
            raise DataError(f"malformed layer stack entry {item!r}: {exc}") from exc
        layers.append((index, matrix))
    return LayerStack(tuple(layers))
