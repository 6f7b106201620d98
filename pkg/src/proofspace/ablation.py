"""Tactic ablation sets, lemma whitelists, and the emitted constraint config.

An ablation set is a taxonomy slice (conjunction over the level, category,
tier, and named-tactic axes) closed over variants, so that forbidding a
base tactic also forbids its suffixed variants.  The emitted config is a
canonical JSON document consumed by an external enforcer; identical inputs
always produce identical bytes.
"""

from __future__ import annotations

import functools
import json
import warnings
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Iterator, Optional, Sequence

from .errors import DataError
from .corpus import strip_comments
from .taxonomy import AxiomTier, TacticDb
from . import jsonio

__all__ = [
    "SliceSelector",
    "AblationConfig",
    "ProjectCorpus",
    "UnknownTactic",
    "IndexOutOfRange",
    "EmptySelectionWarning",
    "build_ablation_set",
    "extract_identifiers",
    "iter_identifier_tokens",
    "build_whitelist",
    "emit_config",
    "load_known_lemmas",
]


class UnknownTactic(DataError):
    def __init__(self, names: Iterable[str]):
        self.names = sorted(names)
        super().__init__(f"tactics not present in the db: {self.names}")


class IndexOutOfRange(DataError):
    pass


class EmptySelectionWarning(UserWarning):
    """The selector matched no tactics."""


@dataclass(frozen=True)
class SliceSelector:
    """Slice of the tactic space; absent axes are unconstrained."""

    levels: Optional[frozenset[int]] = None
    categories: Optional[frozenset[str]] = None
    tiers: Optional[frozenset[AxiomTier]] = None
    named_tactics: Optional[frozenset[str]] = None

    def __post_init__(self) -> None:
        for name in ("levels", "categories", "tiers", "named_tactics"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, frozenset(value))
        if all(
            getattr(self, name) is None
            for name in ("levels", "categories", "tiers", "named_tactics")
        ):
            raise DataError("selector must constrain at least one axis")


@dataclass(frozen=True)
class AblationConfig:
    forbidden_tactics: tuple[str, ...]
    lemma_whitelist: Optional[tuple[str, ...]]
    label: str
    taxonomy_version: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "forbidden_tactics", tuple(self.forbidden_tactics))
        if self.lemma_whitelist is not None:
            object.__setattr__(self, "lemma_whitelist", tuple(self.lemma_whitelist))
        for field_name in ("forbidden_tactics", "lemma_whitelist"):
            value = getattr(self, field_name)
            if value is None:
                continue
            if list(value) != sorted(set(value)):
                raise DataError(f"{field_name} must be duplicate-free and sorted")

    def to_json_text(self) -> str:
        return jsonio.dumps_canonical(
            {
                "label": self.label,
                "taxonomy_version": self.taxonomy_version,
                "forbidden_tactics": list(self.forbidden_tactics),
                "lemma_whitelist": (
                    None if self.lemma_whitelist is None else list(self.lemma_whitelist)
                ),
            }
        )

    @classmethod
    def from_json_text(cls, text: str) -> "AblationConfig":
        try:
            payload = json.loads(text)
            whitelist = payload["lemma_whitelist"]
            return cls(
                forbidden_tactics=tuple(payload["forbidden_tactics"]),
                lemma_whitelist=None if whitelist is None else tuple(whitelist),
                label=payload["label"],
                taxonomy_version=payload["taxonomy_version"],
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"malformed ablation config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "AblationConfig":
        return cls.from_json_text(jsonio.read_text(path))


@dataclass(frozen=True)
class ProjectCorpus:
    """Ordered (theorem_id, lean_text) pairs reflecting source order."""

    proofs: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "proofs", tuple(tuple(pair) for pair in self.proofs))
        ids = [theorem_id for theorem_id, _ in self.proofs]
        if len(ids) != len(set(ids)):
            raise DataError("project corpus theorem_id values must be unique")

    def __len__(self) -> int:
        return len(self.proofs)


def build_ablation_set(db: TacticDb, selector: SliceSelector) -> set[str]:
    """Names matching every present selector axis, closed over variants."""
    if len(db) == 0:
        raise DataError("cannot slice an empty tactic db")
    selected: set[str] = set()
    for record in db:
        if selector.levels is not None and record.level not in selector.levels:
            continue
        if selector.categories is not None and record.category.name not in selector.categories:
            continue
        if selector.tiers is not None and record.tier not in selector.tiers:
            continue
        selected.add(record.name)
    if selector.named_tactics is not None:
        selected |= selector.named_tactics
    closure = set(selected)
    frontier = list(selected)
    while frontier:
        base = frontier.pop()
        for variant in db.variants_of(base):
            if variant not in closure:
                closure.add(variant)
                frontier.append(variant)
    if not closure:
        warnings.warn("ablation selector matched no tactics", EmptySelectionWarning, stacklevel=2)
    return closure


@functools.lru_cache(maxsize=1)
def _keyword_table() -> frozenset[str]:
    text = resources.files("proofspace.data").joinpath("lean_keywords.json").read_text("utf-8")
    return frozenset(json.loads(text)["keywords"])


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_ident_char(ch: str) -> bool:
    return ch.isalpha() or ch.isdigit() or ch in "_'"


def iter_identifier_tokens(lean_text: str) -> Iterator[str]:
    """Yield maximal identifier tokens (dotted segments) in order.

    Comments are stripped first and string-literal contents are skipped.
    Every occurrence is yielded, keywords included; ``extract_identifiers``
    applies the keyword filter.
    """
    text = strip_comments(lean_text)
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == '"':
            i += 1
            while i < n:
                if text[i] == "\\" and i + 1 < n:
                    i += 2
                    continue
                if text[i] == '"':
                    i += 1
                    break
                i += 1
            continue
        if _is_ident_start(ch):
            start = i
            i += 1
            while i < n and _is_ident_char(text[i]):
                i += 1
            # Dotted continuation: Nat.add_comm is one token.
            while i + 1 < n and text[i] == "." and _is_ident_start(text[i + 1]):
                i += 2
                while i < n and _is_ident_char(text[i]):
                    i += 1
            yield text[start:i]
            continue
        if ch.isdigit():
            while i < n and (text[i].isalnum() or text[i] in "._"):
                i += 1
            continue
        i += 1


def extract_identifiers(lean_text: str) -> set[str]:
    """All identifier tokens in ``lean_text``, minus the Lean keyword table."""
    keywords = _keyword_table()
    return {token for token in iter_identifier_tokens(lean_text) if token not in keywords}


def build_whitelist(
    corpus: ProjectCorpus,
    position: int,
    known_lemmas: Iterable[str],
    restrict_to_known: bool = True,
) -> list[str]:
    """Sorted lemma identifiers usable at ``position`` in the project.

    The whitelist is the union of identifiers over all proofs strictly
    before ``position``, intersected with ``known_lemmas`` (pass
    ``restrict_to_known=False`` to keep every extracted identifier).
    """
    if position < 0 or position > len(corpus):
        raise IndexOutOfRange(
            f"position {position} outside [0, {len(corpus)}]"
        )
    used: set[str] = set()
    for _, lean_text in corpus.proofs[:position]:
        used |= extract_identifiers(lean_text)
    if restrict_to_known:
        used &= set(known_lemmas)
    return sorted(used)


def emit_config(
    forbidden: Iterable[str],
    whitelist: Optional[Sequence[str]],
    label: str,
    db: TacticDb,
) -> tuple[AblationConfig, str]:
    """Build the constraint config and its canonical JSON text."""
    forbidden_set = set(forbidden)
    unknown = {name for name in forbidden_set if name not in db}
    if unknown:
        raise UnknownTactic(unknown)
    config = AblationConfig(
        forbidden_tactics=tuple(sorted(forbidden_set)),
        lemma_whitelist=None if whitelist is None else tuple(sorted(set(whitelist))),
        label=label,
        taxonomy_version=db.registry_version,
    )
    return config, config.to_json_text()


def load_known_lemmas(path) -> set[str]:
    """Read a newline-delimited identifier file."""
    with open(path, "r", encoding="utf-8") as handle:
        return {line.strip() for line in handle if line.strip()}
