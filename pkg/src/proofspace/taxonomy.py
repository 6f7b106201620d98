"""Three-axis tactic classification: abstraction level x functional category x axiom tier.

A tactic name is classified by the first matching rule:

1. exact entry in the static base table;
2. variant inheritance (``simp!`` inherits everything from ``simp``; the
   suffix alphabet is data, not code);
3. longest-prefix match against the prefix family table;
4. category derived from registry metadata (core reference headings for
   ``Init.*``/``Std.*``/``Lean.*`` modules, module-path derivation for
   ``Mathlib.Tactic.<X>.*``), with level/tier taken from the rule-set
   defaults when it declares any.

If no rule applies the tactic must be probed or hand-entered and
``NoRuleMatched`` is raised.
"""

from __future__ import annotations

import enum
import functools
import json
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Iterator, Mapping, Optional

from .errors import DataError
from . import jsonio

__all__ = [
    "AxiomTier",
    "CategorySource",
    "FunctionalCategory",
    "Provenance",
    "TacticRecord",
    "TacticDb",
    "TierDistribution",
    "RegistryEntry",
    "RuleSet",
    "KNOWN_AXIOMS",
    "WEAK_AXIOMS",
    "SORRY_AXIOM",
    "NoRuleMatched",
    "SorryDetected",
    "EmptyDb",
    "UnknownAxiomWarning",
    "classify_tactic",
    "tier_of_axioms",
    "taxonomy_stats",
    "load_default_rules",
]

MIN_LEVEL, MAX_LEVEL = 0, 4

#: Foundational axioms the tier lattice knows about.  ``funext`` is grouped
#: with the weak pair because it is quotient-derived in Lean's prelude.
WEAK_AXIOMS = frozenset({"propext", "Quot.sound", "funext"})
CHOICE_AXIOM = "Classical.choice"
KNOWN_AXIOMS = WEAK_AXIOMS | {CHOICE_AXIOM}
SORRY_AXIOM = "sorryAx"

UNCATEGORIZED = "Uncategorized"


class NoRuleMatched(DataError):
    """No static entry, variant base, prefix family, or default applied."""


class SorryDetected(DataError):
    """The axiom set contains ``sorryAx``: the proof is incomplete."""


class EmptyDb(DataError):
    """The operation needs a non-empty tactic database."""


class UnknownAxiomWarning(UserWarning):
    """An axiom outside the known list was conservatively escalated."""


class AxiomTier(enum.IntEnum):
    """Axiom tiers, totally ordered from constructive to classical."""

    STRONGLY_CONSTRUCTIVE = 0
    WEAKLY_CONSTRUCTIVE = 1
    CLASSICAL = 2

    @property
    def label(self) -> str:
        return _TIER_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "AxiomTier":
        for tier, name in _TIER_LABELS.items():
            if name == label:
                return tier
        raise DataError(f"unknown axiom tier label {label!r}")


_TIER_LABELS = {
    AxiomTier.STRONGLY_CONSTRUCTIVE: "strongly_constructive",
    AxiomTier.WEAKLY_CONSTRUCTIVE: "weakly_constructive",
    AxiomTier.CLASSICAL: "classical",
}


class CategorySource(str, enum.Enum):
    CORE_REFERENCE = "core-reference-heading"
    MATHLIB_PATH = "mathlib-module-path"
    FALLBACK = "fallback"


class Provenance(str, enum.Enum):
    STATIC = "static"
    VARIANT_INHERITED = "variant-inherited"
    PREFIX_RULE = "prefix-rule"
    PROBED = "probed"


@dataclass(frozen=True)
class FunctionalCategory:
    name: str
    source: CategorySource

    def __post_init__(self) -> None:
        if not self.name:
            raise DataError("functional category name must be non-empty")
        if self.source is CategorySource.FALLBACK and self.name != UNCATEGORIZED:
            raise DataError("fallback categories must be named 'Uncategorized'")


FALLBACK_CATEGORY = FunctionalCategory(UNCATEGORIZED, CategorySource.FALLBACK)


@dataclass(frozen=True)
class TacticRecord:
    name: str
    defining_module: str
    level: int
    category: FunctionalCategory
    tier: AxiomTier
    provenance: Provenance
    base_of_variant: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.name:
            raise DataError("tactic name must be non-empty")
        if not MIN_LEVEL <= self.level <= MAX_LEVEL:
            raise DataError(
                f"abstraction level {self.level} outside [{MIN_LEVEL}, {MAX_LEVEL}]"
            )
        if self.provenance is Provenance.VARIANT_INHERITED:
            if not self.base_of_variant or self.base_of_variant == self.name:
                raise DataError(
                    f"variant record {self.name!r} must name a distinct base tactic"
                )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "defining_module": self.defining_module,
            "level": self.level,
            "category": {"name": self.category.name, "source": self.category.source.value},
            "tier": self.tier.label,
            "provenance": self.provenance.value,
            "base_of_variant": self.base_of_variant,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TacticRecord":
        try:
            category = FunctionalCategory(
                data["category"]["name"], CategorySource(data["category"]["source"])
            )
            return cls(
                name=data["name"],
                defining_module=data["defining_module"],
                level=int(data["level"]),
                category=category,
                tier=AxiomTier.from_label(data["tier"]),
                provenance=Provenance(data["provenance"]),
                base_of_variant=data.get("base_of_variant"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed tactic record: {exc}") from exc


@dataclass(frozen=True)
class TacticDb:
    """Immutable name-keyed collection of tactic records."""

    records: Mapping[str, TacticRecord] = field(default_factory=dict)
    registry_version: str = "unversioned"

    def __post_init__(self) -> None:
        for key, record in self.records.items():
            if key != record.name:
                raise DataError(f"db key {key!r} differs from record name {record.name!r}")

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, name: str) -> bool:
        return name in self.records

    def get(self, name: str) -> Optional[TacticRecord]:
        return self.records.get(name)

    def __iter__(self) -> Iterator[TacticRecord]:
        return iter(self.records.values())

    def with_record(self, record: TacticRecord) -> "TacticDb":
        updated = dict(self.records)
        updated[record.name] = record
        return TacticDb(updated, self.registry_version)

    def variants_of(self, base: str) -> set[str]:
        """Names whose ``base_of_variant`` chain reaches ``base``."""
        reached: set[str] = set()
        for record in self:
            name, seen = record.name, set()
            cursor: Optional[TacticRecord] = record
            while cursor is not None and cursor.base_of_variant and cursor.name not in seen:
                seen.add(cursor.name)
                if cursor.base_of_variant == base:
                    reached.add(name)
                    break
                cursor = self.get(cursor.base_of_variant)
        return reached

    def to_json_text(self) -> str:
        payload = {
            "registry_version": self.registry_version,
            "records": [
                self.records[name].to_dict() for name in sorted(self.records)
            ],
        }
        return jsonio.dumps_canonical(payload)

    def save(self, path) -> None:
        jsonio.write_atomic(path, self.to_json_text())

    @classmethod
    def from_json_text(cls, text: str) -> "TacticDb":
        try:
            payload = json.loads(text)
            records = [TacticRecord.from_dict(item) for item in payload["records"]]
            version = payload["registry_version"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"malformed tactic db: {exc}") from exc
        mapping: dict[str, TacticRecord] = {}
        for record in records:
            if record.name in mapping:
                raise DataError(f"duplicate tactic name {record.name!r} in db")
            mapping[record.name] = record
        return cls(mapping, version)

    @classmethod
    def load(cls, path) -> "TacticDb":
        return cls.from_json_text(jsonio.read_text(path))


@dataclass(frozen=True)
class TierDistribution:
    strongly_fraction: float
    weakly_fraction: float
    classical_fraction: float

    def __post_init__(self) -> None:
        total = self.strongly_fraction + self.weakly_fraction + self.classical_fraction
        if abs(total - 1.0) > 1e-9:
            raise DataError(f"tier fractions sum to {total}, expected 1")


@dataclass(frozen=True)
class RegistryEntry:
    """Registry metadata exported for one tactic by an external script."""

    defining_module: str
    reference_heading: Optional[str] = None


@dataclass(frozen=True)
class _StaticEntry:
    level: int
    category: FunctionalCategory
    tier: AxiomTier
    defining_module: str = ""


@dataclass(frozen=True)
class _PrefixFamily:
    prefix: str
    level: int
    category: FunctionalCategory
    tier: AxiomTier


@dataclass(frozen=True)
class RuleSet:
    """Classification rules loaded from the bundled (or user) data files."""

    registry_version: str
    static: Mapping[str, _StaticEntry]
    suffixes: tuple[str, ...]
    families: tuple[_PrefixFamily, ...]
    mathlib_category_overrides: Mapping[str, str]
    default_level: Optional[int] = None
    default_tier: Optional[AxiomTier] = None


def _load_data_file(name: str) -> dict:
    text = resources.files("proofspace.data").joinpath(name).read_text("utf-8")
    return json.loads(text)


@functools.lru_cache(maxsize=1)
def load_default_rules() -> RuleSet:
    """Load the bundled static base, suffix alphabet, and prefix family table."""
    base = _load_data_file("static_base.json")
    suffixes = _load_data_file("suffix_alphabet.json")
    families = _load_data_file("prefix_families.json")

    static = {}
    for name, entry in base["entries"].items():
        static[name] = _StaticEntry(
            level=int(entry["level"]),
            category=FunctionalCategory(
                entry["category"],
                CategorySource(entry.get("category_source", "core-reference-heading")),
            ),
            tier=AxiomTier.from_label(entry["tier"]),
            defining_module=entry.get("defining_module", ""),
        )

    family_rules = tuple(
        _PrefixFamily(
            prefix=item["prefix"],
            level=int(item["level"]),
            category=FunctionalCategory(
                item["category"],
                CategorySource(item.get("category_source", "mathlib-module-path")),
            ),
            tier=AxiomTier.from_label(item["tier"]),
        )
        for item in families["families"]
    )

    defaults = families.get("defaults") or {}
    return RuleSet(
        registry_version=base["registry_version"],
        static=static,
        suffixes=tuple(suffixes["suffixes"]),
        families=family_rules,
        mathlib_category_overrides=families.get("mathlib_category_overrides", {}),
        default_level=defaults.get("level"),
        default_tier=(
            AxiomTier.from_label(defaults["tier"]) if "tier" in defaults else None
        ),
    )


def tier_of_axioms(axioms: Iterable[str]) -> AxiomTier:
    """Tier of a proof term's axiom footprint.

    Empty footprints are strongly constructive; footprints inside
    {propext, Quot.sound, funext} are weakly constructive; anything with
    ``Classical.choice`` (or an axiom this module does not know, which is
    escalated conservatively with a warning) is classical.
    """
    axiom_set = frozenset(axioms)
    if SORRY_AXIOM in axiom_set:
        raise SorryDetected("axiom set contains sorryAx: the proof is incomplete")
    unknown = axiom_set - KNOWN_AXIOMS
    if unknown:
        warnings.warn(
            f"unknown axioms {sorted(unknown)} escalated to the classical tier",
            UnknownAxiomWarning,
            stacklevel=2,
        )
        return AxiomTier.CLASSICAL
    if CHOICE_AXIOM in axiom_set:
        return AxiomTier.CLASSICAL
    if axiom_set:
        return AxiomTier.WEAKLY_CONSTRUCTIVE
    return AxiomTier.STRONGLY_CONSTRUCTIVE


def _variant_bases(name: str, suffixes: tuple[str, ...]) -> Iterator[str]:
    """Candidate base names, nearest (fewest suffixes peeled) first."""
    frontier = [name]
    seen = {name}
    while frontier:
        next_frontier: list[str] = []
        for current in frontier:
            for suffix in suffixes:
                if current.endswith(suffix) and len(current) > len(suffix):
                    base = current[: -len(suffix)]
                    if base not in seen:
                        seen.add(base)
                        next_frontier.append(base)
                        yield base
        frontier = next_frontier


def _decamel(word: str) -> str:
    pieces: list[str] = []
    for ch in word:
        if ch.isupper() and pieces and not pieces[-1].isupper():
            pieces.append(" ")
        pieces.append(ch)
    return "".join(pieces)


def _category_from_registry(
    entry: Optional[RegistryEntry], rules: RuleSet
) -> FunctionalCategory:
    if entry is None or not entry.defining_module:
        return FALLBACK_CATEGORY
    module = entry.defining_module
    if module.split(".", 1)[0] in ("Init", "Std", "Lean"):
        if entry.reference_heading:
            return FunctionalCategory(entry.reference_heading, CategorySource.CORE_REFERENCE)
        return FALLBACK_CATEGORY
    parts = module.split(".")
    if len(parts) >= 3 and parts[0] == "Mathlib" and parts[1] == "Tactic":
        raw = parts[2]
        name = rules.mathlib_category_overrides.get(raw, _decamel(raw))
        return FunctionalCategory(name, CategorySource.MATHLIB_PATH)
    return FALLBACK_CATEGORY


def classify_tactic(
    name: str,
    registry_entry: Optional[RegistryEntry],
    db: TacticDb,
    rules: Optional[RuleSet] = None,
) -> TacticRecord:
    """Assign a record to ``name`` by the first matching classification rule."""
    if not name:
        raise DataError("tactic name must be non-empty")
    if rules is None:
        rules = load_default_rules()
    module = registry_entry.defining_module if registry_entry else ""

    entry = rules.static.get(name)
    if entry is not None:
        return TacticRecord(
            name=name,
            defining_module=module or entry.defining_module,
            level=entry.level,
            category=entry.category,
            tier=entry.tier,
            provenance=Provenance.STATIC,
        )

    for base_name in _variant_bases(name, rules.suffixes):
        base = db.get(base_name)
        if base is None and base_name in rules.static:
            static_base = rules.static[base_name]
            base = TacticRecord(
                name=base_name,
                defining_module=static_base.defining_module,
                level=static_base.level,
                category=static_base.category,
                tier=static_base.tier,
                provenance=Provenance.STATIC,
            )
        if base is not None:
            return TacticRecord(
                name=name,
                defining_module=module or base.defining_module,
                level=base.level,
                category=base.category,
                tier=base.tier,
                provenance=Provenance.VARIANT_INHERITED,
                base_of_variant=base.name,
            )

    matches = [fam for fam in rules.families if name.startswith(fam.prefix)]
    if matches:
        family = max(matches, key=lambda fam: len(fam.prefix))
        return TacticRecord(
            name=name,
            defining_module=module,
            level=family.level,
            category=family.category,
            tier=family.tier,
            provenance=Provenance.PREFIX_RULE,
        )

    category = _category_from_registry(registry_entry, rules)
    if rules.default_level is not None and rules.default_tier is not None:
        return TacticRecord(
            name=name,
            defining_module=module,
            level=rules.default_level,
            category=category,
            tier=rules.default_tier,
            provenance=Provenance.STATIC,
        )
    raise NoRuleMatched(
        f"no rule classifies tactic {name!r}: probe it or add a static entry"
    )


def taxonomy_stats(db: TacticDb) -> TierDistribution:
    """Fraction of records in each tier."""
    if len(db) == 0:
        raise EmptyDb("cannot compute tier distribution of an empty db")
    counts = {tier: 0 for tier in AxiomTier}
    for record in db:
        counts[record.tier] += 1
    total = len(db)
    return TierDistribution(
        strongly_fraction=counts[AxiomTier.STRONGLY_CONSTRUCTIVE] / total,
        weakly_fraction=counts[AxiomTier.WEAKLY_CONSTRUCTIVE] / total,
        classical_fraction=counts[AxiomTier.CLASSICAL] / total,
    )


def upgraded(record: TacticRecord, tier: AxiomTier) -> TacticRecord:
    """Copy of ``record`` with a strictly stronger tier, provenance ``probed``."""
    return replace(record, tier=tier, provenance=Provenance.PROBED)
