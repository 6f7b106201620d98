"""Empirical axiom audit: probe generation, output parsing, tier reconciliation.

A tactic is exercised on six fixed probe theorems; each probe source is a
self-contained file whose proof body is the single tactic under test with a
``#print axioms`` directive appended.  Running the probes is an external
concern: this module only generates sources, parses captured tool output,
and upgrades a tactic's tier when the union of probed axiom sets lands in
a strictly stronger tier than the static assignment.
"""

from __future__ import annotations

import enum
import functools
import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import DataError
from .taxonomy import AxiomTier, TacticDb, TacticRecord, tier_of_axioms, upgraded

__all__ = [
    "ProbeKind",
    "ProbeSource",
    "ProbeResult",
    "ParseError",
    "MismatchedTactic",
    "generate_probe_suite",
    "parse_print_axioms",
    "render_print_axioms",
    "reconcile_tier",
    "load_probe_bundle",
    "audit_db",
]


class ParseError(DataError):
    """Tool output did not match either ``#print axioms`` grammar."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class MismatchedTactic(DataError):
    """A probe result names a different tactic than the record under audit."""


class ProbeKind(enum.Enum):
    """The six probe domains, in canonical order."""

    NAT_ARITHMETIC = "NatArithmetic"
    INT_INEQUALITY = "IntInequality"
    PROPOSITIONAL_LOGIC = "PropositionalLogic"
    SIMPLE_REWRITE = "SimpleRewrite"
    REAL_POSITIVITY = "RealPositivity"
    EXISTENTIAL_WITNESS = "ExistentialWitness"


@dataclass(frozen=True)
class ProbeSource:
    kind: ProbeKind
    tactic_name: str
    lean_text: str


@dataclass(frozen=True)
class ProbeResult:
    kind: ProbeKind
    tactic_name: str
    succeeded: bool
    axioms: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.succeeded and self.axioms:
            raise DataError("an unsuccessful probe cannot carry an axiom set")


@functools.lru_cache(maxsize=1)
def _templates() -> dict[ProbeKind, dict]:
    text = resources.files("proofspace.data").joinpath("probe_templates.json").read_text("utf-8")
    raw = json.loads(text)["templates"]
    table = {ProbeKind(item["kind"]): item for item in raw}
    if set(table) != set(ProbeKind):
        raise DataError("probe template table must cover exactly the six probe kinds")
    return table


def generate_probe_suite(tactic_name: str) -> list[ProbeSource]:
    """One probe source per kind, in canonical order, proof body = the tactic."""
    if not tactic_name:
        raise DataError("tactic name must be non-empty")
    table = _templates()
    return [
        ProbeSource(
            kind=kind,
            tactic_name=tactic_name,
            lean_text=table[kind]["lean_text"].replace("{tactic}", tactic_name),
        )
        for kind in ProbeKind
    ]


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> ParseError:
        return ParseError(message, _byte_offset(self.text, self.pos))

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, literal: str) -> None:
        if not self.text.startswith(literal, self.pos):
            raise self.error(f"expected {literal!r}")
        self.pos += len(literal)

    def expect_word(self, word: str) -> None:
        self.skip_ws()
        self.expect(word)

    def take_until(self, stop: str, what: str) -> str:
        end = self.text.find(stop, self.pos)
        if end < 0:
            raise self.error(f"unterminated {what}")
        piece = self.text[self.pos:end]
        self.pos = end
        return piece

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)


def parse_print_axioms(tool_output: str) -> tuple[str, frozenset[str]]:
    """Parse ``#print axioms`` output into (theorem name, axiom set).

    Accepts, with flexible interior whitespace::

        '<name>' depends on axioms: [<a1>, <a2>, ...]
        '<name>' does not depend on any axioms
    """
    scanner = _Scanner(tool_output)
    scanner.skip_ws()
    scanner.expect("'")
    name = scanner.take_until("'", "quoted theorem name")
    if not name:
        raise scanner.error("empty theorem name")
    scanner.expect("'")

    scanner.skip_ws()
    if scanner.text.startswith("depends", scanner.pos):
        scanner.expect("depends")
        scanner.expect_word("on")
        scanner.expect_word("axioms:")
        scanner.expect_word("[")
        axioms: list[str] = []
        while True:
            scanner.skip_ws()
            if scanner.text.startswith("]", scanner.pos):
                if axioms:
                    raise scanner.error("trailing comma in axiom list")
                scanner.pos += 1
                break
            start = scanner.pos
            while scanner.pos < len(scanner.text) and (
                scanner.text[scanner.pos] not in ",]" and not scanner.text[scanner.pos].isspace()
            ):
                scanner.pos += 1
            axiom = scanner.text[start:scanner.pos]
            if not axiom:
                raise scanner.error("expected an axiom name")
            axioms.append(axiom)
            scanner.skip_ws()
            if scanner.text.startswith(",", scanner.pos):
                scanner.pos += 1
                continue
            scanner.expect("]")
            break
        if not scanner.at_end():
            raise scanner.error("unexpected trailing text")
        return name, frozenset(axioms)

    if scanner.text.startswith("does", scanner.pos):
        for word in ("does", "not", "depend", "on", "any", "axioms"):
            scanner.expect_word(word)
        if not scanner.at_end():
            raise scanner.error("unexpected trailing text")
        return name, frozenset()

    raise scanner.error("expected 'depends on axioms:' or 'does not depend on any axioms'")


def render_print_axioms(theorem_name: str, axioms: Iterable[str]) -> str:
    """Canonical well-formed ``#print axioms`` output (inverse of the parser)."""
    axiom_list = sorted(set(axioms))
    if axiom_list:
        return f"'{theorem_name}' depends on axioms: [{', '.join(axiom_list)}]"
    return f"'{theorem_name}' does not depend on any axioms"


def reconcile_tier(static_record: TacticRecord, probes: Sequence[ProbeResult]) -> TacticRecord:
    """Upgrade the record's tier when the probed axiom union is strictly stronger.

    Never downgrades; never touches level or category.  With no successful
    probe the static record is returned unchanged.
    """
    for probe in probes:
        if probe.tactic_name != static_record.name:
            raise MismatchedTactic(
                f"probe for {probe.tactic_name!r} cannot reconcile record "
                f"{static_record.name!r}"
            )
    union: frozenset[str] = frozenset()
    succeeded = False
    for probe in probes:
        if probe.succeeded:
            succeeded = True
            union |= probe.axioms
    if not succeeded:
        return static_record
    probed_tier = tier_of_axioms(union)
    if probed_tier > static_record.tier:
        return upgraded(static_record, probed_tier)
    return static_record


# -- Probe bundles: directories of .lean sources, captured outputs, and a manifest --

_ERROR_MARKER = "error:"


@dataclass(frozen=True)
class ProbeBundleEntry:
    file: str
    tactic_name: str
    kind: ProbeKind
    result: ProbeResult


def _result_from_output(tactic: str, kind: ProbeKind, output: Optional[str]) -> ProbeResult:
    if output is None or not output.strip():
        return ProbeResult(kind=kind, tactic_name=tactic, succeeded=False)
    try:
        _, axioms = parse_print_axioms(output)
    except ParseError:
        if _ERROR_MARKER in output:
            # The probe failed to compile; a failed attempt is not recorded.
            return ProbeResult(kind=kind, tactic_name=tactic, succeeded=False)
        raise
    return ProbeResult(kind=kind, tactic_name=tactic, succeeded=True, axioms=axioms)


def load_probe_bundle(directory: str | os.PathLike) -> list[ProbeBundleEntry]:
    """Load a probe bundle directory.

    The manifest (``manifest.json``) maps each ``.lean`` file to its tactic
    and probe kind; a captured output lives side-by-side with the same stem
    and a ``.txt`` extension.  Missing or error-bearing outputs count as
    unsuccessful probes.
    """
    root = Path(directory)
    manifest_path = root / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
        probes = manifest["probes"]
    except FileNotFoundError as exc:
        raise DataError(f"probe bundle manifest not found: {manifest_path}") from exc
    except (json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"malformed probe bundle manifest: {exc}") from exc

    entries: list[ProbeBundleEntry] = []
    for file_name in sorted(probes):
        meta = probes[file_name]
        try:
            tactic = meta["tactic"]
            kind = ProbeKind(meta["kind"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed manifest entry for {file_name!r}: {exc}") from exc
        output_path = root / (Path(file_name).stem + ".txt")
        output = output_path.read_text("utf-8") if output_path.exists() else None
        entries.append(
            ProbeBundleEntry(
                file=file_name,
                tactic_name=tactic,
                kind=kind,
                result=_result_from_output(tactic, kind, output),
            )
        )
    return entries


def audit_db(db: TacticDb, entries: Iterable[ProbeBundleEntry]) -> TacticDb:
    """Reconcile every probed tactic in ``db`` against its bundle results."""
    by_tactic: dict[str, list[ProbeResult]] = {}
    for entry in entries:
        by_tactic.setdefault(entry.tactic_name, []).append(entry.result)
    updated = db
    for tactic_name in sorted(by_tactic):
        record = db.get(tactic_name)
        if record is None:
            raise DataError(f"probe bundle references unknown tactic {tactic_name!r}")
        updated = updated.with_record(reconcile_tier(record, by_tactic[tactic_name]))
    return updated
