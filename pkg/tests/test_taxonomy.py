import json

import pytest
from hypothesis import given, strategies as st

from proofspace.errors import DataError
from proofspace.taxonomy import (
    KNOWN_AXIOMS,
    AxiomTier,
    CategorySource,
    EmptyDb,
    FunctionalCategory,
    NoRuleMatched,
    Provenance,
    RegistryEntry,
    RuleSet,
    SorryDetected,
    TacticDb,
    TacticRecord,
    UnknownAxiomWarning,
    classify_tactic,
    load_default_rules,
    taxonomy_stats,
    tier_of_axioms,
)
from proofspace.taxonomy import _PrefixFamily

from conftest import FIXTURES


def make_record(name, tier=AxiomTier.STRONGLY_CONSTRUCTIVE, level=0, provenance=Provenance.STATIC,
                base=None, category="Assumptions"):
    return TacticRecord(
        name=name,
        defining_module="Init.Tactics",
        level=level,
        category=FunctionalCategory(category, CategorySource.CORE_REFERENCE),
        tier=tier,
        provenance=provenance,
        base_of_variant=base,
    )


class TestTierLattice:
    def test_total_order(self):
        assert (
            AxiomTier.STRONGLY_CONSTRUCTIVE
            < AxiomTier.WEAKLY_CONSTRUCTIVE
            < AxiomTier.CLASSICAL
        )

    def test_empty_set_is_strongly_constructive(self):
        assert tier_of_axioms(frozenset()) is AxiomTier.STRONGLY_CONSTRUCTIVE

    def test_weak_pair(self):
        assert (
            tier_of_axioms({"propext", "Quot.sound"}) is AxiomTier.WEAKLY_CONSTRUCTIVE
        )

    def test_funext_is_weak(self):
        assert tier_of_axioms({"funext"}) is AxiomTier.WEAKLY_CONSTRUCTIVE

    def test_choice_is_classical(self):
        assert tier_of_axioms({"propext", "Classical.choice"}) is AxiomTier.CLASSICAL

    def test_sorry_detected(self):
        with pytest.raises(SorryDetected):
            tier_of_axioms({"sorryAx"})

    def test_unknown_axiom_escalates_with_warning(self):
        with pytest.warns(UnknownAxiomWarning):
            assert tier_of_axioms({"myMysteryAxiom"}) is AxiomTier.CLASSICAL

    @given(
        base=st.frozensets(st.sampled_from(sorted(KNOWN_AXIOMS))),
        extra=st.frozensets(st.sampled_from(sorted(KNOWN_AXIOMS))),
    )
    def test_monotone_under_inclusion(self, base, extra):
        assert tier_of_axioms(base) <= tier_of_axioms(base | extra)


class TestClassify:
    def test_static_entry_verbatim(self):
        record = classify_tactic("exact", RegistryEntry("Init.Tactics"), TacticDb())
        assert record.level == 0
        assert record.tier is AxiomTier.STRONGLY_CONSTRUCTIVE
        assert record.category.name == "Assumptions"
        assert record.provenance is Provenance.STATIC

    def test_variant_inherits_from_db(self):
        db = TacticDb().with_record(
            make_record("simp", tier=AxiomTier.WEAKLY_CONSTRUCTIVE, level=2,
                        category="Simplification")
        )
        record = classify_tactic("simp!", RegistryEntry("Init.Tactics"), db)
        assert record.level == 2
        assert record.tier is AxiomTier.WEAKLY_CONSTRUCTIVE
        assert record.provenance is Provenance.VARIANT_INHERITED
        assert record.base_of_variant == "simp"

    def test_variant_falls_back_to_static_base(self):
        record = classify_tactic("simp?", None, TacticDb())
        assert record.base_of_variant == "simp"
        assert record.provenance is Provenance.VARIANT_INHERITED

    def test_variant_peels_repeated_suffixes(self):
        db = TacticDb().with_record(make_record("simp", level=2, category="Simplification"))
        record = classify_tactic("simp_arith!", None, db)
        assert record.base_of_variant == "simp"
        assert record.level == 2

    def test_variant_prefers_nearest_base(self):
        db = (
            TacticDb()
            .with_record(make_record("simp", level=2, category="Simplification"))
            .with_record(
                make_record(
                    "simp!",
                    level=2,
                    category="Simplification",
                    provenance=Provenance.VARIANT_INHERITED,
                    base="simp",
                )
            )
        )
        record = classify_tactic("simp!?", None, db)
        assert record.base_of_variant == "simp!"

    def test_prefix_family(self):
        record = classify_tactic("norm_fin", RegistryEntry("Mathlib.Tactic.NormFin"), TacticDb())
        assert record.provenance is Provenance.PREFIX_RULE
        assert record.level == 2
        assert record.category.name == "Normalization"

    def test_longest_prefix_wins(self):
        rules = RuleSet(
            registry_version="test",
            static={},
            suffixes=("!",),
            families=(
                _PrefixFamily("norm_", 2,
                              FunctionalCategory("Normalization", CategorySource.MATHLIB_PATH),
                              AxiomTier.WEAKLY_CONSTRUCTIVE),
                _PrefixFamily("norm_num_", 3,
                              FunctionalCategory("Numeric", CategorySource.MATHLIB_PATH),
                              AxiomTier.WEAKLY_CONSTRUCTIVE),
            ),
            mathlib_category_overrides={},
        )
        record = classify_tactic("norm_num_ext", None, TacticDb(), rules)
        assert record.category.name == "Numeric"
        assert record.level == 3

    def test_variant_beats_prefix(self):
        # norm_num! matches both the suffix rule (base norm_num) and the
        # norm_ prefix family; variant inheritance is the more specific rule.
        record = classify_tactic("norm_num!", None, TacticDb())
        assert record.provenance is Provenance.VARIANT_INHERITED
        assert record.base_of_variant == "norm_num"

    def test_registry_metadata_with_defaults(self):
        rules = RuleSet(
            registry_version="test",
            static={},
            suffixes=(),
            families=(),
            mathlib_category_overrides={"Ring": "Ring Normalization"},
            default_level=1,
            default_tier=AxiomTier.WEAKLY_CONSTRUCTIVE,
        )
        core = classify_tactic(
            "mystery", RegistryEntry("Lean.Elab.Tactic", "Control Flow"), TacticDb(), rules
        )
        assert core.category == FunctionalCategory("Control Flow", CategorySource.CORE_REFERENCE)
        assert core.level == 1

        mathlib = classify_tactic(
            "ring_like", RegistryEntry("Mathlib.Tactic.Ring.Basic"), TacticDb(), rules
        )
        assert mathlib.category.name == "Ring Normalization"
        assert mathlib.category.source is CategorySource.MATHLIB_PATH

        decamel = classify_tactic(
            "wobble", RegistryEntry("Mathlib.Tactic.FunProp.Core"), TacticDb(), rules
        )
        assert decamel.category.name == "Fun Prop"

        unknown = classify_tactic("opaque_thing", RegistryEntry("Weird.Module"), TacticDb(), rules)
        assert unknown.category.name == "Uncategorized"
        assert unknown.category.source is CategorySource.FALLBACK

    def test_no_rule_matched(self):
        with pytest.raises(NoRuleMatched):
            classify_tactic("totally_unknown_tactic", None, TacticDb())

    def test_empty_name_rejected(self):
        with pytest.raises(DataError):
            classify_tactic("", None, TacticDb())

    def test_deterministic(self):
        db = TacticDb().with_record(make_record("simp", level=2, category="Simplification"))
        first = classify_tactic("simp!", RegistryEntry("Init.Tactics"), db)
        second = classify_tactic("simp!", RegistryEntry("Init.Tactics"), db)
        assert first == second


class TestStats:
    def test_direct_counts(self):
        db = TacticDb()
        for i in range(4):
            db = db.with_record(make_record(f"s{i}"))
        for i in range(2):
            db = db.with_record(make_record(f"w{i}", tier=AxiomTier.WEAKLY_CONSTRUCTIVE))
        for i in range(2):
            db = db.with_record(make_record(f"c{i}", tier=AxiomTier.CLASSICAL))
        stats = taxonomy_stats(db)
        assert (stats.strongly_fraction, stats.weakly_fraction, stats.classical_fraction) == (
            0.5,
            0.25,
            0.25,
        )

    def test_single_classical(self):
        db = TacticDb().with_record(make_record("c", tier=AxiomTier.CLASSICAL))
        stats = taxonomy_stats(db)
        assert (stats.strongly_fraction, stats.weakly_fraction, stats.classical_fraction) == (
            0.0,
            0.0,
            1.0,
        )

    def test_empty_db(self):
        with pytest.raises(EmptyDb):
            taxonomy_stats(TacticDb())

    def test_fixture_db_matches_independent_count(self, fixture_db):
        # Oracle: scan the raw JSON file, independent of the TacticDb machinery.
        raw = json.loads((FIXTURES / "tactic_db_100.json").read_text("utf-8"))
        tallies = {"strongly_constructive": 0, "weakly_constructive": 0, "classical": 0}
        for item in raw["records"]:
            tallies[item["tier"]] += 1
        total = sum(tallies.values())
        assert total == 100
        stats = taxonomy_stats(fixture_db)
        assert stats.strongly_fraction == tallies["strongly_constructive"] / total
        assert stats.weakly_fraction == tallies["weakly_constructive"] / total
        assert stats.classical_fraction == tallies["classical"] / total

    def test_fractions_sum_to_one(self, fixture_db):
        stats = taxonomy_stats(fixture_db)
        total = stats.strongly_fraction + stats.weakly_fraction + stats.classical_fraction
        assert abs(total - 1.0) <= 1e-9


class TestDb:
    def test_roundtrip_is_byte_stable(self, fixture_db):
        text = (FIXTURES / "tactic_db_100.json").read_text("utf-8")
        assert fixture_db.to_json_text() == text
        assert TacticDb.from_json_text(text).to_json_text() == text

    def test_key_must_match_name(self):
        with pytest.raises(DataError):
            TacticDb({"other": make_record("exact")})

    def test_variant_chains_terminate(self, fixture_db):
        for record in fixture_db:
            hops = 0
            cursor = record
            while cursor.base_of_variant is not None:
                cursor = fixture_db.get(cursor.base_of_variant)
                assert cursor is not None
                hops += 1
                assert hops <= 4
            assert cursor.provenance in (
                Provenance.STATIC,
                Provenance.PREFIX_RULE,
                Provenance.PROBED,
            )

    def test_variant_record_requires_base(self):
        with pytest.raises(DataError):
            make_record("simp!", provenance=Provenance.VARIANT_INHERITED, base=None)

    def test_level_bounds(self):
        with pytest.raises(DataError):
            make_record("bad", level=5)

    def test_fallback_category_name_enforced(self):
        with pytest.raises(DataError):
            FunctionalCategory("Assumptions", CategorySource.FALLBACK)

    def test_default_rules_load(self):
        rules = load_default_rules()
        assert set(rules.suffixes) == {"!", "?", "_arith", "'"}
        assert "exact" in rules.static
        assert any(f.prefix == "norm_" for f in rules.families)
