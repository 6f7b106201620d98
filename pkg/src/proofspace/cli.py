"""proofspace command-line interface.

Subcommands wrap the library pipeline end to end:

* ``analyze``      corpus -> distances -> MDS (k=1,2,3) -> GMM -> report
* ``plot``         MDS solution (+ optional GMM / corpus) -> SVG scatter
* ``audit``        tactic db + probe bundle -> reconciled tactic db
* ``ablate``       tactic db + slice flags -> <label>.ablation.json
* ``whitelist``    project corpus + position -> lemma whitelist file
* ``orchestrate``  goal + mock script -> outcome + JSONL trace

Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, jsonio
from .errors import DataError, NumericError, ProofspaceError
from . import ablation as ablation_mod
from .ablation import AblationConfig, ProjectCorpus, SliceSelector, build_ablation_set, emit_config
from .axiom_audit import audit_db, load_probe_bundle
from .clustering import GmmModel, select_gmm
from .corpus import Condition, ProofRecord, cosine_distance_matrix, load_corpus
from .geometry import MdsSolution, classical_mds, smacof_refine
from .orchestrator import Budget, Goal, Phase, mock_providers, run
from .plotting import DimensionNotTwo, PlotSpec, render_svg
from .taxonomy import AxiomTier, TacticDb

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

REPORT_COLUMNS = ("Theorem", "Plain (n)", "Ablated (n)", "1d MDS r", "2d MDS r", "3d MDS r")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        raise _UsageError(message)


def _default_seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("PROOFSPACE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise _UsageError(f"PROOFSPACE_SEED must be an integer, got {env!r}") from None
    return 0


def _mds_for_dims(records: Sequence[ProofRecord], use_smacof: bool) -> dict[int, MdsSolution]:
    matrix = cosine_distance_matrix(
        [record.embedding for record in records],
        ids=[record.proof_id for record in records],
    )
    solutions: dict[int, MdsSolution] = {}
    for k in (1, 2, 3):
        effective = min(k, matrix.n - 1)
        if effective < 1:
            raise NumericError("need at least 2 proofs per analysis group")
        if effective in solutions and solutions[effective].k == effective:
            solutions[k] = solutions[effective]
            continue
        solution = classical_mds(matrix, effective)
        if use_smacof:
            solution = smacof_refine(matrix, solution)
        solutions[k] = solution
    return solutions


def _report_rows(
    records: Sequence[ProofRecord], use_smacof: bool
) -> list[dict]:
    theorem_order: list[str] = []
    groups: dict[str, list[ProofRecord]] = {}
    for record in records:
        if record.theorem_id not in groups:
            theorem_order.append(record.theorem_id)
            groups[record.theorem_id] = []
        groups[record.theorem_id].append(record)

    rows = []
    for theorem_id in theorem_order:
        group = groups[theorem_id]
        plain = sum(1 for r in group if r.condition is Condition.PLAIN)
        ablated = sum(1 for r in group if r.condition is Condition.ABLATED)
        if len(group) >= 2:
            solutions = _mds_for_dims(group, use_smacof)
            r_values = {k: solutions[k].r for k in (1, 2, 3)}
        else:
            r_values = {1: float("nan"), 2: float("nan"), 3: float("nan")}
        rows.append(
            {
                "theorem_id": theorem_id,
                "plain_count": plain,
                "ablated_count": ablated,
                "r_1d": r_values[1],
                "r_2d": r_values[2],
                "r_3d": r_values[3],
            }
        )
    return rows


def _format_r(value: float) -> str:
    return "nan" if value != value else f"{value:.6f}"


def _report_tsv(rows: Sequence[dict]) -> str:
    lines = ["\t".join(REPORT_COLUMNS)]
    for row in rows:
        lines.append(
            "\t".join(
                (
                    row["theorem_id"],
                    str(row["plain_count"]),
                    str(row["ablated_count"]),
                    _format_r(row["r_1d"]),
                    _format_r(row["r_2d"]),
                    _format_r(row["r_3d"]),
                )
            )
        )
    return "\n".join(lines) + "\n"


def cmd_analyze(args) -> int:
    records, _ = load_corpus(args.corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = _default_seed(args.seed)

    solutions = _mds_for_dims(records, args.smacof)
    for k in (1, 2, 3):
        solutions[k].save(out / f"mds_k{k}.json")
    gmm = select_gmm(solutions[2].coordinates, args.kmax, seed)
    gmm.save(out / "gmm.json")

    rows = _report_rows(records, args.smacof)
    jsonio.write_atomic(out / "report.tsv", _report_tsv(rows))
    jsonio.write_atomic(out / "report.json", jsonio.dumps_canonical({"rows": rows}))

    theorem_ids = {record.theorem_id for record in records}
    if len(theorem_ids) > 1:
        for theorem_id in sorted(theorem_ids):
            group = [r for r in records if r.theorem_id == theorem_id]
            if len(group) < 2:
                continue
            sub = out / "by_theorem" / theorem_id
            sub.mkdir(parents=True, exist_ok=True)
            group_solutions = _mds_for_dims(group, args.smacof)
            for k in (1, 2, 3):
                group_solutions[k].save(sub / f"mds_k{k}.json")
            select_gmm(group_solutions[2].coordinates, args.kmax, seed).save(sub / "gmm.json")

    sys.stdout.write(_report_tsv(rows))
    return EXIT_OK


def cmd_plot(args) -> int:
    solution = MdsSolution.load(args.solution)
    if solution.coordinates.ndim != 2 or solution.coordinates.shape[1] != 2:
        raise DimensionNotTwo(
            f"plot requires a 2-d solution, got k={solution.coordinates.shape[1]}"
        )
    n = solution.coordinates.shape[0]
    if args.corpus:
        records, _ = load_corpus(args.corpus)
        if len(records) != n:
            raise DataError(
                f"corpus has {len(records)} proofs but the solution has {n} rows"
            )
        conditions = [record.condition for record in records]
        proof_ids = [record.proof_id for record in records]
    else:
        conditions = [Condition.PLAIN] * n
        proof_ids = [f"p{i}" for i in range(n)]
    gmm = GmmModel.load(args.gmm) if args.gmm else None
    spec = PlotSpec.build(solution.coordinates, conditions, proof_ids, gmm)
    jsonio.write_atomic(args.out, render_svg(spec))
    return EXIT_OK


def cmd_audit(args) -> int:
    db = TacticDb.load(args.db)
    entries = load_probe_bundle(args.probes)
    updated = audit_db(db, entries)
    updated.save(args.out)
    changed = sum(
        1
        for record in updated
        if db.get(record.name) is not None and db.get(record.name).tier != record.tier
    )
    sys.stdout.write(f"audited {len(entries)} probes; upgraded {changed} tactics\n")
    return EXIT_OK


def _parse_tier(label: str) -> AxiomTier:
    try:
        return AxiomTier.from_label(label.strip())
    except DataError:
        raise _UsageError(
            f"unknown tier {label!r}; expected strongly_constructive, "
            "weakly_constructive, or classical"
        ) from None


def cmd_ablate(args) -> int:
    db = TacticDb.load(args.db)
    axes: dict = {}
    if args.tier:
        axes["tiers"] = frozenset(_parse_tier(label) for label in args.tier.split(","))
    if args.levels:
        try:
            axes["levels"] = frozenset(int(piece) for piece in args.levels.split(","))
        except ValueError:
            raise _UsageError(f"bad --levels value {args.levels!r}") from None
    if args.categories:
        axes["categories"] = frozenset(
            piece.strip() for piece in args.categories.split(",") if piece.strip()
        )
    if args.tactics:
        axes["named_tactics"] = frozenset(
            piece.strip() for piece in args.tactics.split(",") if piece.strip()
        )
    if not axes:
        raise _UsageError("ablate needs at least one of --tier/--levels/--categories/--tactics")
    selected = build_ablation_set(db, SliceSelector(**axes))
    whitelist = None
    if args.whitelist_known:
        whitelist = sorted(ablation_mod.load_known_lemmas(args.whitelist_known))
    _, text = emit_config(selected, whitelist, args.label, db)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{args.label}.ablation.json"
    jsonio.write_atomic(path, text)
    sys.stdout.write(f"wrote {path} ({len(selected)} forbidden tactics)\n")
    return EXIT_OK


def cmd_whitelist(args) -> int:
    try:
        raw = json.loads(Path(args.project).read_text("utf-8"))
        corpus = ProjectCorpus(tuple((item["theorem_id"], item["lean_text"]) for item in raw))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"malformed project corpus: {exc}") from exc
    known = (
        ablation_mod.load_known_lemmas(args.known) if args.known else set()
    )
    lemmas = ablation_mod.build_whitelist(
        corpus,
        args.position,
        known,
        restrict_to_known=args.known is not None and not args.no_intersect,
    )
    text = "".join(name + "\n" for name in lemmas)
    if args.out:
        jsonio.write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _load_goal(args) -> Goal:
    if args.goal:
        try:
            raw = json.loads(Path(args.goal).read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed goal file: {exc}") from exc
        config = None
        if raw.get("ablation") is not None:
            config = AblationConfig.from_json_text(json.dumps(raw["ablation"]))
        return Goal(
            theorem_statement=raw.get("theorem_statement", ""),
            informal_proof=raw.get("informal_proof"),
            ablation=config,
        )
    if args.statement:
        return Goal(theorem_statement=args.statement)
    raise _UsageError("orchestrate needs --goal FILE or --statement TEXT")


def cmd_orchestrate(args) -> int:
    providers = mock_providers(Path(args.script).read_text("utf-8"))
    goal = _load_goal(args)
    budget = Budget(
        max_agent_calls=args.max_agent_calls,
        max_checker_calls=args.max_checker_calls,
        max_iterations=args.max_iterations,
    )
    outcome, trace = run(goal, providers[0], providers[1], budget)
    if args.trace:
        jsonio.write_atomic(args.trace, trace.to_jsonl())
    phases = " -> ".join(phase.value for phase in trace.phases())
    sys.stdout.write(f"outcome: {outcome.phase.value}\nphases: {phases}\n")
    if outcome.phase is Phase.SOLVED and args.proof_out:
        jsonio.write_atomic(args.proof_out, outcome.lean_text or "")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="proofspace", description=__doc__)
    parser.add_argument("--version", action="version", version=f"proofspace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="run corpus -> MDS -> GMM -> report pipeline")
    analyze.add_argument("--corpus", required=True, help="JSONL proof corpus")
    analyze.add_argument("--out", required=True, help="output directory")
    analyze.add_argument("--smacof", action="store_true", help="refine MDS with SMACOF")
    analyze.add_argument("--kmax", type=int, default=8, help="max GMM components (default 8)")
    analyze.add_argument("--seed", type=int, default=None,
                         help="RNG seed (default: $PROOFSPACE_SEED or 0)")
    analyze.set_defaults(fn=cmd_analyze)

    plot = sub.add_parser("plot", help="render a 2-d solution as an SVG scatter")
    plot.add_argument("--solution", required=True, help="mds_k2.json produced by analyze")
    plot.add_argument("--gmm", default=None, help="gmm.json for 2-sigma ellipses")
    plot.add_argument("--corpus", default=None,
                      help="corpus JSONL supplying condition markers (row order)")
    plot.add_argument("--out", required=True, help="output SVG path")
    plot.set_defaults(fn=cmd_plot)

    audit = sub.add_parser("audit", help="reconcile a tactic db against probe outputs")
    audit.add_argument("--db", required=True, help="tactic db JSON")
    audit.add_argument("--probes", required=True, help="probe bundle directory")
    audit.add_argument("--out", required=True, help="updated tactic db path")
    audit.set_defaults(fn=cmd_audit)

    ablate = sub.add_parser("ablate", help="emit an ablation config for a taxonomy slice")
    ablate.add_argument("--db", required=True, help="tactic db JSON")
    ablate.add_argument("--tier", default=None, help="comma-separated tier labels")
    ablate.add_argument("--levels", default=None, help="comma-separated abstraction levels")
    ablate.add_argument("--categories", default=None, help="comma-separated category names")
    ablate.add_argument("--tactics", default=None, help="comma-separated tactic names")
    ablate.add_argument("--whitelist-known", default=None,
                        help="newline-delimited lemma file to embed as the whitelist")
    ablate.add_argument("--label", required=True, help="config label, e.g. ablated")
    ablate.add_argument("--out", required=True, help="output directory")
    ablate.set_defaults(fn=cmd_ablate)

    whitelist = sub.add_parser("whitelist", help="build a lemma whitelist from earlier proofs")
    whitelist.add_argument("--project", required=True,
                           help="JSON list of {theorem_id, lean_text} in source order")
    whitelist.add_argument("--position", type=int, required=True,
                           help="whitelist covers proofs strictly before this index")
    whitelist.add_argument("--known", default=None, help="newline-delimited known-lemma file")
    whitelist.add_argument("--no-intersect", action="store_true",
                           help="keep all extracted identifiers")
    whitelist.add_argument("--out", default=None, help="output file (default: stdout)")
    whitelist.set_defaults(fn=cmd_whitelist)

    orchestrate = sub.add_parser("orchestrate", help="drive the phase machine on a goal")
    orchestrate.add_argument("--script", required=True, help="mock provider script JSON")
    orchestrate.add_argument("--goal", default=None, help="goal JSON file")
    orchestrate.add_argument("--statement", default=None, help="inline theorem statement")
    orchestrate.add_argument("--trace", default=None, help="write the JSONL trace here")
    orchestrate.add_argument("--proof-out", default=None, help="write solved Lean text here")
    orchestrate.add_argument("--max-agent-calls", type=int, default=20)
    orchestrate.add_argument("--max-checker-calls", type=int, default=20)
    orchestrate.add_argument("--max-iterations", type=int, default=10)
    orchestrate.set_defaults(fn=cmd_orchestrate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except _UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except NumericError as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except DataError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA
    except ProofspaceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DATA
    except FileNotFoundError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
