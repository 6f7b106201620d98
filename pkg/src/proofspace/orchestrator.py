"""Phase state machine driving formalization attempts over abstract providers.

The machine walks SetUp -> Evaluate -> (Strategize) -> Decompose ->
Scaffold -> Implement, looping through Iterate on failures, and terminates
in Solved or Blocked.  Agents draft informal proofs, decompose them,
scaffold placeholder-bearing Lean text, and fill placeholders; a checker
judges candidate text, reporting placeholder counts and any uses of
tactics forbidden by an ablation config.  The orchestrator itself never
inspects the config: constraint knowledge reaches it only through checker
diagnostics.

Every provider call appends one trace event and consumes budget, so runs
are fully auditable and always terminate.  Scripted mock providers replay
canned responses for hermetic tests; live providers implement the same
interfaces out-of-process (see the adapter contract in the README).
"""

from __future__ import annotations

import enum
import hashlib
import json
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional, Sequence

from .errors import DataError, ProofspaceError
from .ablation import AblationConfig, iter_identifier_tokens

__all__ = [
    "Phase",
    "Goal",
    "Budget",
    "TraceEvent",
    "Trace",
    "CheckResult",
    "AgentProvider",
    "CheckerProvider",
    "RunOutcome",
    "State",
    "ProviderFailure",
    "SchemaError",
    "TerminalStateStep",
    "BudgetUnderflow",
    "StepEvent",
    "step",
    "run",
    "mock_providers",
    "PLACEHOLDER_TOKEN",
    "MAX_SAME_PHASE_RETRIES",
]

PLACEHOLDER_TOKEN = "sorry"
MAX_SAME_PHASE_RETRIES = 2


class ProviderFailure(ProofspaceError):
    """A provider raised, timed out, or ran out of scripted responses."""


class SchemaError(DataError):
    """A mock script does not conform to the published schema."""


class TerminalStateStep(ProofspaceError):
    """step() was invoked on a terminal state."""


class BudgetUnderflow(ProofspaceError):
    """Internal invariant breach: consumption exceeded a budget maximum."""


class Phase(enum.Enum):
    SET_UP = "set_up"
    EVALUATE = "evaluate"
    STRATEGIZE = "strategize"
    DECOMPOSE = "decompose"
    SCAFFOLD = "scaffold"
    IMPLEMENT = "implement"
    ITERATE = "iterate"
    SOLVED = "solved"
    BLOCKED = "blocked"

    @property
    def terminal(self) -> bool:
        return self in (Phase.SOLVED, Phase.BLOCKED)


#: Where Iterate sends a phase after its same-phase retries are spent.
_FALLBACK = {
    Phase.IMPLEMENT: Phase.SCAFFOLD,
    Phase.SCAFFOLD: Phase.DECOMPOSE,
    Phase.DECOMPOSE: Phase.STRATEGIZE,
    Phase.STRATEGIZE: Phase.STRATEGIZE,
    Phase.EVALUATE: Phase.EVALUATE,
}


@dataclass(frozen=True)
class Goal:
    theorem_statement: str
    informal_proof: Optional[str] = None
    ablation: Optional[AblationConfig] = None

    def __post_init__(self) -> None:
        if not self.theorem_statement:
            raise DataError("goal theorem statement must be non-empty")


@dataclass(frozen=True)
class Budget:
    max_agent_calls: int
    max_checker_calls: int
    max_iterations: int
    consumed_agent_calls: int = 0
    consumed_checker_calls: int = 0
    consumed_iterations: int = 0

    def __post_init__(self) -> None:
        for kind in ("agent_calls", "checker_calls", "iterations"):
            if getattr(self, f"consumed_{kind}") > getattr(self, f"max_{kind}"):
                raise BudgetUnderflow(f"consumed {kind} exceed the maximum")

    def can_afford(self, kind: str) -> bool:
        return getattr(self, f"consumed_{kind}") < getattr(self, f"max_{kind}")

    def consume(self, kind: str) -> "Budget":
        if not self.can_afford(kind):
            raise BudgetUnderflow(f"{kind} budget exhausted")
        return replace(self, **{f"consumed_{kind}": getattr(self, f"consumed_{kind}") + 1})

    @property
    def exhausted_dimensions(self) -> list[str]:
        return [
            kind
            for kind in ("agent_calls", "checker_calls", "iterations")
            if not self.can_afford(kind)
        ]


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    phase: Phase
    action: str
    digest: str
    outcome: str

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "phase": self.phase.value,
            "action": self.action,
            "digest": self.digest,
            "outcome": self.outcome,
        }


class Trace:
    """Append-only audit log; serializes to JSON Lines."""

    def __init__(self) -> None:
        self.events: list[TraceEvent] = []

    def append(self, phase: Phase, action: str, payload: Any, outcome: str) -> TraceEvent:
        event = TraceEvent(
            seq=len(self.events),
            phase=phase,
            action=action,
            digest=_digest(payload),
            outcome=outcome,
        )
        self.events.append(event)
        return event

    def phases(self) -> list[Phase]:
        """Phase sequence with consecutive duplicates collapsed."""
        sequence: list[Phase] = []
        for event in self.events:
            if not sequence or sequence[-1] != event.phase:
                sequence.append(event.phase)
        return sequence

    def count_actions(self, prefix: str) -> int:
        return sum(1 for event in self.events if event.action.startswith(prefix))

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(event.to_dict(), ensure_ascii=False) + "\n" for event in self.events
        )

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        trace = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            raw = json.loads(line)
            trace.events.append(
                TraceEvent(
                    seq=raw["seq"],
                    phase=Phase(raw["phase"]),
                    action=raw["action"],
                    digest=raw["digest"],
                    outcome=raw["outcome"],
                )
            )
        return trace


def _digest(payload: Any) -> str:
    if payload is None:
        return ""
    text = payload if isinstance(payload, str) else json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class CheckResult:
    success: bool
    messages: tuple[str, ...] = ()
    forbidden_uses: tuple[str, ...] = ()
    unresolved_placeholders: int = 0


class AgentProvider(ABC):
    """Drafting side of the loop; implementations must return or raise."""

    @abstractmethod
    def evaluate_difficulty(self, goal: Goal, context: Optional[str]) -> str: ...

    @abstractmethod
    def draft_informal(self, goal: Goal) -> str: ...

    @abstractmethod
    def decompose(self, informal: str) -> Sequence[str]: ...

    @abstractmethod
    def scaffold(self, substeps: Sequence[str]) -> str: ...

    @abstractmethod
    def fill_placeholder(
        self, scaffold: str, index: int, diagnostics: Sequence[str]
    ) -> str: ...


class CheckerProvider(ABC):
    """Judging side of the loop; must report every forbidden-tactic use."""

    @abstractmethod
    def check(self, lean_text: str, ablation: Optional[AblationConfig]) -> CheckResult: ...


@dataclass(frozen=True)
class Workspace:
    difficulty: Optional[str] = None
    informal: Optional[str] = None
    substeps: tuple[str, ...] = ()
    scaffold_text: Optional[str] = None
    candidate_text: Optional[str] = None
    diagnostics: tuple[str, ...] = ()
    failed_phase: Optional[Phase] = None
    retries: tuple[tuple[str, int], ...] = ()

    def retry_count(self, phase: Phase) -> int:
        return dict(self.retries).get(phase.value, 0)

    def with_retry(self, phase: Phase, count: int) -> "Workspace":
        table = dict(self.retries)
        table[phase.value] = count
        return replace(self, retries=tuple(sorted(table.items())))


@dataclass(frozen=True)
class State:
    phase: Phase
    goal: Goal
    budget: Budget
    workspace: Workspace = field(default_factory=Workspace)


@dataclass(frozen=True)
class StepEvent:
    """Provider result (or failure) feeding one transition."""

    action: str = ""
    text: Optional[str] = None
    substeps: tuple[str, ...] = ()
    check: Optional[CheckResult] = None
    failure: Optional[str] = None


@dataclass(frozen=True)
class RunOutcome:
    phase: Phase
    lean_text: Optional[str] = None
    reason: Optional[str] = None

    @property
    def solved(self) -> bool:
        return self.phase is Phase.SOLVED


def _into_iterate(state: State, failed: Phase, diagnostics: tuple[str, ...]) -> State:
    return replace(
        state,
        phase=Phase.ITERATE,
        workspace=replace(state.workspace, failed_phase=failed, diagnostics=diagnostics),
    )


def _scaffold_accepted(result: CheckResult) -> bool:
    # Placeholders are expected at scaffold time; forbidden uses are not.
    return result.success and not result.forbidden_uses


def _implement_solved(result: CheckResult) -> bool:
    return result.success and result.unresolved_placeholders == 0 and not result.forbidden_uses


def step(state: State, event: Optional[StepEvent] = None) -> State:
    """Pure policy transition; providers have already been consulted.

    Failure events route into Iterate; Iterate retries the failed phase up
    to MAX_SAME_PHASE_RETRIES times, then falls back one phase, and yields
    Blocked whenever any budget dimension is exhausted.
    """
    if state.phase.terminal:
        raise TerminalStateStep(f"no transition out of {state.phase.value}")
    event = event or StepEvent()
    ws = state.workspace

    if event.failure is not None and state.phase is not Phase.ITERATE:
        return _into_iterate(state, state.phase, (event.failure,))

    if state.phase is Phase.SET_UP:
        return replace(state, phase=Phase.EVALUATE)

    if state.phase is Phase.EVALUATE:
        ws = replace(ws, difficulty=event.text)
        target = Phase.STRATEGIZE if state.goal.informal_proof is None else Phase.DECOMPOSE
        informal = state.goal.informal_proof
        if informal is not None:
            ws = replace(ws, informal=informal)
        return replace(state, phase=target, workspace=ws)

    if state.phase is Phase.STRATEGIZE:
        return replace(
            state, phase=Phase.DECOMPOSE, workspace=replace(ws, informal=event.text)
        )

    if state.phase is Phase.DECOMPOSE:
        return replace(
            state, phase=Phase.SCAFFOLD, workspace=replace(ws, substeps=event.substeps)
        )

    if state.phase is Phase.SCAFFOLD:
        if event.check is None:
            raise DataError("scaffold transition requires a checker result")
        ws = replace(ws, scaffold_text=event.text, diagnostics=event.check.messages)
        if _scaffold_accepted(event.check):
            return replace(state, phase=Phase.IMPLEMENT, workspace=ws)
        return _into_iterate(replace(state, workspace=ws), Phase.SCAFFOLD, event.check.messages)

    if state.phase is Phase.IMPLEMENT:
        if event.check is None:
            raise DataError("implement transition requires a checker result")
        ws = replace(ws, candidate_text=event.text, diagnostics=event.check.messages)
        if _implement_solved(event.check):
            return replace(state, phase=Phase.SOLVED, workspace=ws)
        messages = event.check.messages + tuple(
            f"forbidden tactic used: {name}" for name in event.check.forbidden_uses
        )
        return _into_iterate(replace(state, workspace=ws), Phase.IMPLEMENT, messages)

    if state.phase is Phase.ITERATE:
        exhausted = state.budget.exhausted_dimensions
        if exhausted:
            return replace(state, phase=Phase.BLOCKED)
        budget = state.budget.consume("iterations")
        failed = ws.failed_phase or Phase.IMPLEMENT
        attempts = ws.retry_count(failed)
        if attempts < MAX_SAME_PHASE_RETRIES:
            target = failed
            ws = ws.with_retry(failed, attempts + 1)
        else:
            target = _FALLBACK.get(failed, Phase.STRATEGIZE)
            ws = ws.with_retry(failed, 0)
        return replace(state, phase=target, budget=budget, workspace=ws)

    raise DataError(f"unhandled phase {state.phase}")  # pragma: no cover


def run(
    goal: Goal,
    agent: AgentProvider,
    checker: CheckerProvider,
    budget: Budget,
    call_timeout: Optional[float] = None,
) -> tuple[RunOutcome, Trace]:
    """Drive the state machine to a terminal phase.

    Every provider call appends one trace event and consumes budget.  A
    Solved outcome is re-checked against the goal's ablation config before
    being returned; the verification consumes a checker call like any
    other.
    """
    trace = Trace()
    state = State(phase=Phase.SET_UP, goal=goal, budget=budget)
    trace.append(Phase.SET_UP, "setup", goal.theorem_statement, "ok")
    state = step(state)

    def blocked(reason: str) -> tuple[RunOutcome, Trace]:
        trace.append(Phase.BLOCKED, "terminal", None, f"blocked: {reason}")
        return RunOutcome(phase=Phase.BLOCKED, reason=reason), trace

    def provider_call(current: State, role: str, action: str, fn, *args):
        """Returns (state, ok, value_or_failure_event)."""
        kind = "agent_calls" if role == "agent" else "checker_calls"
        consumed = replace(current, budget=current.budget.consume(kind))
        started = time.monotonic()
        try:
            value = fn(*args)
        except Exception as exc:
            trace.append(consumed.phase, f"{role}.{action}", str(exc), "provider-failure")
            failure = StepEvent(action=action, failure=f"{type(exc).__name__}: {exc}")
            return consumed, False, failure
        elapsed = time.monotonic() - started
        if call_timeout is not None and elapsed > call_timeout:
            trace.append(consumed.phase, f"{role}.{action}", None, "provider-failure")
            failure = StepEvent(action=action, failure=f"deadline exceeded ({elapsed:.3f}s)")
            return consumed, False, failure
        return consumed, True, value

    while not state.phase.terminal:
        phase = state.phase
        ws = state.workspace

        if phase is Phase.ITERATE:
            next_state = step(state)
            outcome = (
                f"-> {next_state.phase.value}"
                if not next_state.phase.terminal
                else "blocked: budget exhausted"
            )
            trace.append(Phase.ITERATE, "iterate", ws.diagnostics, outcome)
            state = next_state
            continue

        needs_agent = phase in (
            Phase.EVALUATE,
            Phase.STRATEGIZE,
            Phase.DECOMPOSE,
            Phase.SCAFFOLD,
            Phase.IMPLEMENT,
        )
        if needs_agent and not state.budget.can_afford("agent_calls"):
            return blocked("agent call budget exhausted")

        if phase is Phase.EVALUATE:
            state, ok, value = provider_call(
                state, "agent", "evaluate_difficulty", agent.evaluate_difficulty, state.goal, None
            )
            if not ok:
                state = step(state, value)
                continue
            trace.append(phase, "agent.evaluate_difficulty", value, "ok")
            state = step(state, StepEvent(action="evaluate_difficulty", text=value))

        elif phase is Phase.STRATEGIZE:
            state, ok, value = provider_call(
                state, "agent", "draft_informal", agent.draft_informal, state.goal
            )
            if not ok:
                state = step(state, value)
                continue
            trace.append(phase, "agent.draft_informal", value, "ok")
            state = step(state, StepEvent(action="draft_informal", text=value))

        elif phase is Phase.DECOMPOSE:
            state, ok, value = provider_call(
                state, "agent", "decompose", agent.decompose, ws.informal or ""
            )
            if not ok:
                state = step(state, value)
                continue
            substeps = tuple(value)
            trace.append(phase, "agent.decompose", list(substeps), "ok")
            state = step(state, StepEvent(action="decompose", substeps=substeps))

        elif phase is Phase.SCAFFOLD:
            state, ok, value = provider_call(
                state, "agent", "scaffold", agent.scaffold, ws.substeps
            )
            if not ok:
                state = step(state, value)
                continue
            scaffold_text = value
            trace.append(phase, "agent.scaffold", scaffold_text, "ok")
            if not state.budget.can_afford("checker_calls"):
                return blocked("checker call budget exhausted")
            state, ok, check = provider_call(
                state, "checker", "check", checker.check, scaffold_text, state.goal.ablation
            )
            if not ok:
                state = step(state, check)
                continue
            trace.append(
                phase, "checker.check", scaffold_text,
                "accepted" if _scaffold_accepted(check) else "rejected",
            )
            state = step(state, StepEvent(action="scaffold", text=scaffold_text, check=check))

        elif phase is Phase.IMPLEMENT:
            candidate = ws.scaffold_text or ""
            diagnostics = ws.diagnostics
            failure_event = None
            while _count_placeholders(candidate) > 0:
                if not state.budget.can_afford("agent_calls"):
                    return blocked("agent call budget exhausted")
                state, ok, value = provider_call(
                    state, "agent", "fill_placeholder",
                    agent.fill_placeholder, candidate, 0, list(diagnostics),
                )
                if not ok:
                    failure_event = value
                    break
                trace.append(phase, "agent.fill_placeholder", value, "ok")
                candidate = _splice_first_placeholder(candidate, value)
            if failure_event is not None:
                state = step(state, failure_event)
                continue
            if not state.budget.can_afford("checker_calls"):
                return blocked("checker call budget exhausted")
            state, ok, check = provider_call(
                state, "checker", "check", checker.check, candidate, state.goal.ablation
            )
            if not ok:
                state = step(state, check)
                continue
            trace.append(
                phase, "checker.check", candidate,
                "success" if _implement_solved(check) else "rejected",
            )
            if _implement_solved(check):
                # Post-verify the final text before declaring the run solved.
                if not state.budget.can_afford("checker_calls"):
                    return blocked("checker call budget exhausted before verification")
                state, ok, verify = provider_call(
                    state, "checker", "verify", checker.check, candidate, state.goal.ablation
                )
                if not ok or not _implement_solved(verify):
                    trace.append(phase, "checker.verify", candidate, "verification-failed")
                    state = step(
                        state,
                        StepEvent(action="implement", text=candidate,
                                  check=verify if ok else CheckResult(success=False)),
                    )
                    continue
                trace.append(phase, "checker.verify", candidate, "verified")
            state = step(state, StepEvent(action="implement", text=candidate, check=check))

        else:  # pragma: no cover - SET_UP handled before the loop
            state = step(state)

    if state.phase is Phase.SOLVED:
        trace.append(Phase.SOLVED, "terminal", None, "solved")
        return RunOutcome(phase=Phase.SOLVED, lean_text=state.workspace.candidate_text), trace
    trace.append(Phase.BLOCKED, "terminal", None, "blocked: budget exhausted")
    return RunOutcome(phase=Phase.BLOCKED, reason="budget exhausted"), trace


def _count_placeholders(lean_text: str) -> int:
    return sum(1 for token in iter_identifier_tokens(lean_text) if token == PLACEHOLDER_TOKEN)


def _splice_first_placeholder(lean_text: str, fragment: str) -> str:
    """Replace the first lexical ``sorry`` token with ``fragment``."""
    index = 0
    while True:
        found = lean_text.find(PLACEHOLDER_TOKEN, index)
        if found < 0:
            return lean_text
        before = lean_text[found - 1] if found > 0 else " "
        after_index = found + len(PLACEHOLDER_TOKEN)
        after = lean_text[after_index] if after_index < len(lean_text) else " "
        if not (before.isalnum() or before in "_.'") and not (after.isalnum() or after in "_'"):
            return lean_text[:found] + fragment + lean_text[after_index:]
        index = found + 1


# -- Scripted mock providers -------------------------------------------------

_SCRIPT_SCHEMA = "proofspace.mock-script.v1"
_AGENT_OPS = (
    "evaluate_difficulty",
    "draft_informal",
    "decompose",
    "scaffold",
    "fill_placeholder",
)


class ScriptedAgent(AgentProvider):
    """Replays canned responses in order; exhaustion raises ProviderFailure."""

    def __init__(self, responses: Mapping[str, list]):
        self._responses = {op: list(responses.get(op, [])) for op in _AGENT_OPS}

    def _next(self, op: str):
        queue = self._responses[op]
        if not queue:
            raise ProviderFailure(f"mock script exhausted for {op!r}")
        return queue.pop(0)

    def evaluate_difficulty(self, goal: Goal, context: Optional[str]) -> str:
        return self._next("evaluate_difficulty")

    def draft_informal(self, goal: Goal) -> str:
        return self._next("draft_informal")

    def decompose(self, informal: str) -> Sequence[str]:
        return self._next("decompose")

    def scaffold(self, substeps: Sequence[str]) -> str:
        return self._next("scaffold")

    def fill_placeholder(self, scaffold: str, index: int, diagnostics: Sequence[str]) -> str:
        return self._next("fill_placeholder")


class LexicalMockChecker(CheckerProvider):
    """Counts ``sorry`` placeholders and forbidden-tactic tokens lexically.

    A text "compiles" unless it contains one of the script's failing
    patterns; forbidden uses are reported once per occurrence.
    """

    def __init__(self, failing_patterns: Sequence[str] = ()):
        self.failing_patterns = tuple(failing_patterns)

    def check(self, lean_text: str, ablation: Optional[AblationConfig]) -> CheckResult:
        placeholders = 0
        forbidden_uses: list[str] = []
        forbidden = frozenset(ablation.forbidden_tactics) if ablation is not None else frozenset()
        for token in iter_identifier_tokens(lean_text):
            if token == PLACEHOLDER_TOKEN:
                placeholders += 1
            elif token in forbidden:
                forbidden_uses.append(token)
        messages: list[str] = []
        compiled = True
        for pattern in self.failing_patterns:
            if pattern in lean_text:
                compiled = False
                messages.append(f"error: simulated failure matching {pattern!r}")
        if forbidden_uses:
            messages.append(f"error: forbidden tactics used: {sorted(set(forbidden_uses))}")
        return CheckResult(
            success=compiled and not forbidden_uses,
            messages=tuple(messages),
            forbidden_uses=tuple(forbidden_uses),
            unresolved_placeholders=placeholders,
        )


def mock_providers(script: Mapping | str) -> tuple[AgentProvider, CheckerProvider]:
    """Build scripted providers from a mock-script document (dict or JSON text)."""
    if isinstance(script, str):
        try:
            script = json.loads(script)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"mock script is not valid JSON: {exc}") from exc
    if not isinstance(script, Mapping):
        raise SchemaError("mock script must be a JSON object")
    if script.get("schema") != _SCRIPT_SCHEMA:
        raise SchemaError(f"mock script schema must be {_SCRIPT_SCHEMA!r}")
    agent_section = script.get("agent")
    if not isinstance(agent_section, Mapping):
        raise SchemaError("mock script needs an 'agent' object")
    unknown = set(agent_section) - set(_AGENT_OPS)
    if unknown:
        raise SchemaError(f"unknown agent operations in script: {sorted(unknown)}")
    for op, queue in agent_section.items():
        if not isinstance(queue, list):
            raise SchemaError(f"agent responses for {op!r} must form a list")
    checker_section = script.get("checker", {})
    if not isinstance(checker_section, Mapping):
        raise SchemaError("'checker' must be an object when present")
    failing = checker_section.get("failing_patterns", [])
    if not isinstance(failing, list) or not all(isinstance(p, str) for p in failing):
        raise SchemaError("'failing_patterns' must be a list of strings")
    return ScriptedAgent(agent_section), LexicalMockChecker(failing)
