"""Simulated multi-turn tool environment and the composite trajectory reward.

Scenarios hide part of the information behind clarification turns, so an
agent must ask before it can call tools with the right arguments. Drivers
are pluggable turn generators; tests use scripted ones, so every episode is
reproducible step for step. Scoring combines answer correctness, tool-call
necessity, step efficiency, and parameter accuracy.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

from . import expr
from .errors import InputError, UnknownIdError
from .funnel import GoldAnswer, gold_from_dict
from .records import iter_records, read_records, write_records
from .ruleverify import match_answer

PARAM_TYPES = ("number", "string", "date", "enum")
DEFAULT_STEP_BUDGET = 16
DEFAULT_WEIGHTS = {"answer": 0.25, "necessity": 0.25, "efficiency": 0.25, "params": 0.25}

_DATE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


@dataclass(frozen=True)
class ToolParam:
    name: str
    type: str
    required: bool = True
    values: tuple[str, ...] = ()

    def __post_init__(self):
        if self.type not in PARAM_TYPES:
            raise InputError(f"unknown param type {self.type!r}")
        if self.type == "enum" and not self.values:
            raise InputError(f"enum param {self.name!r} needs declared values")


@dataclass(frozen=True)
class ToolSpec:
    name: str
    params: tuple[ToolParam, ...]
    behavior: dict  # {"kind": "table"|"expr", ...}
    strict_params: bool = True

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(names) != len(set(names)):
            raise InputError(f"tool {self.name!r} has duplicate param names")
        kind = self.behavior.get("kind")
        if kind not in ("table", "expr"):
            raise InputError(f"tool {self.name!r}: unknown behavior kind {kind!r}")
        if kind == "expr":
            expr.parse_expr(self.behavior["expr"])  # must parse at registration

    def execute(self, params: Mapping[str, object]) -> dict:
        """Deterministic result record for a valid call; total over inputs."""
        if self.behavior["kind"] == "expr":
            env = {k: float(v) for k, v in params.items() if isinstance(v, (int, float))}
            value = expr.evaluate(expr.parse_expr(self.behavior["expr"]), env)
            return {"result": value}
        key_fields = self.behavior.get("key", [p.name for p in self.params if p.required])
        key = "|".join(str(params.get(k, "")) for k in key_fields)
        rows = self.behavior.get("rows", {})
        if key in rows:
            return dict(rows[key])
        default = self.behavior.get("default")
        if default is not None:
            return dict(default)
        return {"found": False, "key": key}


@dataclass(frozen=True)
class Violation:
    kind: str  # missing_required | type_mismatch | out_of_enum | unknown_param
    param: str
    note: str = ""


def validate_tool_call(call: "ToolCall", spec: ToolSpec) -> list[Violation]:
    """Enumerate contract violations for one call against its tool spec."""
    if call.name != spec.name:
        raise UnknownIdError(f"call targets {call.name!r}, spec is {spec.name!r}")
    violations: list[Violation] = []
    declared = {p.name: p for p in spec.params}
    for p in spec.params:
        if p.required and p.name not in call.params:
            violations.append(Violation(kind="missing_required", param=p.name))
    for name, value in call.params.items():
        p = declared.get(name)
        if p is None:
            if spec.strict_params:
                violations.append(Violation(kind="unknown_param", param=name))
            continue
        if p.type == "number" and not (
            isinstance(value, (int, float)) and not isinstance(value, bool)
        ):
            violations.append(
                Violation(kind="type_mismatch", param=name, note=f"expected number, got {type(value).__name__}")
            )
        elif p.type == "string" and not isinstance(value, str):
            violations.append(
                Violation(kind="type_mismatch", param=name, note=f"expected string, got {type(value).__name__}")
            )
        elif p.type == "date" and not (isinstance(value, str) and _DATE.match(value)):
            violations.append(
                Violation(kind="type_mismatch", param=name, note="expected YYYY-MM-DD date")
            )
        elif p.type == "enum" and value not in p.values:
            violations.append(
                Violation(kind="out_of_enum", param=name, note=f"allowed: {', '.join(p.values)}")
            )
    return violations


# ---------------------------------------------------------------------------
# Scenario and trajectory


@dataclass(frozen=True)
class Scenario:
    id: str
    user_goal: str
    visible_facts: dict[str, str]
    hidden_facts: dict[str, str]
    available_tools: tuple[ToolSpec, ...]
    gold: GoldAnswer
    optimal_steps: int
    requires_tool: bool
    aliases: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.optimal_steps < 1:
            raise InputError("optimal_steps must be positive")
        unknown = set(self.aliases) - set(self.hidden_facts)
        if unknown:
            raise InputError(f"aliases declared for unknown hidden facts: {sorted(unknown)}")

    def tool(self, name: str) -> ToolSpec:
        for t in self.available_tools:
            if t.name == name:
                return t
        raise UnknownIdError(f"scenario {self.id!r} has no tool {name!r}")


# Agent actions
@dataclass(frozen=True)
class Say:
    text: str


@dataclass(frozen=True)
class ToolCall:
    name: str
    params: dict


@dataclass(frozen=True)
class Answer:
    text: str


Action = Union[Say, ToolCall, Answer]


@dataclass
class Step:
    type: str  # assistant_msg | tool_call | tool_result | user_reply
    payload: dict


@dataclass
class Trajectory:
    scenario_id: str
    steps: list[Step]
    final_answer: Optional[str] = None
    truncated: bool = False

    def assistant_turns(self) -> int:
        turns = sum(1 for s in self.steps if s.type in ("assistant_msg", "tool_call"))
        return turns + (1 if self.final_answer is not None else 0)

    def tool_calls(self) -> list[Step]:
        return [s for s in self.steps if s.type == "tool_call"]

    def clarified_keys(self) -> set[str]:
        return {
            key
            for s in self.steps
            if s.type == "user_reply"
            for key in s.payload.get("revealed", [])
        }


@dataclass
class TrajectoryView:
    """What the driver sees: goal, visible facts, history, revealed facts."""

    user_goal: str
    visible_facts: dict[str, str]
    steps: list[Step]
    revealed: dict[str, str]


Driver = Callable[[TrajectoryView], Action]


class ScriptedDriver:
    """Replays a fixed list of actions; entries may be callables on the view."""

    def __init__(self, script: Sequence[Action | Callable[[TrajectoryView], Action]]):
        self._script = list(script)
        self._cursor = 0

    def __call__(self, view: TrajectoryView) -> Action:
        if self._cursor >= len(self._script):
            return Answer("")  # ran out of script: give an empty final answer
        step = self._script[self._cursor]
        self._cursor += 1
        return step(view) if callable(step) else step


def run_scenario(
    scenario: Scenario, agent_driver: Driver, step_budget: int = DEFAULT_STEP_BUDGET
) -> Trajectory:
    """Play one episode: clarifications reveal hidden facts, tool calls run
    through the declared behaviors, and the episode ends on a final answer
    or when the assistant-turn budget is exhausted (marked truncated)."""
    steps: list[Step] = []
    revealed: dict[str, str] = {}
    traj = Trajectory(scenario_id=scenario.id, steps=steps)

    for _ in range(step_budget):
        view = TrajectoryView(
            user_goal=scenario.user_goal,
            visible_facts=dict(scenario.visible_facts),
            steps=steps,
            revealed=dict(revealed),
        )
        action = agent_driver(view)
        if isinstance(action, Answer):
            traj.final_answer = action.text
            return traj
        if isinstance(action, Say):
            steps.append(Step(type="assistant_msg", payload={"text": action.text}))
            matched = _match_hidden(action.text, scenario)
            if matched:
                revealed.update(matched)
                reply = "; ".join(f"{k} = {v}" for k, v in sorted(matched.items()))
            else:
                reply = "I do not have that information."
            steps.append(
                Step(type="user_reply", payload={"text": reply, "revealed": sorted(matched)})
            )
            continue
        if isinstance(action, ToolCall):
            steps.append(
                Step(type="tool_call", payload={"name": action.name, "params": action.params})
            )
            steps.append(Step(type="tool_result", payload=_execute_call(action, scenario)))
            continue
        raise InputError(f"driver produced unknown action {action!r}")

    traj.truncated = True
    return traj


def _match_hidden(text: str, scenario: Scenario) -> dict[str, str]:
    lowered = text.casefold()
    matched = {}
    for key, value in scenario.hidden_facts.items():
        names = [key, key.replace("_", " "), *scenario.aliases.get(key, ())]
        if any(name.casefold() in lowered for name in names):
            matched[key] = value
    return matched


def _execute_call(call: ToolCall, scenario: Scenario) -> dict:
    try:
        spec = scenario.tool(call.name)
    except UnknownIdError:
        return {"error": {"kind": "unknown_tool", "name": call.name}}
    violations = validate_tool_call(call, spec)
    if violations:
        return {
            "error": {
                "kind": "invalid_params",
                "violations": [
                    {"kind": v.kind, "param": v.param, "note": v.note} for v in violations
                ],
            }
        }
    return {"record": spec.execute(call.params)}


# ---------------------------------------------------------------------------
# Composite scoring


@dataclass(frozen=True)
class AgenticScore:
    answer_correct: int
    tool_necessity: float
    efficiency: float
    param_accuracy: float
    scalar: float


def score_trajectory(
    traj: Trajectory,
    scenario: Scenario,
    weights: Mapping[str, float] | None = None,
) -> AgenticScore:
    """Composite reward over one trajectory.

    necessity loses a full point for calling tools on a no-tool scenario and
    for skipping tools on a tool-requiring one; efficiency is
    min(1, optimal/actual) over assistant turns; parameter accuracy is the
    valid-call fraction. The scalar is the weighted sum (equal by default).
    """
    if traj.scenario_id != scenario.id:
        raise InputError(
            f"trajectory was produced against {traj.scenario_id!r}, not {scenario.id!r}"
        )
    w = dict(DEFAULT_WEIGHTS if weights is None else weights)
    if abs(sum(w.values()) - 1.0) > 1e-9:
        raise InputError("score weights must sum to 1")

    answer_correct = 0
    if traj.final_answer:
        answer_correct = 1 if match_answer(traj.final_answer, scenario.gold) else 0

    calls = traj.tool_calls()
    penalties = 0.0
    if scenario.requires_tool and not calls:
        penalties += 1.0
    if not scenario.requires_tool and calls:
        penalties += 1.0
    tool_necessity = max(0.0, 1.0 - penalties)

    actual = traj.assistant_turns()
    efficiency = min(1.0, scenario.optimal_steps / actual) if actual > 0 else 0.0

    if calls:
        tool_names = {t.name for t in scenario.available_tools}
        valid = 0
        for s in calls:
            if s.payload["name"] not in tool_names:
                continue  # a call to an undeclared tool is never valid
            c = ToolCall(name=s.payload["name"], params=s.payload["params"])
            if not validate_tool_call(c, scenario.tool(c.name)):
                valid += 1
        param_accuracy = valid / len(calls)
    else:
        param_accuracy = 0.0 if scenario.requires_tool else 1.0

    scalar = (
        w["answer"] * answer_correct
        + w["necessity"] * tool_necessity
        + w["efficiency"] * efficiency
        + w["params"] * param_accuracy
    )
    return AgenticScore(
        answer_correct=answer_correct,
        tool_necessity=tool_necessity,
        efficiency=efficiency,
        param_accuracy=param_accuracy,
        scalar=scalar,
    )


# ---------------------------------------------------------------------------
# Serialization


def tool_from_dict(rec: dict) -> ToolSpec:
    return ToolSpec(
        name=rec["name"],
        params=tuple(
            ToolParam(
                name=p["name"],
                type=p["type"],
                required=p.get("required", True),
                values=tuple(p.get("values", [])),
            )
            for p in rec.get("params", [])
        ),
        behavior=rec["behavior"],
        strict_params=rec.get("strict_params", True),
    )


def scenario_from_dict(rec: dict) -> Scenario:
    return Scenario(
        id=rec["id"],
        user_goal=rec["user_goal"],
        visible_facts=dict(rec.get("visible_facts", {})),
        hidden_facts=dict(rec.get("hidden_facts", {})),
        available_tools=tuple(tool_from_dict(t) for t in rec.get("tools", [])),
        gold=gold_from_dict(rec["gold"]),
        optimal_steps=int(rec["optimal_steps"]),
        requires_tool=bool(rec.get("requires_tool", True)),
        aliases={k: tuple(v) for k, v in rec.get("aliases", {}).items()},
    )


def load_scenarios(path: str | Path) -> dict[str, Scenario]:
    scenarios = {}
    for _, rec in iter_records(path):
        s = scenario_from_dict(rec)
        scenarios[s.id] = s
    return scenarios


def trajectory_to_records(traj: Trajectory) -> list[dict]:
    records = [{"scenario_id": traj.scenario_id, "type": "header"}]
    records += [{"type": s.type, **s.payload} for s in traj.steps]
    records.append(
        {"type": "final_answer", "text": traj.final_answer, "truncated": traj.truncated}
    )
    return records


def trajectory_from_records(records: Sequence[dict]) -> Trajectory:
    if not records or records[0].get("type") != "header":
        raise InputError("trajectory records must start with a header")
    steps = []
    final: Optional[str] = None
    saw_final = False
    truncated = False
    for rec in records[1:]:
        if saw_final:
            raise InputError("final_answer must be the last trajectory record")
        rec = dict(rec)
        rtype = rec.pop("type")
        if rtype == "final_answer":
            saw_final = True
            final = rec.get("text")
            truncated = bool(rec.get("truncated", False))
        elif rtype in ("assistant_msg", "tool_call", "tool_result", "user_reply"):
            if rtype == "tool_result" and (not steps or steps[-1].type != "tool_call"):
                raise InputError("tool_result must follow a tool_call")
            steps.append(Step(type=rtype, payload=rec))
        else:
            raise InputError(f"unknown trajectory step type {rtype!r}")
    return Trajectory(
        scenario_id=records[0]["scenario_id"],
        steps=steps,
        final_answer=final,
        truncated=truncated,
    )


def save_trajectory(path: str | Path, traj: Trajectory) -> None:
    write_records(path, trajectory_to_records(traj))


def load_trajectory(path: str | Path) -> Trajectory:
    return trajectory_from_records(read_records(path))
