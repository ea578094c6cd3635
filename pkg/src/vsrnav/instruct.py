"""Natural-language instruction handling: chain-of-thought prompt assembly,
plan grammar parsing, a deterministic rule-based fallback planner, and plan
execution against the scene representation and simulator."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx
import numpy as np

from . import simworld, vsr
from .embed import EmbeddingProvider
from .errors import (
    ClientError,
    EmptyInstruction,
    EmptyScene,
    HandEmpty,
    HandFull,
    InvalidPlan,
    NoActionsFound,
    NoMatch,
    NoSurface,
    NotGraspable,
    OutOfReach,
    Unreachable,
    UnrecognizedInstruction,
)
from .simworld import RobotState, WorldSpec
from .vsr import SceneRepresentation

__all__ = [
    "AtomicAction",
    "Plan",
    "ExecutionStep",
    "ExecutionTrace",
    "build_prompt",
    "parse_plan",
    "render_plan",
    "plan_rule_based",
    "plan_llm",
    "execute",
    "LanguageModelClient",
    "HttpLanguageModelClient",
    "ReplayClient",
    "VERBS",
]

VERBS = ("navigate", "pick", "place", "done")

PROMPT_TEMPLATE = (
    "Suppose you are a robot that your actions are limited to picking up items "
    "with pick(object), placing down items with place(object) and move to object "
    "objects or locations with navigate(object). \n"
    "Task: Put the apple on the wooden desk.\n"
    "Explanation: The task could be done by first finding the apple, then moving "
    "to the table, finally putting down the apple.\n"
    "Plan: 1. navigate(``apple\"), 2. pick(``apple\"), \n"
    "3. navigate(``wooden desk\"), 4. place(``apple\"), \n"
    "5. done(). \n"
    "Task: {instruction}\n"
    "Plan:"
)

CORRECTION_SUFFIX = (
    "\nThe previous plan was invalid. Answer again with one action per line, "
    "using only navigate(\"...\"), pick(\"...\"), place(\"...\") and a final done()."
)


@dataclass(frozen=True)
class AtomicAction:
    verb: str  # navigate | pick | place | done
    argument: str | None = None

    def __post_init__(self):
        if self.verb not in VERBS:
            raise ValueError(f"unknown verb {self.verb!r}")

    def validate(self) -> None:
        if self.verb == "done":
            if self.argument:
                raise InvalidPlan("done() takes no argument")
        elif not self.argument:
            raise InvalidPlan(f"{self.verb}() requires a non-empty argument")


@dataclass
class Plan:
    actions: list[AtomicAction]
    source: str  # "llm" | "rule"

    def validate(self) -> "Plan":
        if not self.actions:
            raise InvalidPlan("plan is empty")
        for action in self.actions:
            action.validate()
        done_positions = [i for i, a in enumerate(self.actions) if a.verb == "done"]
        if len(done_positions) != 1 or done_positions[0] != len(self.actions) - 1:
            raise InvalidPlan("done() must appear exactly once, as the last action")
        seen_navigate = False
        holding = False
        for action in self.actions:
            if action.verb == "navigate":
                seen_navigate = True
            elif action.verb == "pick":
                if not seen_navigate:
                    raise InvalidPlan("pick before any navigate")
                holding = True
            elif action.verb == "place":
                if not holding:
                    raise InvalidPlan("place without a preceding pick")
                holding = False
        return self


def build_prompt(instruction: str) -> str:
    """Few-shot chain-of-thought prompt: role preamble, the worked apple
    example (explanation plus 5-step plan), then the user's task."""
    if not instruction.strip():
        raise EmptyInstruction("instruction is empty")
    return PROMPT_TEMPLATE.format(instruction=instruction.strip())


# grammar per action: optional "N." ordinal, verb, "(", optionally quoted
# argument, ")"; quotes may be straight, curly, or the double-backtick /
# double-apostrophe pair used in typeset prompts
_QUOTE = r"(?:``|''|[\"'“”‘’`])"
_ACTION_RE = re.compile(
    rf"(navigate|pick|place|done)\s*\(\s*(?:{_QUOTE}\s*([^)\"'“”‘’`]*?)\s*{_QUOTE})?\s*\)",
    re.IGNORECASE,
)


def parse_plan(text: str, source: str = "llm") -> Plan:
    """Extract atomic actions from free-form planner output.

    Non-matching text is skipped; the collected sequence must satisfy the plan
    invariants. Raises NoActionsFound when nothing parses, InvalidPlan (with
    the violated rule) otherwise.
    """
    actions = []
    for match in _ACTION_RE.finditer(text):
        verb = match.group(1).lower()
        arg = match.group(2)
        arg = arg.strip() if arg else None
        actions.append(AtomicAction(verb=verb, argument=arg or None))
    if not actions:
        raise NoActionsFound("no atomic action found in the text")
    return Plan(actions=actions, source=source).validate()


def render_plan(plan: Plan) -> str:
    """Inverse of parse_plan in the prompt's own notation."""
    parts = []
    for i, action in enumerate(plan.actions, start=1):
        arg = f'``{action.argument}"' if action.argument else ""
        parts.append(f"{i}. {action.verb}({arg})")
    return ", ".join(parts) + "."


_ARTICLE_RE = re.compile(r"^(?:the|a|an)\s+", re.IGNORECASE)

_CARRY_RE = re.compile(
    r"^(?:please\s+)?(?:put|move|throw|place)\s+(?P<obj>.+?)\s+(?:on|onto|in|into)\s+(?P<dst>.+)$",
    re.IGNORECASE)
_GOTO_RE = re.compile(
    r"^(?:please\s+)?(?:find|go\s+to|navigate\s+to|locate)\s+(?P<obj>.+)$", re.IGNORECASE)
_FETCH_RE = re.compile(
    r"^(?:please\s+)?(?:fetch|bring|grab|get|pick\s+up)\s+(?P<obj>.+)$", re.IGNORECASE)


def _clean(phrase: str) -> str:
    return _ARTICLE_RE.sub("", phrase.strip()).lower()


def plan_rule_based(instruction: str) -> Plan:
    """Deterministic offline fallback for the language model."""
    if not instruction.strip():
        raise EmptyInstruction("instruction is empty")
    text = instruction.strip().rstrip(".!").strip()
    if m := _CARRY_RE.match(text):
        obj, dst = _clean(m["obj"]), _clean(m["dst"])
        actions = [AtomicAction("navigate", obj), AtomicAction("pick", obj),
                   AtomicAction("navigate", dst), AtomicAction("place", obj),
                   AtomicAction("done")]
    elif m := _GOTO_RE.match(text):
        actions = [AtomicAction("navigate", _clean(m["obj"])), AtomicAction("done")]
    elif m := _FETCH_RE.match(text):
        obj = _clean(m["obj"])
        actions = [AtomicAction("navigate", obj), AtomicAction("pick", obj),
                   AtomicAction("done")]
    else:
        raise UnrecognizedInstruction(instruction)
    return Plan(actions=actions, source="rule").validate()


class LanguageModelClient(Protocol):
    def complete(self, prompt: str) -> str: ...


@dataclass
class HttpLanguageModelClient:
    """POST {"prompt", "max_tokens", "temperature": 0} -> {"text"}."""

    endpoint: str
    api_key: str | None = None
    max_tokens: int = 256
    timeout: float = 30.0

    def complete(self, prompt: str) -> str:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            response = httpx.post(self.endpoint, headers=headers, timeout=self.timeout,
                                  json={"prompt": prompt, "max_tokens": self.max_tokens,
                                        "temperature": 0})
        except httpx.HTTPError as exc:
            raise ClientError(str(exc)) from exc
        if response.status_code != 200:
            raise ClientError(f"status {response.status_code}")
        try:
            return response.json()["text"]
        except Exception as exc:
            raise ClientError(f"malformed response: {exc}") from exc


class ReplayClient:
    """Serves canned completions from a JSON list file (or an in-memory list)."""

    def __init__(self, responses: list[str] | str | Path):
        if isinstance(responses, (str, Path)):
            responses = json.loads(Path(responses).read_text())
        self._responses = list(responses)
        self._cursor = 0

    def complete(self, prompt: str) -> str:
        if self._cursor >= len(self._responses):
            raise ClientError("replay exhausted")
        text = self._responses[self._cursor]
        self._cursor += 1
        return text


def plan_llm(instruction: str, client: LanguageModelClient) -> Plan:
    """Prompt, parse, and retry once with a correction on invalid output."""
    prompt = build_prompt(instruction)
    try:
        return parse_plan(client.complete(prompt), source="llm")
    except (InvalidPlan, NoActionsFound):
        return parse_plan(client.complete(prompt + CORRECTION_SUFFIX), source="llm")


# --- execution ---

@dataclass
class ExecutionStep:
    action: AtomicAction
    outcome: str  # "ok" or the error kind name
    detail: str = ""
    resolved_index: int | None = None
    resolved_score: float | None = None
    resolved_position: tuple[float, float, float] | None = None
    pose: tuple[float, float, float] | None = None


@dataclass
class ExecutionTrace:
    steps: list[ExecutionStep] = field(default_factory=list)
    status: str = "success"  # "success" | "error"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "steps": [
                {
                    "verb": s.action.verb,
                    "argument": s.action.argument,
                    "outcome": s.outcome,
                    "detail": s.detail,
                    "resolved_index": s.resolved_index,
                    "resolved_score": s.resolved_score,
                    "resolved_position": list(s.resolved_position) if s.resolved_position else None,
                    "pose": list(s.pose) if s.pose else None,
                }
                for s in self.steps
            ],
        }


_STEP_ERRORS = (NoMatch, EmptyScene, Unreachable, OutOfReach, HandFull, HandEmpty,
                NoSurface, NotGraspable)


def execute(plan: Plan, scene: SceneRepresentation, world: WorldSpec,
            robot: RobotState, provider: EmbeddingProvider,
            reach: float = simworld.DEFAULT_REACH,
            standoff: float = simworld.DEFAULT_STANDOFF,
            min_score: float = vsr.DEFAULT_MIN_SCORE,
            on_step=None) -> ExecutionTrace:
    """Run the plan against the scene and simulator; stop at the first error.

    navigate resolves its description through the scene query and moves to a
    standoff point; pick re-queries its argument so stale navigation results
    cannot desynchronize the trace. place names the held object, so its target
    is the destination of the most recent navigate.
    """
    trace = ExecutionTrace()
    last_navigate: np.ndarray | None = None

    def resolve(description: str):
        psi = provider.embed_text(description)
        idx, score = vsr.query(scene, psi, min_score=min_score)
        return idx, score, scene.objects[idx].position

    for action in plan.actions:
        step = ExecutionStep(action=action, outcome="ok")
        try:
            if action.verb == "navigate":
                idx, score, position = resolve(action.argument)
                step.resolved_index, step.resolved_score = idx, score
                step.resolved_position = tuple(position.tolist())
                simworld.navigate_to(world, robot, position[:2], reach=reach,
                                     standoff=standoff)
                last_navigate = position
            elif action.verb == "pick":
                idx, score, position = resolve(action.argument)
                step.resolved_index, step.resolved_score = idx, score
                step.resolved_position = tuple(position.tolist())
                candidates = [o for o in world.objects.values() if o.graspable]
                if not candidates:
                    raise OutOfReach("no graspable object left in the world")
                target = min(candidates,
                             key=lambda o: (float(np.linalg.norm(o.position - position)), o.id))
                simworld.pick(world, robot, target.id, reach=reach)
            elif action.verb == "place":
                if last_navigate is not None:
                    position = last_navigate
                else:
                    idx, score, position = resolve(action.argument)
                    step.resolved_index, step.resolved_score = idx, score
                step.resolved_position = tuple(position.tolist())
                simworld.place(world, robot, position, reach=reach)
            # done: nothing to do
            step.pose = robot.pose
            trace.steps.append(step)
            if on_step is not None:
                on_step(step)
        except _STEP_ERRORS as exc:
            step.outcome = type(exc).__name__
            step.detail = str(exc)
            step.pose = robot.pose
            trace.steps.append(step)
            trace.status = "error"
            if on_step is not None:
                on_step(step)
            break
    return trace
