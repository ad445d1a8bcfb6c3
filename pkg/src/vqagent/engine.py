"""Recursive divide-and-conquer task execution.

``DnCEngine.dnc`` asks the conqueror for a verdict on a task and then takes
exactly one branch: split via the divider and recurse into each subtask, run
a tool (with rescuer-driven repair), or store a direct answer. The depth of
every subtask is checked before recursing into it.
"""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass, field, replace
from typing import Callable

from .errors import EngineError, InvalidInput, ProviderError, VerdictParseError, VQAgentError
from .prompts import conqueror_request, divider_request, synthesis_request
from .tasktree import TaskNode, TaskResult, TaskStatus, add_subtasks, to_records, update_result
from .text import extract_json
from .timecode import to_seconds
from .tools import ToolCall, ToolFailure, ToolRegistry, ToolResult, ToolSpec

log = logging.getLogger(__name__)

DEPTH_EXCEEDED = "Task tree depth exceeded"
VERDICT_KINDS = ("too_complex", "requires_tool", "direct_answer")


@dataclass(frozen=True)
class EngineConfig:
    max_depth: int = 4
    max_rescue_attempts: int = 3
    verdict_parser: str = "strict"

    def __post_init__(self):
        # 0 is accepted: the root may still run, but it can never be divided.
        if isinstance(self.max_depth, bool) or not isinstance(self.max_depth, int) or self.max_depth < 0:
            raise InvalidInput("max_depth must be a non-negative integer")
        if self.max_rescue_attempts < 1:
            raise InvalidInput("max_rescue_attempts must be at least 1")
        if self.verdict_parser not in ("strict", "lenient"):
            raise InvalidInput("verdict_parser must be 'strict' or 'lenient'")


@dataclass(frozen=True)
class ConquerorVerdict:
    kind: str
    reason: str | None = None
    tool: ToolCall | None = None
    answer: str | None = None

    def __post_init__(self):
        if self.kind not in VERDICT_KINDS:
            raise InvalidInput(f"unknown verdict kind {self.kind!r}")
        populated = {"too_complex": bool(self.reason), "requires_tool": self.tool is not None, "direct_answer": bool(self.answer)}
        if not populated[self.kind] or sum(populated.values()) != 1:
            raise InvalidInput(f"verdict {self.kind} must populate exactly its own field")


@dataclass(frozen=True)
class DividePlan:
    success: bool
    tasks: tuple[str, ...] = ()
    reason: str = ""

    def __post_init__(self):
        if self.success and len(self.tasks) < 2:
            raise InvalidInput("a successful plan needs at least two tasks")
        if not self.success and (self.tasks or not self.reason):
            raise InvalidInput("a failed plan carries a reason and no tasks")


@dataclass(frozen=True)
class RepairOutcome:
    repaired: bool
    remedy_note: str
    retry_payload: ToolCall | None = None

    def __post_init__(self):
        if self.repaired and self.retry_payload is None:
            raise InvalidInput("a repair must carry the call to retry")


@dataclass(frozen=True)
class RetrievalContext:
    hits: tuple = ()
    tool_catalog: tuple[ToolSpec, ...] = ()
    query: str = ""
    notes: tuple[tuple[str, str], ...] = ()  # (description, outcome) of earlier sibling tasks
    video_id: str | None = None
    options: dict | None = None


# ----------------------------------------------------------------- parsing

def _tool_call(obj) -> ToolCall | None:
    tool = obj.get("tool")
    if isinstance(tool, dict) and isinstance(tool.get("name"), str):
        args = tool.get("args") or {}
        return ToolCall(tool["name"], dict(args)) if isinstance(args, dict) else None
    if isinstance(tool, str):
        args = obj.get("args") or {}
        return ToolCall(tool, dict(args)) if isinstance(args, dict) else None
    return None


def _strict(obj) -> ConquerorVerdict:
    kind = obj.get("type")
    if kind == "too_complex":
        return ConquerorVerdict(kind, reason=str(obj.get("reason") or "task is too complex"))
    if kind == "requires_tool":
        call = _tool_call(obj)
        if call is None:
            raise VerdictParseError("requires_tool verdict without a usable tool call", {"response": obj})
        return ConquerorVerdict(kind, tool=call)
    if kind == "direct_answer":
        answer = obj.get("answer")
        if answer is None or not str(answer).strip():
            raise VerdictParseError("direct_answer verdict without an answer", {"response": obj})
        return ConquerorVerdict(kind, answer=str(answer))
    raise VerdictParseError(f"unknown verdict type {kind!r}", {"response": obj})


_PHRASE_RE = re.compile(r"too[ _]complex|requires?[ _]tool|direct[ _]answer", re.IGNORECASE)


def parse_verdict(text: str, mode: str = "strict") -> ConquerorVerdict:
    obj = extract_json(text)
    if obj is not None and "type" in obj:
        try:
            return _strict(obj)
        except VerdictParseError:
            if mode == "strict":
                raise
    if mode == "strict":
        raise VerdictParseError("conqueror response is not a structured verdict", {"response": text})
    m = _PHRASE_RE.search(text)
    if m is None:
        raise VerdictParseError("no verdict phrase found", {"response": text})
    phrase = m.group(0).lower().replace("_", " ")
    rest = text[m.end():].lstrip(" :.-\n").strip()
    if phrase.startswith("too"):
        return ConquerorVerdict("too_complex", reason=rest or text.strip())
    if phrase.startswith("direct"):
        return ConquerorVerdict("direct_answer", answer=rest or text.strip())
    call = _tool_call(obj) if obj is not None else None
    if call is None and obj is not None and isinstance(obj.get("name"), str):
        call = ToolCall(obj["name"], dict(obj.get("args") or {}))
    if call is None:
        raise VerdictParseError("tool verdict names no tool", {"response": text})
    return ConquerorVerdict("requires_tool", tool=call)


def parse_plan(text: str) -> DividePlan:
    obj = extract_json(text)
    if obj is None or "success" not in obj:
        raise EngineError("divider response is not a plan", {"response": text})
    if not obj["success"]:
        return DividePlan(False, reason=str(obj.get("reason") or "divider declined"))
    tasks = obj.get("tasks")
    if not isinstance(tasks, list) or not all(isinstance(t, str) and t.strip() for t in tasks):
        raise EngineError("plan tasks must be a list of non-empty strings", {"response": text})
    if len(tasks) < 2:
        return DividePlan(False, reason="degenerate split")
    return DividePlan(True, tuple(tasks))


# ------------------------------------------------------------------ rescuer

class Rescuer:
    """Rule-based repair keyed on the failure category.

    ``bad_args`` normalises and clamps timestamp arguments, ``environment``
    installs an allow-listed missing module, ``upstream`` backs off and
    retries, ``not_found`` gives up.
    """

    def __init__(
        self,
        durations: Callable[[str], float] | None = None,
        installer: Callable[[str], bool] | None = None,
        allowlist=(),
        sleep=time.sleep,
        backoff_base: float = 0.5,
    ):
        self.durations = durations
        self.installer = installer
        self.allowlist = frozenset(allowlist)
        self.sleep = sleep
        self.backoff_base = backoff_base

    def repair(self, call: ToolCall, failure: ToolFailure, attempt: int = 0, spec: ToolSpec | None = None) -> RepairOutcome:
        handler = getattr(self, f"_fix_{failure.category}")
        return handler(call, failure, attempt, spec)

    def _fix_bad_args(self, call, failure, attempt, spec):
        names = [a.name for a in spec.args if a.type == "timestamp"] if spec else [k for k in call.args if k in ("t0", "t1")]
        args = dict(call.args)
        for name in names:
            if name in args and args[name] is not None:
                try:
                    args[name] = to_seconds(args[name], lenient=True)
                except InvalidInput:
                    return RepairOutcome(False, f"{name}={args[name]!r} is not a time value")
        if "t0" in args and "t1" in args:
            t0, t1 = args["t0"], args["t1"]
            if t0 > t1:
                t0, t1 = t1, t0
            duration = None
            if self.durations is not None and args.get("video_id"):
                try:
                    duration = self.durations(args["video_id"])
                except VQAgentError:
                    duration = None
            t0 = max(0.0, t0)
            if duration is not None:
                t0, t1 = min(t0, duration), min(t1, duration)
            if t1 <= t0:
                # widen a collapsed span by one second inside the video
                if duration is None or t0 + 1 <= duration:
                    t1 = t0 + 1
                else:
                    t0 = max(0.0, t1 - 1)
            args["t0"], args["t1"] = t0, t1
        if spec is not None:
            known = {a.name for a in spec.args}
            args = {k: v for k, v in args.items() if k in known}
        if args == call.args:
            return RepairOutcome(False, f"no argument amendment for: {failure.message}")
        return RepairOutcome(True, f"amended arguments {sorted(k for k in args if args.get(k) != call.args.get(k))}", ToolCall(call.tool_name, args))

    def _fix_environment(self, call, failure, attempt, spec):
        module = failure.details.get("module")
        if not module:
            return RepairOutcome(False, f"environment failure without a repairable cause: {failure.message}")
        if module not in self.allowlist:
            return RepairOutcome(False, f"module {module} is not on the install allowlist")
        if self.installer is None:
            return RepairOutcome(False, f"no installer configured for {module}")
        if not self.installer(module):
            return RepairOutcome(False, f"installing {module} failed")
        return RepairOutcome(True, f"installed {module}", call)

    def _fix_upstream(self, call, failure, attempt, spec):
        delay = self.backoff_base * 2**attempt
        self.sleep(delay)
        return RepairOutcome(True, f"retrying after {delay:g}s", call)

    def _fix_not_found(self, call, failure, attempt, spec):
        return RepairOutcome(False, failure.message)


# -------------------------------------------------------------------- trace

@dataclass
class Trace:
    events: list[dict] = field(default_factory=list)

    def add(self, event: str, node: TaskNode | None = None, **data):
        rec = {"seq": len(self.events), "event": event}
        if node is not None:
            rec["node"] = node.id
        rec.update(data)
        self.events.append(rec)

    def of(self, event: str) -> list[dict]:
        return [e for e in self.events if e["event"] == event]

    def dumps(self, tree: TaskNode | None = None) -> str:
        doc = {"events": self.events, "tree": to_records(tree) if tree is not None else []}
        return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False)


# ------------------------------------------------------------------- engine

class DnCEngine:
    def __init__(
        self,
        chat,
        tools: ToolRegistry | None = None,
        config: EngineConfig = EngineConfig(),
        rescuer: Rescuer | None = None,
        trace: Trace | None = None,
    ):
        self.chat = chat
        self.tools = tools or ToolRegistry()
        self.config = config
        self.rescuer = rescuer or Rescuer()
        self.trace = trace if trace is not None else Trace()

    def _ask(self, req, role: str) -> str:
        try:
            return self.chat.chat(req)
        except ProviderError as exc:
            raise EngineError(f"{role} provider failed: {exc}", {"error": type(exc).__name__, "message": str(exc)}) from exc

    def conqueror(self, task: TaskNode, context: RetrievalContext) -> ConquerorVerdict:
        catalog = [s.to_dict() for s in context.tool_catalog]
        req = conqueror_request(
            task.description,
            context.query or task.description,
            context.hits,
            context.notes,
            catalog,
            enforce=self.config.verdict_parser == "strict",
            options=context.options,
        )
        return parse_verdict(self._ask(req, "conqueror"), self.config.verdict_parser)

    def divider(self, task: TaskNode, reason: str, context: RetrievalContext) -> DividePlan:
        if not reason:
            raise InvalidInput("divider needs a reason")
        req = divider_request(task.description, reason, context.query or task.description, context.hits, context.notes, context.options)
        return parse_plan(self._ask(req, "divider"))

    def rescuer_repair(self, call: ToolCall, failure: ToolFailure, attempt: int) -> RepairOutcome:
        if attempt >= self.config.max_rescue_attempts:
            return RepairOutcome(False, f"gave up after {attempt} repair attempts")
        return self.rescuer.repair(call, failure, attempt, self.tools.spec(call.tool_name))

    def dnc(self, task: TaskNode, context: RetrievalContext) -> TaskResult | str:
        task.start()
        try:
            verdict = self.conqueror(task, context)
        except EngineError as exc:
            return self._fail(task, str(exc), "error")
        self.trace.add("conquered", task, verdict=verdict.kind)

        if verdict.kind == "direct_answer":
            result = TaskResult("answer", verdict.answer)
            update_result(task, result)
            return result

        if verdict.kind == "requires_tool":
            return self._run_tool(task, verdict.tool, context)

        try:
            plan = self.divider(task, verdict.reason, context)
        except EngineError as exc:
            return self._fail(task, str(exc), "error")
        if not plan.success:
            return self._fail(task, plan.reason, "divide_failed")
        subtasks = add_subtasks(task, list(plan.tasks))
        self.trace.add("divided", task, children=[s.id for s in subtasks])
        notes = list(context.notes)
        for i, sub in enumerate(subtasks):
            if sub.depth > self.config.max_depth:
                for rest in subtasks[i:]:
                    rest.mark_too_deep(DEPTH_EXCEEDED)
                self.trace.add("depth_exceeded", sub, max_depth=self.config.max_depth)
                task.fail(DEPTH_EXCEEDED)
                return DEPTH_EXCEEDED
            self.dnc(sub, replace(context, notes=tuple(notes)))
            notes.append((sub.description, _outcome(sub)))
        return self._close_divided(task)

    def _fail(self, task: TaskNode, reason: str, event: str) -> str:
        task.fail(reason)
        self.trace.add(event, task, reason=reason)
        return reason

    def _close_divided(self, task: TaskNode) -> TaskResult | str:
        if not any(c.status is TaskStatus.SUCCESS for c in task.children):
            task.fail("no subtask succeeded")
            return "no subtask succeeded"
        content = "\n".join(f"{c.description}: {_outcome(c)}" for c in task.children)
        result = TaskResult("answer", content)
        update_result(task, result)
        return result

    def _run_tool(self, task: TaskNode, call: ToolCall, context: RetrievalContext) -> TaskResult | str:
        spec = self.tools.spec(call.tool_name)
        if spec is not None and context.video_id and "video_id" not in call.args and any(a.name == "video_id" for a in spec.args):
            call = ToolCall(call.tool_name, {**call.args, "video_id": context.video_id})
        result = self.tools.invoke(call)
        self.trace.add("tool_invoked", task, call=call.to_dict(), ok=result.ok)
        attempt = 0
        while not result.ok:
            outcome = self.rescuer_repair(call, result.failure, attempt)
            attempt += 1
            self.trace.add("rescued", task, category=result.failure.category, repaired=outcome.repaired, note=outcome.remedy_note)
            if not outcome.repaired:
                return self._fail(task, f"{result.failure.category}: {result.failure.message} ({outcome.remedy_note})", "tool_failed")
            call = outcome.retry_payload
            result = self.tools.invoke(call)
            self.trace.add("tool_invoked", task, call=call.to_dict(), ok=result.ok)
        if not result.content and not result.artifacts:
            return self._fail(task, f"{call.tool_name} returned nothing", "tool_failed")
        out = TaskResult("tool_output", result.content, list(result.artifacts))
        update_result(task, out)
        return out

    def conclusive_synthesis(self, tree: TaskNode, query: str, options: dict | None = None) -> str:
        if tree is None or tree.status is TaskStatus.PENDING:
            raise InvalidInput("synthesis needs an executed task tree")
        leaves = tree.leaves()
        if any(not n.status.terminal for n in leaves):
            raise InvalidInput("synthesis needs every leaf to be finished")
        text = self._ask(synthesis_request(query, leaves, options), "synthesis")
        self.trace.add("synthesized", tree, leaves=[n.id for n in leaves])
        return text


def _outcome(node: TaskNode) -> str:
    if node.status is TaskStatus.SUCCESS:
        return node.result.content
    return f"Failed: {node.failure_reason}"
