"""Tool registry, argument validation and the built-in tools.

``ToolRegistry.invoke`` never raises: every outcome is either an ok
:class:`ToolResult` or one carrying a categorised :class:`ToolFailure`
(``bad_args``, ``environment``, ``upstream``, ``not_found``) that the
rescuer can act on.
"""

from __future__ import annotations

import json
import logging
import os
import re
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .errors import InvalidInput, ProviderError, RegistrationError, VQAgentError
from .prompts import rewind_request
from .timecode import format_timestamp, to_seconds

log = logging.getLogger(__name__)

FAILURE_CATEGORIES = ("bad_args", "environment", "upstream", "not_found")
ARG_TYPES = ("string", "number", "integer", "timestamp", "identifier")


@dataclass(frozen=True)
class ArgSpec:
    name: str
    type: str
    required: bool = True
    constraints: dict = field(default_factory=dict)  # min / max / exclusive_min / free_text

    def __post_init__(self):
        if self.type not in ARG_TYPES:
            raise RegistrationError(f"argument {self.name!r}: unknown type {self.type!r}")
        if self.required and not self.constraints:
            raise RegistrationError(f"required argument {self.name!r} needs a constraint or free_text marker")


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    args: tuple[ArgSpec, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "args": [
                {"name": a.name, "type": a.type, "required": a.required, "constraints": dict(a.constraints)}
                for a in self.args
            ],
        }


@dataclass
class ToolCall:
    tool_name: str
    args: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.tool_name, "args": dict(self.args)}


@dataclass
class ToolFailure:
    category: str
    message: str
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.category not in FAILURE_CATEGORIES:
            raise InvalidInput(f"unknown failure category {self.category!r}")


@dataclass
class ToolResult:
    ok: bool
    content: str = ""
    artifacts: list[dict] = field(default_factory=list)
    failure: ToolFailure | None = None

    def __post_init__(self):
        if self.ok == (self.failure is not None):
            raise InvalidInput("a tool result is either ok or carries a failure")

    @classmethod
    def fail(cls, category: str, message: str, **details) -> "ToolResult":
        return cls(False, failure=ToolFailure(category, message, details))


class ToolError(VQAgentError):
    """Raised by handlers to report a categorised failure."""

    def __init__(self, category: str, message: str, **details):
        super().__init__(message)
        self.category = category
        self.details = details


def _check_value(arg: ArgSpec, value) -> str | None:
    c = arg.constraints
    if arg.type in ("string", "identifier"):
        if not isinstance(value, str) or (arg.type == "identifier" and not value.strip()):
            return f"{arg.name} must be a {arg.type}"
        if not value.strip() and arg.required:
            return f"{arg.name} must be non-empty"
        return None
    if arg.type == "timestamp":
        try:
            number = to_seconds(value)
        except InvalidInput as exc:
            return f"{arg.name}: {exc}"
    elif arg.type == "integer":
        if isinstance(value, bool) or not isinstance(value, int):
            return f"{arg.name} must be an integer"
        number = value
    else:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return f"{arg.name} must be a number"
        number = float(value)
    if "min" in c and number < c["min"]:
        return f"{arg.name} must be >= {c['min']}"
    if "exclusive_min" in c and number <= c["exclusive_min"]:
        return f"{arg.name} must be > {c['exclusive_min']}"
    if "max" in c and number > c["max"]:
        return f"{arg.name} must be <= {c['max']}"
    return None


def validate_args(spec: ToolSpec, args: dict) -> list[str]:
    problems = []
    known = {a.name for a in spec.args}
    for a in spec.args:
        if a.name not in args or args[a.name] is None:
            if a.required:
                problems.append(f"missing required argument {a.name!r}")
            continue
        msg = _check_value(a, args[a.name])
        if msg:
            problems.append(msg)
    extra = sorted(set(args) - known)
    if extra:
        problems.append(f"unexpected arguments {extra}")
    return problems


Handler = Callable[[dict], "ToolResult | str"]


class ToolRegistry:
    def __init__(self):
        self._tools: dict[str, tuple[ToolSpec, Handler]] = {}
        self._frozen = False

    def register(self, spec: ToolSpec, handler: Handler) -> "ToolRegistry":
        if self._frozen:
            raise RegistrationError("registry is frozen")
        if spec.name in self._tools:
            raise RegistrationError(f"tool {spec.name!r} is already registered")
        self._tools[spec.name] = (spec, handler)
        return self

    def freeze(self) -> "ToolRegistry":
        self._frozen = True
        return self

    def __contains__(self, name) -> bool:
        return name in self._tools

    def spec(self, name: str) -> ToolSpec | None:
        entry = self._tools.get(name)
        return entry[0] if entry else None

    def catalog(self) -> list[ToolSpec]:
        return [spec for spec, _ in self._tools.values()]

    def catalog_document(self) -> list[dict]:
        return [spec.to_dict() for spec in self.catalog()]

    def invoke(self, call: ToolCall) -> ToolResult:
        entry = self._tools.get(call.tool_name)
        if entry is None:
            return ToolResult.fail("not_found", f"no tool named {call.tool_name!r}")
        spec, handler = entry
        problems = validate_args(spec, call.args)
        if problems:
            return ToolResult.fail("bad_args", "; ".join(problems), problems=problems)
        try:
            out = handler(dict(call.args))
        except ToolError as exc:
            return ToolResult.fail(exc.category, str(exc), **exc.details)
        except InvalidInput as exc:
            return ToolResult.fail("bad_args", str(exc))
        except ProviderError as exc:
            return ToolResult.fail("upstream", str(exc))
        except ImportError as exc:
            return ToolResult.fail("environment", f"module {exc.name or '?'} not found", module=exc.name)
        except (TimeoutError, ConnectionError) as exc:
            return ToolResult.fail("upstream", str(exc))
        except Exception as exc:  # the boundary must not leak exceptions into the engine
            log.exception("tool %s crashed", call.tool_name)
            return ToolResult.fail("environment", f"{type(exc).__name__}: {exc}")
        if isinstance(out, ToolResult):
            return out
        return ToolResult(True, str(out))


# --------------------------------------------------------------- rewinder

@dataclass(frozen=True)
class RewindRequest:
    video_id: str
    t0: float
    t1: float
    instruction: str
    granularity: float = 1.0

    def validate(self, duration: float) -> "RewindRequest":
        if not 0 <= self.t0 < self.t1 <= duration:
            raise ToolError(
                "bad_args",
                f"rewind span [{self.t0}, {self.t1}] must satisfy 0 <= t0 < t1 <= {duration}",
                video_id=self.video_id,
            )
        if self.granularity <= 0:
            raise ToolError("bad_args", "granularity must be positive")
        return self


REWINDER_SPEC = ToolSpec(
    "rewinder",
    "Re-watch the original video between t0 and t1 at the given frames-per-second and answer the "
    "instruction from those frames and the speech in that span. Use it for details the segment "
    "summaries may have missed.",
    (
        ArgSpec("video_id", "identifier", constraints={"free_text": True}),
        ArgSpec("t0", "timestamp", constraints={"min": 0}),
        ArgSpec("t1", "timestamp", constraints={"min": 0}),
        ArgSpec("instruction", "string", constraints={"free_text": True}),
        ArgSpec("granularity", "number", required=False, constraints={"exclusive_min": 0}),
    ),
)


def rewind(req: RewindRequest, library, mllm, detector=None) -> ToolResult:
    from .ingest import annotate_frames

    source = library.get(req.video_id)
    req.validate(source.duration)
    frames = library.frames_between(req.video_id, req.t0, req.t1, req.granularity)
    if not frames:
        raise ToolError("environment", f"no source frames for {req.video_id} in [{req.t0}, {req.t1}]")
    frames = annotate_frames(frames, detector)
    speech = [u for u in source.transcript if u.overlaps(req.t0, req.t1)]
    text = mllm.chat(rewind_request(req.instruction, frames, speech))
    artifacts = [{"name": "frame", "ref": f.ref, "timestamp": format_timestamp(f.timestamp)} for f in frames]
    return ToolResult(True, text, artifacts)


def rewinder_handler(library, mllm, detector=None, default_granularity: float = 1.0) -> Handler:
    def handle(args):
        req = RewindRequest(
            args["video_id"],
            to_seconds(args["t0"]),
            to_seconds(args["t1"]),
            args["instruction"],
            float(args.get("granularity") or default_granularity),
        )
        return rewind(req, library, mllm, detector)

    return handle


# ------------------------------------------------------------- other tools

WEB_SEARCH_SPEC = ToolSpec(
    "web_search",
    "Search the internet and return ranked text snippets.",
    (ArgSpec("query", "string", constraints={"free_text": True}),),
)


def web_search_handler(search) -> Handler:
    def handle(args):
        try:
            hits = search.search(args["query"])
        except ProviderError as exc:
            raise ToolError("upstream", str(exc)) from exc
        if not hits:
            return ToolResult(True, "No results.")
        return ToolResult(True, "\n".join(f"{i}. {h}" for i, h in enumerate(hits, 1)))

    return handle


FACE_SPEC = ToolSpec(
    "face_recognition",
    "Detect and identify faces in one frame (reference '<video_id>@<seconds>').",
    (ArgSpec("frame_ref", "identifier", constraints={"free_text": True}),),
)


def face_recognition_handler(library, detector) -> Handler:
    def handle(args):
        try:
            frame = library.frame(args["frame_ref"])
        except InvalidInput as exc:
            raise ToolError("bad_args", str(exc)) from None
        found = detector.detect(frame)
        faces = [{"box": list(a.box), "label": a.label, "confidence": a.confidence} for a in found]
        return ToolResult(True, json.dumps(faces, sort_keys=True), [{"name": "frame", "ref": frame.ref}])

    return handle


FILE_SPEC = ToolSpec(
    "file_reader",
    "Read a text file next to the ingest manifests and summarise it (line count and leading lines).",
    (
        ArgSpec("path", "string", constraints={"free_text": True}),
        ArgSpec("max_lines", "integer", required=False, constraints={"min": 1}),
    ),
)


def file_reader_handler(root: str | os.PathLike) -> Handler:
    root = Path(root).resolve()

    def handle(args):
        target = (root / args["path"]).resolve()
        if root not in target.parents and target != root:
            raise ToolError("bad_args", f"{args['path']!r} is outside {root}")
        if not target.is_file():
            raise ToolError("bad_args", f"no file {args['path']!r}")
        lines = target.read_text(encoding="utf-8", errors="replace").splitlines()
        keep = lines[: int(args.get("max_lines") or 20)]
        return f"{target.name}: {len(lines)} lines\n" + "\n".join(keep)

    return handle


CODE_SPEC = ToolSpec(
    "code_runner",
    "Run a short Python program in a subprocess and return its standard output.",
    (ArgSpec("code", "string", constraints={"free_text": True}),),
)

_MISSING_RE = re.compile(r"No module named '([\w.]+)'")


class CodeRunner:
    """Subprocess sandbox: isolated interpreter, time limit, extra import path."""

    def __init__(self, python: str = sys.executable, timeout: float = 10.0, extra_path: str | None = None):
        self.python = python
        self.timeout = timeout
        self.extra_path = extra_path

    def __call__(self, args):
        env = {"PATH": os.environ.get("PATH", "")}
        if self.extra_path:
            env["PYTHONPATH"] = self.extra_path
        try:
            proc = subprocess.run(
                [self.python, "-c", args["code"]],
                capture_output=True,
                text=True,
                timeout=self.timeout,
                env=env,
            )
        except subprocess.TimeoutExpired:
            raise ToolError("environment", f"code exceeded {self.timeout}s") from None
        if proc.returncode != 0:
            m = _MISSING_RE.search(proc.stderr)
            if m:
                raise ToolError("environment", f"module {m.group(1)} not found", module=m.group(1).split(".")[0])
            raise ToolError("bad_args", proc.stderr.strip().splitlines()[-1] if proc.stderr.strip() else "non-zero exit")
        return proc.stdout.strip() or "(no output)"


def default_registry(
    library=None,
    mllm=None,
    detector=None,
    search=None,
    file_root=None,
    code_runner: CodeRunner | None = None,
    granularity: float = 1.0,
) -> ToolRegistry:
    """Registry with every built-in tool whose dependencies were supplied."""
    reg = ToolRegistry()
    if library is not None and mllm is not None:
        reg.register(REWINDER_SPEC, rewinder_handler(library, mllm, detector, granularity))
    if search is not None:
        reg.register(WEB_SEARCH_SPEC, web_search_handler(search))
    if library is not None and detector is not None:
        reg.register(FACE_SPEC, face_recognition_handler(library, detector))
    if file_root is not None:
        reg.register(FILE_SPEC, file_reader_handler(file_root))
    if code_runner is not None:
        reg.register(CODE_SPEC, code_runner)
    return reg.freeze()
