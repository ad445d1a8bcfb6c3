"""Recursive task tree recording every decomposition path of one query."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

from .errors import InvalidInput, StateTransitionError, VQAgentError


class TaskStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    SUCCESS = "success"
    FAILED = "failed"
    TOO_DEEP = "too_deep"

    @property
    def terminal(self) -> bool:
        return self in (TaskStatus.SUCCESS, TaskStatus.FAILED, TaskStatus.TOO_DEEP)


_ALLOWED = {
    TaskStatus.PENDING: {TaskStatus.RUNNING, TaskStatus.TOO_DEEP},
    TaskStatus.RUNNING: {TaskStatus.SUCCESS, TaskStatus.FAILED},
}


@dataclass
class TaskResult:
    kind: str  # "answer" | "tool_output"
    content: str
    artifacts: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("answer", "tool_output"):
            raise InvalidInput(f"unknown result kind {self.kind!r}")
        if self.kind == "answer" and not self.content:
            raise InvalidInput("an answer result needs non-empty content")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "content": self.content, "artifacts": list(self.artifacts)}

    @classmethod
    def from_dict(cls, data: dict) -> "TaskResult":
        return cls(data["kind"], data["content"], list(data.get("artifacts") or []))


class _Registry:
    """Per-tree id allocator; ids are monotonically increasing integers."""

    def __init__(self):
        self.next_id = 0
        self.nodes: dict[int, TaskNode] = {}

    def allocate(self) -> int:
        nid = self.next_id
        self.next_id += 1
        return nid

    def add(self, node: "TaskNode"):
        if node.id in self.nodes:
            raise VQAgentError(f"duplicate task id {node.id}")
        self.nodes[node.id] = node


@dataclass(eq=False)
class TaskNode:
    id: int
    description: str
    depth: int = 0
    status: TaskStatus = TaskStatus.PENDING
    children: list["TaskNode"] = field(default_factory=list)
    result: TaskResult | None = None
    failure_reason: str | None = None
    parent: "TaskNode | None" = field(default=None, repr=False)
    _registry: _Registry = field(default_factory=_Registry, repr=False)

    @property
    def root(self) -> "TaskNode":
        node = self
        while node.parent is not None:
            node = node.parent
        return node

    def walk(self) -> Iterator["TaskNode"]:
        """Pre-order traversal."""
        yield self
        for child in self.children:
            yield from child.walk()

    def leaves(self) -> list["TaskNode"]:
        return [n for n in self.walk() if not n.children]

    def size(self) -> int:
        return sum(1 for _ in self.walk())

    def _move(self, target: TaskStatus):
        if target not in _ALLOWED.get(self.status, set()):
            raise StateTransitionError(
                f"task {self.id}: cannot move from {self.status.value} to {target.value}"
            )
        self.status = target

    def start(self) -> "TaskNode":
        self._move(TaskStatus.RUNNING)
        return self

    def fail(self, reason: str) -> "TaskNode":
        self._move(TaskStatus.FAILED)
        self.failure_reason = reason
        return self

    def mark_too_deep(self, reason: str = "Task tree depth exceeded") -> "TaskNode":
        if self.children:
            raise StateTransitionError(f"task {self.id} already has children")
        self._move(TaskStatus.TOO_DEEP)
        self.failure_reason = reason
        return self


def init_tree(user_task: str) -> TaskNode:
    if not user_task or not user_task.strip():
        raise InvalidInput("task description must be non-empty")
    registry = _Registry()
    root = TaskNode(id=registry.allocate(), description=user_task, _registry=registry)
    registry.add(root)
    return root


def add_subtasks(parent: TaskNode, descriptions: list[str]) -> list[TaskNode]:
    if not descriptions:
        raise InvalidInput("at least one subtask description is required")
    if any(not d or not d.strip() for d in descriptions):
        raise InvalidInput("subtask descriptions must be non-empty")
    if parent.status.terminal:
        raise StateTransitionError(f"task {parent.id} is {parent.status.value}; cannot add subtasks")
    registry = parent._registry
    created = []
    for text in descriptions:
        child = TaskNode(
            id=registry.allocate(),
            description=text,
            depth=parent.depth + 1,
            parent=parent,
            _registry=registry,
        )
        registry.add(child)
        parent.children.append(child)
        created.append(child)
    return created


def update_result(node: TaskNode, result: TaskResult) -> TaskNode:
    if node.status is not TaskStatus.RUNNING:
        raise StateTransitionError(
            f"task {node.id}: results can only be stored on running tasks (is {node.status.value})"
        )
    if not result.content and not result.artifacts:
        raise InvalidInput("a successful task needs a non-empty result")
    node._move(TaskStatus.SUCCESS)
    node.result = result
    return node


def depth_of(node: TaskNode) -> int:
    n = 0
    while node.parent is not None:
        node = node.parent
        n += 1
    return n


def to_records(root: TaskNode) -> list[dict]:
    """One flat record per node, pre-order."""
    return [
        {
            "id": n.id,
            "parent_id": n.parent.id if n.parent is not None else None,
            "depth": n.depth,
            "description": n.description,
            "status": n.status.value,
            "result": n.result.to_dict() if n.result is not None else None,
            "failure_reason": n.failure_reason,
        }
        for n in root.walk()
    ]


def from_records(records: list[dict]) -> TaskNode:
    if not records:
        raise InvalidInput("no task records")
    registry = _Registry()
    by_id: dict[int, TaskNode] = {}
    root = None
    for rec in records:
        parent = by_id.get(rec["parent_id"]) if rec["parent_id"] is not None else None
        if rec["parent_id"] is not None and parent is None:
            raise InvalidInput(f"record {rec['id']} references unknown parent {rec['parent_id']}")
        node = TaskNode(
            id=rec["id"],
            description=rec["description"],
            depth=rec["depth"],
            status=TaskStatus(rec["status"]),
            result=TaskResult.from_dict(rec["result"]) if rec.get("result") else None,
            failure_reason=rec.get("failure_reason"),
            parent=parent,
            _registry=registry,
        )
        registry.add(node)
        by_id[node.id] = node
        if parent is None:
            if root is not None:
                raise InvalidInput("more than one root record")
            root = node
        else:
            parent.children.append(node)
    registry.next_id = max(by_id) + 1
    return root


def dumps_tree(root: TaskNode) -> str:
    return json.dumps(to_records(root), indent=2, sort_keys=True, ensure_ascii=False)


def loads_tree(text: str) -> TaskNode:
    return from_records(json.loads(text))
