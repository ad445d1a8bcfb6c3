"""Question answering over long videos with segment captions, retrieval and recursive task decomposition."""

from .engine import DEPTH_EXCEEDED, DnCEngine, EngineConfig, Rescuer, RetrievalContext, Trace
from .evaluation import iou, run_benchmark, score_choice, score_localization
from .ingest import ingest
from .query import Query, QueryConfig, QueryEngine, extract_time_filter
from .scenes import DetectionParams, detect_scenes, sample_frames
from .store import KnowledgeEntry, KnowledgeStore, TimeFilter
from .tasktree import TaskNode, TaskResult, TaskStatus, init_tree
from .tools import ToolCall, ToolRegistry, ToolResult, ToolSpec

__version__ = "0.1.0"

__all__ = [
    "DEPTH_EXCEEDED", "DetectionParams", "DnCEngine", "EngineConfig", "KnowledgeEntry", "KnowledgeStore",
    "Query", "QueryConfig", "QueryEngine", "Rescuer", "RetrievalContext", "TaskNode", "TaskResult",
    "TaskStatus", "TimeFilter", "ToolCall", "ToolRegistry", "ToolResult", "ToolSpec", "Trace",
    "detect_scenes", "extract_time_filter", "ingest", "init_tree", "iou", "run_benchmark",
    "sample_frames", "score_choice", "score_localization",
]
