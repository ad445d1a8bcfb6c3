"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .engine import EngineConfig, Rescuer
from .errors import VQAgentError
from .evaluation import AgentAnswerer, FramesSttAnswerer, Video2RagAnswerer, load_dataset, run_benchmark
from .ingest import PillowRenderer, ingest, write_ingest_report
from .providers import HashEmbedder, Providers, build_providers, load_provider_config
from .query import Query, QueryConfig, QueryEngine
from .scenes import DetectionParams, frame_distances
from .store import KnowledgeStore
from .timecode import format_timestamp
from .tools import CodeRunner, ToolRegistry, default_registry
from .video import VideoLibrary

log = logging.getLogger("vqagent")

MODES = ("omagent", "frames_stt", "video2rag")
DEFAULT_STORE = "vqagent_store"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class Workspace:
    """A store directory: the caption store plus the index of ingested sources."""

    root: Path
    store: KnowledgeStore
    library: VideoLibrary
    providers: Providers

    @classmethod
    def open(cls, root, providers_path=None) -> "Workspace":
        root = Path(root)
        config = load_provider_config(providers_path) if providers_path else None
        library = VideoLibrary.from_index(root / "sources.json")
        providers = build_providers(config, library)
        dimension = getattr(providers.embedder, "dimension", HashEmbedder().dimension)
        store = KnowledgeStore.open(root, dimension)
        return cls(root, store, library, providers)

    def save_index(self):
        self.library.save_index(self.root / "sources.json")

    def tools(self) -> ToolRegistry:
        manifests = [self.library.get(v).manifest_path for v in self.library.ids()]
        dirs = [os.path.dirname(m) for m in manifests if m]
        return default_registry(
            self.library,
            self.providers.chat,
            self.providers.detector,
            self.providers.search,
            file_root=os.path.commonpath(dirs) if dirs else None,
            code_runner=CodeRunner(),
        )

    def query_engine(self, config: QueryConfig = QueryConfig()) -> QueryEngine:
        rescuer = Rescuer(durations=self.library.duration)
        return QueryEngine(self.store, self.providers, self.tools(), config, rescuer)


def _cmd_ingest(args, ws: Workspace) -> int:
    source = ws.library.load(args.manifest)
    params = DetectionParams(args.threshold, args.min_seg, args.k)
    renderer = PillowRenderer(args.render_dir) if args.render_dir else None
    report = ingest(source, ws.store, ws.providers, params, renderer, concurrency=args.concurrency)
    ws.save_index()
    if args.report:
        write_ingest_report(report, args.report)
    if args.plot:
        from .plotting import scene_score_plot

        scores = frame_distances(source.frames)
        times = [f.timestamp for f in source.frames[1:]]
        scene_score_plot(times, scores, params.diff_threshold, [s for s, _ in report.spans[1:]], args.plot)
    print(f"{source.video_id}\t{len(report.entries)} segments stored\t{len(report.failures)} failed")
    for st in report.statuses:
        flag = "ok" if st.ok else f"FAILED: {st.error}"
        print(f"  {format_timestamp(st.start_ts)}-{format_timestamp(st.end_ts)}\t{flag}")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 2 if report.failures and not report.entries else 0


def _cmd_ask(args, ws: Workspace) -> int:
    if args.video and args.video not in ws.library:
        raise UsageError(f"video {args.video!r} has not been ingested")
    config = QueryConfig(k=args.k, engine=EngineConfig(max_depth=args.max_depth))
    answer = ws.query_engine(config).answer(Query(args.q, None if args.all_videos else args.video))
    if args.trace:
        Path(args.trace).write_text(answer.trace_json())
    print(answer.text)
    if not answer.answered:
        print("(unanswered: the task tree did not complete)", file=sys.stderr)
    return 0


def _cmd_store(args, ws: Workspace) -> int:
    entries = ws.store.entries(getattr(args, "video", None))
    if args.store_cmd == "stats":
        by_video: dict[str, int] = {}
        for e in entries:
            by_video[e.video_id] = by_video.get(e.video_id, 0) + 1
        print(json.dumps({"dimension": ws.store.dimension, "entries": len(entries), "videos": by_video}, indent=2, sort_keys=True))
    else:
        for e in entries:
            print(f"### {e.entry_id}  {format_timestamp(e.start_ts)}-{format_timestamp(e.end_ts)}")
            print(e.caption_text)
    return 0


def _cmd_tools(args, ws: Workspace) -> int:
    print(json.dumps(ws.tools().catalog_document(), indent=2))
    return 0


def _cmd_eval(args, ws: Workspace) -> int:
    questions = load_dataset(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    missing = sorted({q.video_id for q in questions} - set(ws.library.ids()))
    if missing:
        raise UsageError(f"dataset references videos that are not ingested: {missing}")
    reports = []
    for mode in args.mode:
        if mode == "omagent":
            answerer = AgentAnswerer(ws.query_engine(QueryConfig(k=args.k)))
        elif mode == "frames_stt":
            answerer = FramesSttAnswerer(ws.library, ws.providers.chat, detector=ws.providers.detector)
        else:
            answerer = Video2RagAnswerer(ws.store, ws.providers.embedder, ws.providers.chat, k=args.k)
        report = run_benchmark(questions, answerer, ws.library, mode, concurrency=args.concurrency)
        report.write(out)
        reports.append(report)
    with open(out / "summary.tsv", "w", encoding="utf-8") as fh:
        fh.write("mode\tgroup\tkey\tn\tcorrect\taccuracy\n")
        for r in reports:
            fh.write(f"{r.mode}\ttotal\tall\t{r.total['n']}\t{r.total['correct']}\t{r.total['accuracy']:.4f}\n")
            for group in ("category", "video_type"):
                for key, g in getattr(r, f"by_{group}").items():
                    fh.write(f"{r.mode}\t{group}\t{key}\t{g['n']}\t{g['correct']}\t{g['accuracy']:.4f}\n")
    if questions:
        from .plotting import accuracy_chart

        accuracy_chart(reports, "category", out / "accuracy_by_category.png")
        accuracy_chart(reports, "video_type", out / "accuracy_by_video_type.png")
    print((out / "summary.tsv").read_text(), end="")
    if not questions:
        print("dataset is empty; nothing was scored", file=sys.stderr)
        return 1
    return 0


def _cmd_demo(args, ws) -> int:
    from .demo import write_fixtures

    for name, path in write_fixtures(args.out).items():
        print(f"{name}\t{path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vqagent", description="Question answering over long videos.")
    p.add_argument("--store", default=os.environ.get("VQAGENT_STORE", DEFAULT_STORE), help="store directory")
    p.add_argument("--providers", help="provider config (JSON)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="segment, caption and store one video")
    s.add_argument("--manifest", required=True)
    s.add_argument("--threshold", type=float, default=0.3)
    s.add_argument("--min-seg", type=float, default=2.0)
    s.add_argument("--k", type=int, default=10, help="frames sampled per segment")
    s.add_argument("--concurrency", type=int, default=4)
    s.add_argument("--render-dir", help="write frames with drawn boxes here")
    s.add_argument("--report", help="write the per-segment report (JSON)")
    s.add_argument("--plot", help="write a PNG of change scores and cuts")

    s = sub.add_parser("ask", help="answer one question")
    s.add_argument("--video")
    s.add_argument("--q", required=True)
    s.add_argument("--trace")
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--max-depth", type=int, default=4)
    s.add_argument("--global", dest="all_videos", action="store_true", help="search every ingested video")

    s = sub.add_parser("store", help="inspect the caption store")
    ss = s.add_subparsers(dest="store_cmd", required=True, parser_class=_Parser)
    ss.add_parser("stats")
    d = ss.add_parser("dump")
    d.add_argument("--video")

    s = sub.add_parser("tools", help="tool catalog")
    ts = s.add_subparsers(dest="tools_cmd", required=True, parser_class=_Parser)
    ts.add_parser("list")

    s = sub.add_parser("eval", help="run a question set and write reports")
    s.add_argument("--dataset", required=True)
    s.add_argument("--mode", nargs="+", choices=MODES, default=["omagent"])
    s.add_argument("--out", required=True, help="report directory")
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--concurrency", type=int, default=1)

    s = sub.add_parser("demo", help="write the offline fixture world")
    s.add_argument("--out", required=True)
    return p


COMMANDS = {
    "ingest": _cmd_ingest,
    "ask": _cmd_ask,
    "store": _cmd_store,
    "tools": _cmd_tools,
    "eval": _cmd_eval,
    "demo": _cmd_demo,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        ws = None if args.cmd == "demo" else Workspace.open(args.store, args.providers)
        return COMMANDS[args.cmd](args, ws)
    except UsageError as exc:
        print(f"vqagent: {exc}", file=sys.stderr)
        return 1
    except (VQAgentError, OSError) as exc:
        print(f"vqagent: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
