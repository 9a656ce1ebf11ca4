"""Command-line entry point: eval runs, REPL, server, transcript replay.

Exit codes: 0 success, 1 when any run hit a backend transport error,
2 for configuration and usage errors.
"""

import argparse
import json
import shutil
import socket
import sys
from pathlib import Path

from . import evalsuite
from .agent import TERMINATION_BACKEND_ERROR, AgentConfig, AgentEvent, Session
from .backends import BACKEND_NAMES, BackendError, make_backend
from .prompts import VARIANT_ALIASES, VARIANTS
from .scene import SceneError, SceneGraph, load_fixture

VARIANT_CHOICES = sorted(set(VARIANTS) | set(VARIANT_ALIASES))


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = 2):
        super().__init__(message)
        self.exit_code = exit_code


# ---------------------------------------------------------------------------
# shared plumbing


def resolve_config(args) -> AgentConfig:
    """Merge config file and flags; flags win, defaults fill the rest."""
    data: dict = {}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            data.update(json.loads(Path(config_path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config file {config_path}: {exc}")
    if getattr(args, "variant", None):
        data["variant"] = args.variant
    if getattr(args, "backend", None):
        data["backend"] = args.backend
    try:
        return AgentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid configuration: {exc}")


def build_backend(config: AgentConfig, args):
    kwargs = {}
    if getattr(args, "script", None):
        kwargs["script_path"] = args.script
    if getattr(args, "base_url", None):
        kwargs["base_url"] = args.base_url
    try:
        return make_backend(config.backend, **kwargs)
    except (BackendError, ValueError, OSError) as exc:
        raise CliError(str(exc))


def render_event(event: AgentEvent) -> str:
    if event.kind == "tool":
        call = event.call or {}
        arguments = json.dumps(call.get("arguments", {}), sort_keys=True)
        return f"[tool] {call.get('name')}({arguments}) -> {event.result}"
    if event.kind == "speak":
        return f"[speak] {event.result}"
    if event.kind == "assistant_text":
        return f"[assistant] {event.text}"
    if event.kind == "stop":
        return "[stop] interaction complete"
    if event.kind == "round_limit":
        return "[round_limit] gave up after the configured number of rounds"
    if event.kind == "backend_error":
        return f"[backend_error] {event.text}"
    return f"[{event.kind}]"


def scene_dump(scene: SceneGraph) -> str:
    doc = scene.to_dict()
    lines = []
    for obj in sorted(doc["objects"], key=lambda entry: entry["id"]):
        held = f" held_by={obj['held_by']}" if obj["held_by"] else ""
        fill = f" fill={obj['fill_contents']}" if obj["fill_contents"] else ""
        center = ", ".join(f"{v:.3f}" for v in obj["center"])
        lines.append(f"object {obj['id']} at ({center}){fill}{held}")
    for person in sorted(doc["persons"], key=lambda entry: entry["id"]):
        holds = ", ".join(person["holds"]) or "nothing"
        lines.append(f"person {person['id']} holds {holds}")
    lines.append(f"robot {doc['robot']['id']} holds "
                 f"{', '.join(doc['robot']['holds']) or 'nothing'}")
    lines.append(f"revision {doc['revision']}")
    return "\n".join(lines)


def scene_diff(before: dict, after: dict) -> list[str]:
    """Per-object changes between two scene dicts, ordered by id."""
    lines = []
    old = {entry["id"]: entry for entry in before["objects"]}
    new = {entry["id"]: entry for entry in after["objects"]}
    for object_id in sorted(old.keys() | new.keys()):
        if object_id not in new:
            lines.append(f"- {object_id}")
        elif object_id not in old:
            lines.append(f"+ {object_id}")
        elif old[object_id] != new[object_id]:
            changes = []
            for key in ("center", "held_by", "fill_contents", "fill_history"):
                if old[object_id][key] != new[object_id][key]:
                    changes.append(
                        f"{key}: {old[object_id][key]!r} -> {new[object_id][key]!r}"
                    )
            lines.append(f"~ {object_id} " + "; ".join(changes))
    return lines


# ---------------------------------------------------------------------------
# eval commands


def prepare_out_dir(args) -> tuple[Path, Path]:
    out = Path(args.out)
    report_path = out / "report.csv"
    transcripts = out / "transcripts"
    if (report_path.exists() or transcripts.exists()) and not args.force:
        raise CliError(
            f"refusing to overwrite existing report in {out}; pass --force"
        )
    if transcripts.exists():
        shutil.rmtree(transcripts)
    out.mkdir(parents=True, exist_ok=True)
    return report_path, transcripts


def run_eval(args, suite, kind: str) -> int:
    if args.repeats < 1:
        raise CliError("--repeats must be at least 1")
    if args.parallelism < 1:
        raise CliError("--parallelism must be at least 1")
    config = resolve_config(args)
    backend = build_backend(config, args)
    report_path, transcripts = prepare_out_dir(args)
    report = evalsuite.run_suite(
        suite,
        config,
        repeats=args.repeats,
        parallelism=args.parallelism,
        backend=backend,
        transcript_dir=transcripts,
    )
    csv_text = evalsuite.emit_report(report, "csv")
    report_path.write_text(csv_text, encoding="utf-8")
    (report_path.parent / "report.json").write_text(
        evalsuite.emit_report(report, "json"), encoding="utf-8"
    )
    counts: dict = {}
    for record in report.records:
        counts[record.verdict.category] = counts.get(record.verdict.category, 0) + 1
    summary = ", ".join(
        f"{category}={counts.get(category, 0)}"
        for category in evalsuite.VERDICT_CATEGORIES
        if counts.get(category)
    )
    print(f"{kind}: {len(report.records)} runs ({summary})")
    print(f"report written to {report_path}")
    if any(r.termination == TERMINATION_BACKEND_ERROR for r in report.records):
        print("at least one run failed with a backend transport error", file=sys.stderr)
        return 1
    return 0


def cmd_eval_isolated(args) -> int:
    return run_eval(args, evalsuite.generate_isolated_suite(), "isolated")


def cmd_eval_situated(args) -> int:
    return run_eval(args, evalsuite.generate_situated_scenario(), "situated")


# ---------------------------------------------------------------------------
# repl


def cmd_repl(args) -> int:
    config = resolve_config(args)
    backend = build_backend(config, args)
    try:
        scene = load_fixture(args.scene)
    except SceneError as exc:
        raise CliError(str(exc))
    session = Session(scene, backend, config)
    print(f"scene {args.scene}, variant {config.variant}, backend {config.backend}")
    print("format: speaker>listener: text   (:scene dumps state, :quit exits)")
    for raw in sys.stdin:
        line = raw.strip()
        if not line:
            continue
        if line == ":quit":
            break
        if line == ":scene":
            print(scene_dump(session.scene))
            continue
        speaker, sep, rest = line.partition(">")
        listener, colon, text = rest.partition(":")
        speaker, listener, text = speaker.strip(), listener.strip(), text.strip()
        if not sep or not colon or not speaker or not listener or not text:
            print("usage: speaker>listener: text   (:scene, :quit)")
            continue
        before = session.scene.to_dict()
        print(f"> {speaker} said to {listener}: {text}")
        session.submit(speaker, listener, text, on_event=lambda e: print(render_event(e)))
        for diff_line in scene_diff(before, session.scene.to_dict()):
            print(diff_line)
    return 0


# ---------------------------------------------------------------------------
# serve


def cmd_serve(args) -> int:
    try:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((args.host, args.port))
        probe.close()
    except OSError as exc:
        raise CliError(f"cannot bind {args.host}:{args.port}: {exc}")
    import uvicorn

    from .server import create_app

    app = create_app(scene_dir=args.scene_dir, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# replay


def cmd_replay(args) -> int:
    try:
        doc = evalsuite.read_transcript(args.transcript)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read transcript {args.transcript}: {exc}")
    try:
        expectation = evalsuite.expected_from_dict(
            json.loads(Path(args.expect).read_text(encoding="utf-8"))
        )
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"cannot read expectation file {args.expect}: {exc}")
    trace, scene_before, scene_after = evalsuite.trace_from_transcript(doc)
    print(f"> {trace.input_utterance}")
    for event in trace.events:
        print(render_event(event))
    verdict = evalsuite.classify(trace, expectation, scene_before, scene_after)
    print(f"verdict: {verdict.category} ({verdict.rationale})")
    return 0


# ---------------------------------------------------------------------------
# parser


def add_agent_flags(parser, include_script=True):
    parser.add_argument("--variant", choices=VARIANT_CHOICES, default=None,
                        help="system prompt variant")
    parser.add_argument("--backend", choices=BACKEND_NAMES, default=None,
                        help="chat backend")
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="JSON file with agent configuration defaults")
    parser.add_argument("--base-url", default=None, dest="base_url",
                        help="chat completions endpoint for the remote backend")
    if include_script:
        parser.add_argument("--script", default=None, metavar="FILE",
                            help="response script for the scripted backend")


def add_eval_flags(parser, default_repeats):
    parser.add_argument("--repeats", type=int, default=default_repeats)
    parser.add_argument("--parallelism", type=int, default=1)
    parser.add_argument("--out", required=True, metavar="DIR",
                        help="directory for report.csv and transcripts")
    parser.add_argument("--force", action="store_true",
                        help="overwrite an existing report directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supportbot",
        description="attentive-support simulation: eval suites, REPL, server, replay",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    isolated = sub.add_parser("eval-isolated", help="run the 300-case isolated suite")
    add_agent_flags(isolated)
    add_eval_flags(isolated, default_repeats=5)
    isolated.set_defaults(func=cmd_eval_isolated)

    situated = sub.add_parser("eval-situated", help="run the five-step situated script")
    add_agent_flags(situated)
    add_eval_flags(situated, default_repeats=20)
    situated.set_defaults(func=cmd_eval_situated)

    repl = sub.add_parser("repl", help="interactive text session")
    repl.add_argument("--scene", default="softdrink")
    add_agent_flags(repl)
    repl.set_defaults(func=cmd_repl)

    serve = sub.add_parser("serve", help="start the HTTP/WebSocket server")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--scene-dir", default=None, dest="scene_dir",
                       help="extra directory of .scene fixtures")
    serve.add_argument("--static", default=None,
                       help="directory of UI assets to serve at /")
    serve.set_defaults(func=cmd_serve)

    replay = sub.add_parser("replay", help="re-render a transcript and re-classify it")
    replay.add_argument("transcript")
    replay.add_argument("--expect", required=True, metavar="FILE",
                        help="JSON expectation to classify against")
    replay.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
