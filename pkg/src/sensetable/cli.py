"""Command-line entry points: serve the engine or replay a trace offline."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import EngineConfig
from .session import replay_session


def _load_config(path: str | None) -> EngineConfig:
    config = EngineConfig.from_file(path) if path else EngineConfig()
    return config.with_env()


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    config = _load_config(args.config)
    if args.store:
        config = replace(config, store_dir=args.store)
    uvicorn.run(create_app(config), host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    if args.threshold is not None:
        config = replace(config, similarity_threshold=args.threshold)
    if args.visible is not None:
        config = replace(config, visible_count=args.visible)
    session = replay_session(args.trace, config, session_id=args.session_id)
    exported = session.export(args.format)
    out = Path(args.export)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(exported, encoding="utf-8")
    snapshot = session.state_snapshot()
    print(
        f"replayed {session.revision} records: "
        f"{len(snapshot['options'])} options, "
        f"{len(snapshot['groups'])} criterion groups, "
        f"{len(snapshot['snippets'])} snippets -> {out}"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="engine", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP engine")
    serve.add_argument("--port", type=int, default=8400)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--config", default=None, help="path to a JSON config file")
    serve.add_argument("--store", default=None, help="directory for persisted session logs")
    serve.set_defaults(func=_cmd_serve)

    replay = sub.add_parser("replay", help="replay a trace file and export the table")
    replay.add_argument("--trace", required=True, help="newline-delimited trace file")
    replay.add_argument("--export", required=True, help="output path")
    replay.add_argument("--format", choices=("json", "csv", "md"), default="json")
    replay.add_argument("--threshold", type=float, default=None, help="grouping similarity threshold")
    replay.add_argument("--visible", type=int, default=None, help="visible criteria count")
    replay.add_argument("--config", default=None)
    replay.add_argument("--session-id", default="replay")
    replay.set_defaults(func=_cmd_replay)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
