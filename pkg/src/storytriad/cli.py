"""Command line entry points: ``storytriad serve`` and ``storytriad analyze``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import StorytriadError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="storytriad",
        description="Collaborative storytelling session service and workshop analytics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP session service")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--data-dir", required=True, help="session storage directory")
    serve.add_argument(
        "--scenarios-dir", default=None, help="scenario JSON directory (default: bundled)"
    )
    serve.add_argument(
        "--backend-config", default=None, help="remote backend config JSON (see README)"
    )
    serve.add_argument(
        "--mock", action="store_true", help="use the deterministic in-process backends"
    )

    analyze = sub.add_parser("analyze", help="score and test pre/post workshop CSVs")
    analyze.add_argument("--pre", required=True, help="pre-test CSV file")
    analyze.add_argument("--post", required=True, help="post-test CSV file")
    analyze.add_argument(
        "--out", choices=("json", "md"), default="json", help="report format (stdout)"
    )
    analyze.add_argument("--out-file", default=None, help="write the report here instead")

    return parser


def _cmd_serve(args: argparse.Namespace) -> int:
    from .api import serve
    from .service import ServiceConfig

    config = ServiceConfig(
        data_dir=Path(args.data_dir),
        scenarios_dir=Path(args.scenarios_dir) if args.scenarios_dir else None,
        backend_config=Path(args.backend_config) if args.backend_config else None,
        mock=args.mock,
        port=args.port,
        host=args.host,
    )
    serve(config)
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    from .analytics import analyze_workshop

    report = analyze_workshop(args.pre, args.post)
    rendered = report.to_json() if args.out == "json" else report.to_markdown()
    if args.out_file:
        Path(args.out_file).write_text(rendered, encoding="utf-8")
    else:
        sys.stdout.write(rendered)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        return _cmd_analyze(args)
    except StorytriadError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 2 if args.command == "serve" else 1


if __name__ == "__main__":
    sys.exit(main())
