"""Launcher: adaptir-service --backend lexical --port 8810."""

from __future__ import annotations

import argparse

from .app import build_app
from .scoring import BACKENDS, build_backend


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptir-service", description="HTTP pair-scoring service")
    parser.add_argument("--backend", choices=BACKENDS, default="lexical")
    parser.add_argument("--model", default="", help="checkpoint name or path (cross_encoder only)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8810)
    parser.add_argument("--batch-size", type=int, default=16, help="server-side scoring batch")
    return parser


def main(argv: list[str] | None = None) -> int:
    import uvicorn

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        backend = build_backend(args.backend, args.model, args.batch_size)
    except ValueError as exc:
        parser.error(str(exc))
    uvicorn.run(build_app(backend), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
