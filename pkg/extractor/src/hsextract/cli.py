"""Entry point: serve a protocol session on stdio, or dump a replay trace.

Exactly one of --model or --mock selects the backbone. --dump switches from
serving to writing a trace at --out.
"""
from __future__ import annotations

import argparse
import contextlib
import sys

from .dump import dump_path
from .mockmodel import MockBackbone
from .session import serve_path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsextract",
        description="Hidden-state context server for a frozen causal LM",
    )
    parser.add_argument("--tasks", required=True, help="JSONL task file")
    parser.add_argument("--model", default=None, help="model id or local path")
    parser.add_argument("--mock", action="store_true", help="deterministic stub backbone")
    parser.add_argument("--mock-d", type=int, default=8, dest="mock_d")
    parser.add_argument("--mock-seed", type=int, default=0, dest="mock_seed")
    parser.add_argument("--dump", action="store_true", help="write a trace instead of serving")
    parser.add_argument("--out", default=None, help="trace output path for --dump")
    parser.add_argument("--extra-steps", type=int, default=3, dest="extra_steps")
    parser.add_argument("--per-arm-cap", type=int, default=3, dest="per_arm_cap")
    parser.add_argument(
        "--max-thought-tokens", type=int, default=24, dest="max_thought_tokens"
    )
    return parser


def make_backbone(args):
    if args.mock == (args.model is not None):
        raise SystemExit("exactly one of --mock or --model is required")
    if args.mock:
        return MockBackbone(dimension=args.mock_d, seed=args.mock_seed)
    from .backbone import FrozenLMBackbone

    return FrozenLMBackbone(args.model, max_thought_tokens=args.max_thought_tokens)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    # anything a model loader prints must not contaminate the protocol stream
    with contextlib.redirect_stdout(sys.stderr):
        backbone = make_backbone(args)
    if args.dump:
        if not args.out:
            print("--dump needs --out", file=sys.stderr)
            return 2
        recorded = dump_path(
            backbone,
            args.tasks,
            args.out,
            extra_steps=args.extra_steps,
            per_arm_cap=args.per_arm_cap,
        )
        print(f"recorded {recorded} tasks to {args.out}", file=sys.stderr)
        return 0
    serve_path(backbone, args.tasks)
    return 0


if __name__ == "__main__":
    sys.exit(main())
