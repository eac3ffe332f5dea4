"""Command line interface: cambench synth|eval|robustness|causal|score-serve|report.

Exit codes: 0 success, 2 partial (skips recorded), 1 fatal.
"""
from __future__ import annotations

import argparse
import sys

from . import harness
from .config import load_config
from .errors import CambenchError


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="dotted config override, repeatable")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cambench",
        description="Structure-aware saliency benchmark engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="synthesize a dataset")
    _add_common(p_synth)
    p_synth.add_argument("--n", type=int, default=None)
    p_synth.add_argument("--distort", action="append", default=[],
                         metavar="FAMILY:SEV[:SEED]",
                         help="distortion chain entry, repeatable")

    p_eval = sub.add_parser("eval", help="score saliency maps")
    _add_common(p_eval)
    p_eval.add_argument("--manifest", default=None)
    p_eval.add_argument("--saliency-dir", default=None)
    p_eval.add_argument("--methods", default=None,
                        help="comma-separated method tags")
    p_eval.add_argument("--regime-tag", default=None)

    p_rb = sub.add_parser("robustness", help="severity sweep aggregation")
    _add_common(p_rb)
    p_rb.add_argument("--manifest", default=None)
    p_rb.add_argument("--saliency-root", default=None)
    p_rb.add_argument("--methods", default=None)

    p_causal = sub.add_parser("causal", help="targeted occlusion protocol")
    _add_common(p_causal)
    p_causal.add_argument("--manifest", default=None)
    p_causal.add_argument("--saliency-dir", default=None)
    p_causal.add_argument("--method", default=None)
    p_causal.add_argument("--scorer", choices=["builtin", "external"],
                          default=None)
    p_causal.add_argument("--scorer-command", default=None,
                          help="external scorer argv, space separated")

    p_serve = sub.add_parser("score-serve",
                             help="serve the built-in scorer over stdio")
    _add_common(p_serve)

    p_report = sub.add_parser("report", help="render a markdown report")
    _add_common(p_report)
    return parser


def _overrides_from_args(args: argparse.Namespace) -> list[str]:
    out = list(args.overrides)

    def push(key: str, value) -> None:
        if value is not None:
            if isinstance(value, str):
                out.append(f"{key}={value}")
            else:
                import json
                out.append(f"{key}={json.dumps(value)}")

    push("out_dir", args.out)
    push("seed", args.seed)
    push("workers", args.workers)
    if args.command == "synth":
        push("synth.n", args.n)
        if args.distort:
            push("synth.distort", args.distort)
    elif args.command == "eval":
        push("eval.manifest", args.manifest)
        push("eval.saliency_dir", args.saliency_dir)
        if args.methods is not None:
            push("eval.methods", args.methods.split(","))
        push("eval.regime_tag", args.regime_tag)
    elif args.command == "robustness":
        push("robustness.manifest", args.manifest)
        push("robustness.saliency_root", args.saliency_root)
        if args.methods is not None:
            push("robustness.methods", args.methods.split(","))
    elif args.command == "causal":
        push("causal.manifest", args.manifest)
        push("causal.saliency_dir", args.saliency_dir)
        push("causal.method", args.method)
        push("causal.scorer", args.scorer)
        if args.scorer_command is not None:
            push("causal.scorer_command", args.scorer_command.split())
    return out


_COMMANDS = {
    "synth": harness.cmd_synth,
    "eval": harness.cmd_eval,
    "robustness": harness.cmd_robustness,
    "causal": harness.cmd_causal,
    "score-serve": harness.cmd_score_serve,
    "report": harness.cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides_from_args(args))
        return _COMMANDS[args.command](cfg)
    except CambenchError as exc:
        print(f"cambench {args.command}: {exc}", file=sys.stderr)
        return harness.EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
