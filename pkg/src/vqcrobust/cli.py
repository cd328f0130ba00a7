"""Command-line entry point.

    vqcrobust pipeline --config desk.json
    vqcrobust train --config desk.json --seeds 0 1 2
    vqcrobust export-qasm --config desk.json --model <id> --device chain8-cz

Exit codes: 0 success, 1 hard failure, 2 partial failure (some cells failed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import VQCError
from .pipeline import HARD_FAILURE, OK, STAGES, PipelineConfig, cmd_pipeline, desk_config, export_qasm, run_stage


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqcrobust", description="Noise-robustness lab for variational classifiers")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="pipeline JSON config")
        p.add_argument("--output-dir", help="override output_dir")
        p.add_argument("--seeds", type=int, nargs="+", help="override training seeds")
        p.add_argument("--devices", nargs="+", help="override device names or JSON files")

    for name in list(STAGES) + ["pipeline"]:
        common(sub.add_parser(name, help=f"run the {name} stage"))
    q = sub.add_parser("export-qasm", help="print OpenQASM for a trained model")
    common(q)
    q.add_argument("--model", required=True, help="model id")
    q.add_argument("--device", help="transpile for this device first")
    q.add_argument("--sample", type=int, default=0, help="test-split row to bind")
    d = sub.add_parser("desk-config", help="print the desk-scale example config")
    d.add_argument("--output-dir", default="run-desk")
    return parser


def load_config(args) -> PipelineConfig:
    with open(args.config) as fh:
        raw = json.load(fh)
    if args.output_dir:
        raw["output_dir"] = args.output_dir
    if args.seeds:
        raw["seeds"] = args.seeds
    if args.devices:
        raw["devices"] = args.devices
    return PipelineConfig.from_dict(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "desk-config":
        print(json.dumps(desk_config(args.output_dir), indent=2))
        return OK
    try:
        cfg = load_config(args)
    except (OSError, ValueError, VQCError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return HARD_FAILURE
    if args.command == "pipeline":
        code, manifest = cmd_pipeline(cfg)
        for name, st in manifest["stages"].items():
            print(f"{name:9s} status={st['status']} skipped={st['skipped']} {st['seconds']:.1f}s")
        return code
    if args.command == "export-qasm":
        try:
            sys.stdout.write(export_qasm(cfg, args.model, args.device, args.sample))
        except (OSError, VQCError, IndexError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return HARD_FAILURE
        return OK
    cfg.out.mkdir(parents=True, exist_ok=True)
    res = run_stage(args.command, cfg)
    for note in res.notes:
        print(note, file=sys.stderr)
    return res.status


if __name__ == "__main__":
    sys.exit(main())
