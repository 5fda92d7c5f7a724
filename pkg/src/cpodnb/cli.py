"""Command-line entry point: ``cpodnb {generate,train,evaluate,report,run}``.

Every subcommand accepts ``--config``, ``--out`` and ``--seed``. Failures exit
nonzero with a JSON error object on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import PipelineConfig


def resolve_config(config_path: str | None, out: Path, seed: int | None) -> PipelineConfig:
    if config_path:
        cfg = PipelineConfig.load(config_path)
    elif (out / "manifest.json").exists():
        cfg = PipelineConfig.from_dict(json.loads((out / "manifest.json").read_text())["config"])
    else:
        cfg = PipelineConfig()
    return cfg.with_seed(seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpodnb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("generate", "solve the full-order model for train/test inputs"),
                        ("train", "cluster, build CPOD bases and fit the classifier"),
                        ("evaluate", "classify test inputs, run reduced models, tabulate errors"),
                        ("report", "collect a JSON + CSV summary"),
                        ("run", "generate, train, evaluate and report in one go")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if args.command == "report":
            if args.config or args.seed is not None:
                logging.getLogger(__name__).info("report reads its configuration from the manifest")
            result = pipeline.cmd_report(out)
        else:
            cfg = resolve_config(args.config, out, args.seed)
            if args.command in ("train", "evaluate"):
                manifest = out / "manifest.json"
                if not manifest.exists():
                    raise pipeline.MissingArtifactError(f"missing artifact: {manifest}")
            result = {
                "generate": pipeline.cmd_generate,
                "train": pipeline.cmd_train,
                "evaluate": pipeline.cmd_evaluate,
                "run": pipeline.run_all,
            }[args.command](cfg, out)
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable JSON
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        if isinstance(exc, pipeline.SampleFailure):
            err["sample"] = exc.index
        print(json.dumps(err), file=sys.stderr)
        return 2 if isinstance(exc, (FileNotFoundError, ValueError)) else 1
    if args.command == "report":
        print(json.dumps({"summary": str(out / "report" / "summary.json")}))
    elif args.command == "run":
        print(json.dumps({"summary": str(out / "report" / "summary.json"),
                          "config_hash": result["config_hash"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
