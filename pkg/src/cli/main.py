"""Command-line entry point: divas run | synth | diagnose."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from ..agent.graph import DivasPipeline
from ..agent.state import ErrorRecord
from ..core.config import load_run_config
from ..core.errors import ConfigError, DivasError
from ..core.log_setup import configure_logging
from ..services.diagnostics import report_from_json
from ..services.synth import PRESETS, generate, preset, read_truth, write_synthetic
from .artifacts import write_run_artifacts
from .plots import render_report

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="divas", description="Partially-shared structure across data blocks")
    parser.add_argument("--log-level", default=None, help="Overrides DIVAS_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run the full pipeline on a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None, help="Output directory")

    synth = commands.add_parser("synth", help="Write a synthetic data set with ground truth")
    synth.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    synth.add_argument("--out", required=True)
    synth.add_argument("--seed", type=int, default=0)

    diagnose = commands.add_parser("diagnose", help="Re-render plots from an existing report")
    diagnose.add_argument("--report", required=True)
    diagnose.add_argument("--out", default=None, help="Plot directory, defaults to plots/ next to the report")
    return parser


def _fail(record: ErrorRecord, out_dir: Optional[Path]) -> int:
    payload = record.model_dump_json()
    print(payload, file=sys.stderr)
    if out_dir is not None and out_dir.is_dir():
        (out_dir / "error.json").write_text(json.dumps(json.loads(payload), indent=2, sort_keys=True) + "\n")
    return record.exit_code


def cmd_run(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, {"seed": args.seed, "output_dir": args.out})
    out_dir = Path(config.output_dir)
    logger.info("Config: %s", json.dumps(config.echo(), sort_keys=True))

    pipeline = DivasPipeline()
    logger.debug("Pipeline:\n%s", pipeline.get_graph_visualization())
    state = pipeline.run(config)
    if state.error is not None:
        return _fail(state.error, out_dir)

    manifest = Path(args.config).parent / "manifest.json"
    truth = read_truth(manifest) if manifest.exists() else None
    write_run_artifacts(state, str(out_dir), truth)
    if config.emit_plots:
        render_report(state.report, str(out_dir / "plots"))
    ranks = ", ".join(f"{{{label}}}:{rank}" for label, rank in state.report.collection_ranks().items())
    logger.info("Collection ranks: %s", ranks or "none")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = preset(args.preset, args.seed)
    blocks, truth = generate(spec)
    write_synthetic(args.out, spec, blocks, truth)
    return 0


def cmd_diagnose(args: argparse.Namespace) -> int:
    report_path = Path(args.report)
    try:
        report = report_from_json(report_path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"Report not found: {report_path}")
    except ValueError as e:
        raise ConfigError(f"Report {report_path} is not valid: {e}")
    render_report(report, args.out or str(report_path.parent / "plots"))
    return 0


COMMANDS = {"run": cmd_run, "synth": cmd_synth, "diagnose": cmd_diagnose}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    out = getattr(args, "out", None)
    try:
        return COMMANDS[args.command](args)
    except DivasError as e:
        return _fail(ErrorRecord.from_exception(e, stage=args.command), Path(out) if out else None)
    except Exception as e:
        logger.exception("Unexpected failure")
        return _fail(ErrorRecord.from_exception(e, stage=args.command), Path(out) if out else None)


if __name__ == "__main__":
    sys.exit(main())
