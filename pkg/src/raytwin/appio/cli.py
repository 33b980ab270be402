"""Command line: ``raytwin trace|report|render``."""

import argparse
import json
import os
import sys

from .. import em, geometry
from ..radiomap import GridError
from .config import COMBINING, FORMATS, ConfigError, load_config_file, parse_config
from .pipeline import PipelineError, load_fieldset, render_fields, run_pipeline, write_reports

EXIT_OK, EXIT_CONFIG, EXIT_SCENE, EXIT_RUNTIME = 0, 1, 2, 3


def _threads(v):
    if v == "auto":
        return v
    try:
        n = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a positive integer or 'auto'") from None
    if n < 1:
        raise argparse.ArgumentTypeError("expected a positive integer or 'auto'")
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="raytwin", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("trace", help="run the full pipeline")
    t.add_argument("--scene", required=True)
    t.add_argument("--config", required=True)
    t.add_argument("--out")
    t.add_argument("--threads", type=_threads, default="auto")
    t.add_argument("--format", choices=FORMATS)
    t.add_argument("--combining", choices=COMBINING)
    t.add_argument("--quiet", action="store_true", help="no progress lines")
    for name, helptext in (("report", "recompute service statistics from exported fields"),
                           ("render", "draw heatmaps from exported fields")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--out", required=True, help="directory of a previous trace run")
        s.add_argument("--config", help="config file (defaults to the run manifest echo)")
    return p


def _config_for(args):
    if args.config:
        return load_config_file(args.config)
    path = os.path.join(args.out, "manifest.json")
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(json.load(fh)["config"])
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot recover config from {path}: {exc}") from exc


def _exit_code(exc):
    cause = exc.cause if isinstance(exc, PipelineError) else exc
    if isinstance(cause, (ConfigError, GridError, em.FrequencyRangeError)):
        return EXIT_CONFIG
    if isinstance(cause, (geometry.SceneError, em.MaterialError)):
        return EXIT_SCENE
    if isinstance(exc, PipelineError) and exc.stage == "scene" and isinstance(cause, OSError):
        return EXIT_SCENE
    return EXIT_RUNTIME


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "trace":
            cfg = load_config_file(args.config).with_overrides(
                combining=args.combining, output_format=args.format, output_dir=args.out)
            m = run_pipeline(cfg, args.scene, threads=args.threads, progress=not args.quiet)
            for w in m.warnings:
                print(f"warning: {w}", file=sys.stderr)
            print(f"wrote {len(m.outputs)} files to {cfg.output_dir} "
                  f"({m.wall_time_s:.1f} s, {m.backend}, {m.threads} threads)")
        else:
            cfg = _config_for(args)
            fs, arrays, grid = load_fieldset(args.out, len(cfg.transmitters))
            if args.command == "report":
                files = write_reports(args.out, fs, cfg)
            else:
                files = render_fields(args.out, arrays, grid, cfg)
            for f in files:
                print(f)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        print(f"raytwin: error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
