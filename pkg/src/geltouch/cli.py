"""Command line entry point: simulate / run / bench / eval / demo-serve.

Exit codes: 0 success, 2 usage error, 3 config error, 4 recording decode
error, 5 runtime error.
"""

from __future__ import annotations

import argparse
import sys

EXIT_CONFIG = 3
EXIT_DECODE = 4
EXIT_RUNTIME = 5


def build_parser() -> argparse.ArgumentParser:
    from .config import defaults_help_text

    parser = argparse.ArgumentParser(
        prog="geltouch",
        description="Gesture detection for an event-camera soft-gel touch surface.",
        epilog=defaults_help_text(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="synthesize a labeled recording from a scenario",
                           epilog=defaults_help_text(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
    p_sim.add_argument("--scenario", required=True, help="scenario config file")
    p_sim.add_argument("--out", required=True, help="output recording path")
    p_sim.add_argument("--csv", help="also export events as CSV")

    p_run = sub.add_parser("run", help="run the gesture pipeline over a recording",
                           epilog=defaults_help_text(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
    p_run.add_argument("--in", dest="inp", required=True, help="input recording")
    p_run.add_argument("--config", help="pipeline config file")
    p_run.add_argument("--out", required=True, help="output records file")
    p_run.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one config key")

    p_bench = sub.add_parser("bench", help="measure pipeline runtime on a recording")
    p_bench.add_argument("--in", dest="inp", required=True, help="input recording")
    p_bench.add_argument("--config", help="pipeline config file")
    p_bench.add_argument("--out", help="write the report here as well as stdout")
    p_bench.add_argument("--set", dest="overrides", action="append", default=[],
                         metavar="KEY=VALUE", help="override one config key")

    p_eval = sub.add_parser("eval", help="score pipeline outputs against labels")
    p_eval.add_argument("--pred", required=True, help="outputs file from `run`")
    p_eval.add_argument("--labels", required=True, help="recording with a label track")
    p_eval.add_argument("--report", required=True, help="report file to write")
    p_eval.add_argument("--bins", help="optional CSV of accuracy-vs-intensity bins")
    p_eval.add_argument("--confusion", help="optional CSV of the balanced confusion matrix")

    p_serve = sub.add_parser("demo-serve", help="run the interactive demo server")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--config", help="pipeline config file")
    p_serve.add_argument("--set", dest="overrides", action="append", default=[],
                         metavar="KEY=VALUE", help="override one config key")
    p_serve.add_argument("--record", help="write each session's synthesized recording "
                                          "into this directory")
    return parser


def _cmd_simulate(args) -> int:
    from .config import ConfigError, load_scenario
    from .recording import export_events_csv, write_recording
    from .simulator import generate_labeled_recording

    try:
        scene, scripts, duration_us, seed = load_scenario(args.scenario)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rec = generate_labeled_recording(scene, scripts, duration_us=duration_us, seed=seed)
        write_recording(rec, args.out)
        if args.csv:
            export_events_csv(rec, args.csv)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {args.out}: {len(rec.events)} events, {len(rec.frames)} frames, "
          f"{len(rec.labels)} labels")
    return 0


def _load(args):
    from .config import load_pipeline_config, pipeline_from_config

    cfg = load_pipeline_config(args.config, args.overrides)
    return cfg, pipeline_from_config(cfg)


def _cmd_run(args) -> int:
    from .config import ConfigError
    from .pipeline import PipelineError, write_outputs
    from .recording import DecodeError, read_recording

    try:
        cfg, pipe = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rec = read_recording(args.inp)
    except (DecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DECODE
    try:
        outputs = list(pipe.run(rec))
        write_outputs(outputs, args.out)
    except (PipelineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {args.out}: {len(outputs)} batch records")
    return 0


def _cmd_bench(args) -> int:
    from .config import ConfigError
    from .pipeline import PipelineError, bench
    from .recording import DecodeError, read_recording

    try:
        cfg, pipe = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rec = read_recording(args.inp)
    except (DecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DECODE
    try:
        report = bench(rec, pipe)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    text = report.to_text()
    print(text, end="")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


def _cmd_eval(args) -> int:
    from .metrics import evaluate, export_plot_tables
    from .pipeline import read_outputs
    from .recording import DecodeError, read_recording

    try:
        rec = read_recording(args.labels)
    except (DecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DECODE
    try:
        outputs = read_outputs(args.pred)
        report = evaluate(outputs, rec.labels, rec.geometry)
        with open(args.report, "w") as fh:
            fh.write(report.to_text())
        export_plot_tables(report, bins_path=args.bins, confusion_path=args.confusion)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {args.report}")
    return 0


def _cmd_serve(args) -> int:
    from .config import ConfigError
    from .server import serve

    try:
        cfg, _ = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        serve(cfg, host=args.host, port=args.port, record_dir=args.record)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "run": _cmd_run,
    "bench": _cmd_bench,
    "eval": _cmd_eval,
    "demo-serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
