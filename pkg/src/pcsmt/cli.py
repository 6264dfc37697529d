"""Command-line entry point (``pcsmt``)."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .adapter import open_sut, serve_adapter
from .config import CampaignConfig, load_config, parse_angles, parse_grid, parse_range
from .engine import read_verdicts, run_followups, run_source, write_verdicts
from .errors import CampaignError, NoUsableSeed, SeedRegression, TransportError
from .logs import extract_seed, read_log, read_seed, synthesize_log, verify_seed, write_log, write_seed
from .morph import NoiseSpec, Phase, ReplicaKind, generate, read_suite, write_suite
from .pipeline import EXIT_CONFIG, EXIT_FAILURE, EXIT_SEED, EXIT_TRANSPORT, run_pipeline
from .reporting import Verdict, export_failure_distribution, format_table, summarize, write_report

log = logging.getLogger("pcsmt")


def _config(args) -> CampaignConfig:
    cfg = load_config(getattr(args, "config", None))
    return cfg.with_overrides(
        rng_seed=getattr(args, "rng_seed", None),
        workers=getattr(args, "workers", None),
        out_dir=getattr(args, "out_dir", None),
        sut_endpoint=getattr(args, "sut", None),
        max_step=getattr(args, "max_step", None),
    )


def cmd_synth_log(args):
    cfg = _config(args)
    entries = synthesize_log(args.entries, cfg.geometry, cfg.rng_seed, args.step, cfg.sut_config)
    write_log(entries, args.out)
    log.info("wrote %d log entries to %s", len(entries), args.out)


def cmd_extract_seed(args):
    cfg = _config(args)
    seed = extract_seed(read_log(args.log), cfg.max_step)
    write_seed(seed, args.out)
    log.info("extracted %d seed samples to %s", len(seed), args.out)


def cmd_verify_seed(args):
    cfg = _config(args)
    sut = open_sut(cfg.sut_endpoint, cfg.sut_config)
    try:
        kept, rejected = verify_seed(read_seed(args.seed), sut)
    finally:
        sut.close()
    write_seed(kept, args.out)
    if rejected:
        print("rejected:", " ".join(map(str, rejected)))
    log.info("kept %d seed samples, rejected %d", len(kept), len(rejected))
    if not len(kept):
        raise NoUsableSeed("no usable seed: every sample was rejected")


def cmd_morph(args):
    cfg = _config(args)
    if args.phase == "explore":
        spec = NoiseSpec(Phase.EXPLORATION, args.repetitions, parse_range(args.lengths), rng_seed=cfg.rng_seed)
    else:
        spec = NoiseSpec(Phase.EXPLOITATION, replica_kind=ReplicaKind(args.replica),
                         rotation_angles=parse_angles(args.angles), grid=parse_grid(args.grid),
                         rng_seed=cfg.rng_seed)
    suite = generate(read_seed(args.seed), spec)
    write_suite(suite, args.out)
    log.info("wrote %d follow-ups to %s (%d discarded)", len(suite), args.out, suite.discarded)


def _count_lines(path: Path) -> int:
    if not path.exists():
        return 0
    with open(path, encoding="utf-8") as fh:
        return sum(1 for line in fh if line.strip())


def cmd_run(args):
    cfg = _config(args)
    suite = read_suite(args.suite)
    out = Path(args.out)
    start = _count_lines(out) if args.resume else 0
    if not args.resume:
        out.write_text("", encoding="utf-8")
    sut = open_sut(cfg.sut_endpoint, cfg.sut_config)
    try:
        source = run_source(read_seed(args.seed), sut) if args.seed else None
        run_followups(suite, sut, source, workers=cfg.workers, start=start,
                      on_batch=lambda batch: write_verdicts(batch, out, append=True))
    except CampaignError as exc:
        print(f"stopped after {exc.completed} follow-ups; rerun with --resume", file=sys.stderr)
        raise
    finally:
        sut.close()


def cmd_report(args):
    verdicts = read_verdicts(args.verdicts)
    report = summarize(verdicts, Phase(args.method), args.marker_range)
    sys.stdout.write(format_table([report]))
    if args.json:
        write_report(report, args.json)
    if args.csv_fp:
        export_failure_distribution(verdicts, Verdict.FP, args.csv_fp)
    if args.csv_fn:
        export_failure_distribution(verdicts, Verdict.FN, args.csv_fn)


def cmd_serve(args):
    cfg = _config(args)
    serve_adapter(cfg.sut_config, args.endpoint)


def cmd_pipeline(args):
    cfg = _config(args)
    if args.no_exploit:
        cfg = cfg.with_overrides(exploit=False)
    if args.entries is not None:
        cfg = cfg.with_overrides(n_entries=args.entries)
    return run_pipeline(cfg)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI campaign configuration file")
    common.add_argument("--rng-seed", type=int)
    common.add_argument("-v", "--verbose", action="count", default=0)

    sut = argparse.ArgumentParser(add_help=False)
    sut.add_argument("--sut", help="builtin | tcp://host:port | exec:<command>")
    sut.add_argument("--workers", type=int)

    p = argparse.ArgumentParser(prog="pcsmt", description="Metamorphic testing of a marker-based position control system.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-log", parents=[common], help="synthesise an execution log")
    s.add_argument("--entries", type=int, default=625)
    s.add_argument("--step", type=float, default=500.0, help="max per-step displacement (px)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth_log)

    s = sub.add_parser("extract-seed", parents=[common], help="extract a seed from a log")
    s.add_argument("--log", required=True)
    s.add_argument("--max-step", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extract_seed)

    s = sub.add_parser("verify-seed", parents=[common, sut], help="confirm seed samples against the SUT")
    s.add_argument("--seed", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_verify_seed)

    s = sub.add_parser("morph", parents=[common], help="generate follow-up inputs")
    s.add_argument("phase", choices=["explore", "exploit"])
    s.add_argument("--seed", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--lengths", default="1-23", help="noise lengths, e.g. 1-23 (explore)")
    s.add_argument("--repetitions", type=int, default=10, help="noise vectors per (seed, length) (explore)")
    s.add_argument("--replica", choices=[k.value for k in ReplicaKind], default="side_pair")
    s.add_argument("--angles", default="0,45,90,135")
    s.add_argument("--grid", default="25x25")
    s.set_defaults(func=cmd_morph)

    s = sub.add_parser("run", parents=[common, sut], help="execute follow-ups and classify verdicts")
    s.add_argument("--suite", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", help="seed file; runs the source tests first")
    s.add_argument("--resume", action="store_true", help="append to --out, skipping finished cases")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("report", parents=[common], help="summarise a verdict file")
    s.add_argument("--verdicts", required=True)
    s.add_argument("--method", choices=[ph.value for ph in Phase], default="exploration")
    s.add_argument("--marker-range")
    s.add_argument("--json")
    s.add_argument("--csv-fp")
    s.add_argument("--csv-fn")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("serve", parents=[common], help="serve the reference SUT over the adapter protocol")
    s.add_argument("--endpoint", default="stdio", help="stdio | tcp://host:port")
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("pipeline", parents=[common, sut], help="run the whole campaign")
    s.add_argument("--out-dir")
    s.add_argument("--entries", type=int, help="synthesised log length")
    s.add_argument("--no-exploit", action="store_true", help="exploration session only")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        rc = args.func(args)
    except (TransportError, CampaignError) as exc:
        log.error("%s", exc)
        return EXIT_TRANSPORT
    except (NoUsableSeed, SeedRegression) as exc:
        log.error("%s", exc)
        return EXIT_SEED
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG if isinstance(exc, ValueError) else EXIT_FAILURE
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
