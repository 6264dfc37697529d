"""End-to-end campaign: seed -> source tests -> morphed inputs -> follow-ups -> reports."""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

from .adapter import open_sut
from .config import CampaignConfig
from .engine import run_followups, run_source, write_verdicts
from .errors import CampaignError, NoUsableSeed, SeedRegression, TransportError
from .logs import extract_seed, read_log, synthesize_log, verify_seed, write_log, write_seed
from .morph import ReplicaKind, generate, write_suite
from .reporting import Verdict, export_failure_distribution, format_table, summarize, write_report

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_TRANSPORT = 3
EXIT_SEED = 4

MANIFEST = "manifest.json"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class _Manifest:
    def __init__(self, out_dir: Path, config: CampaignConfig):
        self.out_dir = out_dir
        self.data = {"config": config.to_json(), "stages": [], "artifacts": {}, "status": "running"}

    def artifact(self, path: Path):
        self.data["artifacts"][path.name] = sha256_file(path)

    def stage(self, name: str):
        self.data["stages"].append(name)
        self.flush()

    def finish(self, status: str, exit_code: int, error: str | None = None, failed_stage: str | None = None):
        self.data["status"] = status
        self.data["exit_code"] = exit_code
        self.data["last_completed_stage"] = self.data["stages"][-1] if self.data["stages"] else None
        if error:
            self.data["error"] = error
            self.data["failed_stage"] = failed_stage
        self.flush()

    def flush(self):
        with open(self.out_dir / MANIFEST, "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_pipeline(config: CampaignConfig) -> int:
    """Run every stage, writing artifacts and a manifest under ``config.out_dir``.

    Returns a process exit status. Artifacts of completed stages are kept on
    failure and the manifest names the last stage that finished.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(out, config)
    current = "synth-log"
    sut = None
    try:
        if config.log_path:
            current = "read-log"
            entries = list(read_log(config.log_path))
        else:
            entries = synthesize_log(config.n_entries, config.geometry, config.rng_seed,
                                     config.synth_step, config.sut_config)
            write_log(entries, out / "log.jsonl")
            manifest.artifact(out / "log.jsonl")
        manifest.stage(current)

        current = "extract-seed"
        seed = extract_seed(entries, config.max_step)
        write_seed(seed, out / "seed.jsonl")
        manifest.artifact(out / "seed.jsonl")
        manifest.stage(current)

        current = "verify-seed"
        sut = open_sut(config.sut_endpoint, config.sut_config)
        seed, rejected = verify_seed(seed, sut)
        if not len(seed):
            raise NoUsableSeed("no usable seed: every sample was rejected by the SUT")
        write_seed(seed, out / "seed_verified.jsonl")
        manifest.artifact(out / "seed_verified.jsonl")
        manifest.data["seed_rejected"] = rejected
        manifest.stage(current)

        current = "source"
        source_outputs = run_source(seed, sut)
        manifest.stage(current)

        sessions = [("exploration", config.exploration_spec())]
        if config.exploit:
            sessions.append(("exploitation_side_pair", config.exploitation_spec(ReplicaKind.SIDE_PAIR)))
            sessions.append(("exploitation_full_triplet", config.exploitation_spec(ReplicaKind.FULL_TRIPLET)))

        reports = []
        for name, spec in sessions:
            current = f"morph:{name}"
            suite = generate(seed, spec)
            write_suite(suite, out / f"suite_{name}.jsonl")
            manifest.artifact(out / f"suite_{name}.jsonl")
            manifest.data.setdefault("discarded", {})[name] = suite.discarded
            manifest.stage(current)

            current = f"run:{name}"
            verdicts = run_followups(suite, sut, source_outputs, workers=config.workers)
            write_verdicts(verdicts, out / f"verdicts_{name}.jsonl")
            manifest.artifact(out / f"verdicts_{name}.jsonl")
            manifest.stage(current)

            current = f"report:{name}"
            report = summarize(verdicts, spec.phase)
            reports.append(report)
            write_report(report, out / f"report_{name}.json")
            manifest.artifact(out / f"report_{name}.json")
            for cls in (Verdict.FP, Verdict.FN):
                path = out / f"failures_{name}_{cls.value.lower()}.csv"
                export_failure_distribution(verdicts, cls, path)
                manifest.artifact(path)
            manifest.stage(current)

        current = "summary"
        (out / "summary.txt").write_text(format_table(reports), encoding="utf-8")
        manifest.artifact(out / "summary.txt")
        manifest.stage(current)
    except (TransportError, CampaignError) as exc:
        log.error("stage %s: %s", current, exc)
        manifest.finish("failed", EXIT_TRANSPORT, str(exc), current)
        return EXIT_TRANSPORT
    except (NoUsableSeed, SeedRegression) as exc:
        log.error("stage %s: %s", current, exc)
        manifest.finish("failed", EXIT_SEED, str(exc), current)
        return EXIT_SEED
    except Exception as exc:  # any other stage failure still leaves a manifest behind
        log.exception("stage %s failed", current)
        manifest.finish("failed", EXIT_FAILURE, f"{type(exc).__name__}: {exc}", current)
        return EXIT_FAILURE
    finally:
        if sut is not None:
            sut.close()
    manifest.finish("ok", EXIT_OK)
    return EXIT_OK
