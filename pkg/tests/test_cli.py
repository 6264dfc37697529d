import json
import socket
import threading

import pytest

from pcsmt.adapter import make_server
from pcsmt.cli import main
from pcsmt.config import CampaignConfig, load_config, parse_range
from pcsmt.pipeline import EXIT_OK, EXIT_TRANSPORT, run_pipeline
from pcsmt.sut import SutConfig

SMALL_INI = """
[campaign]
rng_seed = 11
[seed]
entries = 12
[exploration]
noise_lengths = 1-4, 20
repetitions = 2
[exploitation]
grid = 4x4
"""


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_parse_range():
    assert parse_range("1-23") == tuple(range(1, 24))
    assert parse_range("3, 1-2, 9") == (1, 2, 3, 9)
    with pytest.raises(ValueError):
        parse_range(" , ")


def test_load_config(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(SMALL_INI + "[sut]\nambiguity_margin = 2.5 ; comment\n[geometry]\ntolerance = 90\n")
    cfg = load_config(p)
    assert cfg.rng_seed == 11 and cfg.n_entries == 12
    assert cfg.noise_lengths == (1, 2, 3, 4, 20)
    assert cfg.grid == (4, 4)
    assert cfg.sut_config == SutConfig(cfg.geometry, 2.5, 20.0)
    assert cfg.geometry.tolerance == 90
    assert load_config(None) == CampaignConfig()


def test_subcommand_chain(tmp_path, capsys):
    d = tmp_path
    assert main(["synth-log", "--entries", "15", "--rng-seed", "2", "--out", str(d / "log.jsonl")]) == 0
    assert main(["extract-seed", "--log", str(d / "log.jsonl"), "--max-step", "2000", "--out", str(d / "seed.jsonl")]) == 0
    assert main(["verify-seed", "--seed", str(d / "seed.jsonl"), "--sut", "builtin", "--out", str(d / "v.jsonl")]) == 0
    assert main(["morph", "explore", "--seed", str(d / "v.jsonl"), "--lengths", "1-3", "--repetitions", "2",
                 "--rng-seed", "4", "--out", str(d / "explore.jsonl")]) == 0
    assert len((d / "explore.jsonl").read_text().splitlines()) == 15 * 3 * 2
    assert main(["morph", "exploit", "--seed", str(d / "v.jsonl"), "--replica", "full_triplet", "--grid", "4x4",
                 "--out", str(d / "exploit.jsonl")]) == 0
    assert main(["run", "--suite", str(d / "exploit.jsonl"), "--seed", str(d / "v.jsonl"),
                 "--sut", "builtin", "--workers", "2", "--out", str(d / "verdicts.jsonl")]) == 0
    capsys.readouterr()
    assert main(["report", "--verdicts", str(d / "verdicts.jsonl"), "--method", "exploitation",
                 "--json", str(d / "r.json"), "--csv-fp", str(d / "fp.csv"), "--csv-fn", str(d / "fn.csv")]) == 0
    table = capsys.readouterr().out
    assert "Exploitation" in table
    report = json.loads((d / "r.json").read_text())
    assert report["n_tests"] == len((d / "verdicts.jsonl").read_text().splitlines())
    assert (d / "fp.csv").read_text().startswith("x,y,role,class,seed_index\n")


def test_run_resume(tmp_path):
    d = tmp_path
    main(["synth-log", "--entries", "6", "--out", str(d / "log.jsonl")])
    main(["extract-seed", "--log", str(d / "log.jsonl"), "--out", str(d / "seed.jsonl")])
    main(["morph", "explore", "--seed", str(d / "seed.jsonl"), "--lengths", "1-5", "--repetitions", "1",
          "--out", str(d / "suite.jsonl")])
    assert main(["run", "--suite", str(d / "suite.jsonl"), "--sut", "builtin", "--out", str(d / "full.jsonl")]) == 0
    lines = (d / "full.jsonl").read_text().splitlines()
    (d / "part.jsonl").write_text("\n".join(lines[:11]) + "\n")
    assert main(["run", "--suite", str(d / "suite.jsonl"), "--sut", "builtin", "--resume",
                 "--out", str(d / "part.jsonl")]) == 0
    assert (d / "part.jsonl").read_text() == (d / "full.jsonl").read_text()


def test_run_transport_exit_code(tmp_path):
    d = tmp_path
    main(["synth-log", "--entries", "3", "--out", str(d / "log.jsonl")])
    main(["extract-seed", "--log", str(d / "log.jsonl"), "--out", str(d / "seed.jsonl")])
    main(["morph", "explore", "--seed", str(d / "seed.jsonl"), "--lengths", "1", "--repetitions", "1",
          "--out", str(d / "suite.jsonl")])
    rc = main(["run", "--suite", str(d / "suite.jsonl"), "--sut", f"tcp://127.0.0.1:{free_port()}",
               "--out", str(d / "v.jsonl")])
    assert rc == EXIT_TRANSPORT


def test_bad_arguments_exit_code(tmp_path):
    assert main(["extract-seed", "--log", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path / "s")]) == 1
    (tmp_path / "s.jsonl").write_text('{"markers": [[1, 1], [2, 2], [3, 3]]}\n')
    assert main(["morph", "explore", "--seed", str(tmp_path / "s.jsonl"), "--lengths", "30",
                 "--out", str(tmp_path / "o")]) == 2


def _digests(out_dir):
    return json.loads((out_dir / "manifest.json").read_text())["artifacts"]


def test_pipeline_small(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text(SMALL_INI)
    assert main(["pipeline", "--config", str(ini), "--out-dir", str(tmp_path / "a")]) == EXIT_OK
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["status"] == "ok" and man["last_completed_stage"] == "summary"
    names = set(man["artifacts"])
    for session in ("exploration", "exploitation_side_pair", "exploitation_full_triplet"):
        assert {f"suite_{session}.jsonl", f"verdicts_{session}.jsonl", f"report_{session}.json"} <= names
    explore = json.loads((tmp_path / "a" / "report_exploration.json").read_text())
    assert explore["n_tests"] == 12 * 5 * 2
    summary = (tmp_path / "a" / "summary.txt").read_text()
    assert summary.count("Exploitation") == 2

    assert main(["pipeline", "--config", str(ini), "--out-dir", str(tmp_path / "b")]) == EXIT_OK
    assert _digests(tmp_path / "a") == _digests(tmp_path / "b")


def test_pipeline_external_sut_down(tmp_path):
    cfg = CampaignConfig(n_entries=5, noise_lengths=(1,), repetitions=1,
                         sut_endpoint=f"tcp://127.0.0.1:{free_port()}", out_dir=str(tmp_path / "out"))
    assert run_pipeline(cfg) == EXIT_TRANSPORT
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["status"] == "failed"
    assert man["exit_code"] == EXIT_TRANSPORT
    assert man["last_completed_stage"] == "extract-seed"
    assert man["failed_stage"] == "verify-seed"
    assert (tmp_path / "out" / "seed.jsonl").exists()


def test_pipeline_against_tcp_adapter(tmp_path):
    srv = make_server(SutConfig())
    th = threading.Thread(target=srv.serve_forever, daemon=True)
    th.start()
    try:
        endpoint = "tcp://%s:%d" % srv.server_address[:2]
        common = dict(n_entries=8, noise_lengths=(1, 2, 23), repetitions=1, grid=(3, 3))
        remote = CampaignConfig(sut_endpoint=endpoint, workers=3, out_dir=str(tmp_path / "r"), **common)
        local = CampaignConfig(out_dir=str(tmp_path / "l"), **common)
        assert run_pipeline(remote) == EXIT_OK
        assert run_pipeline(local) == EXIT_OK
    finally:
        srv.shutdown()
        srv.server_close()
    for name in ("verdicts_exploration.jsonl", "verdicts_exploitation_full_triplet.jsonl"):
        assert (tmp_path / "r" / name).read_bytes() == (tmp_path / "l" / name).read_bytes()
