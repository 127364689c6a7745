import json
import sys

import pytest

from conftest import GOLDEN
from seqexplore.cli import FIXTURES, OUT_ENV, main

TWOROOM = str(FIXTURES / "tworoom.episodes.json")
STUDIO = str(FIXTURES / "studio.episodes.json")


def read(p):
    return p.read_bytes()


@pytest.fixture(scope="module")
def serial(tmp_path_factory):
    out = tmp_path_factory.mktemp("serial")
    assert main(["run", "--episodes", TWOROOM, "--episodes", STUDIO, "--out", str(out)]) == 0
    return out


def test_run_writes_every_artifact(serial):
    for eid in ("tworoom-emn", "tworoom-absent", "studio-eqa", "studio-emn"):
        assert (serial / "traces" / f"{eid}.trace.jsonl").is_file()
        assert (serial / "memory" / f"{eid}.memory.txt").read_text().startswith("memory width=")
        assert (serial / "memory" / f"{eid}.graph.txt").read_text().startswith("apartment:")
        lines = (serial / "reports" / f"{eid}.jsonl").read_text().splitlines()
        assert json.loads(lines[-1])["type"] == "episode"
    meta = json.loads((serial / "run.json").read_text())
    assert meta["episodes"] == sorted(meta["episodes"])


def test_run_matches_golden_files(serial):
    for name in ("tworoom-emn", "tworoom-absent", "studio-eqa"):
        assert read(serial / "traces" / f"{name}.trace.jsonl") == read(GOLDEN / f"{name}.trace.jsonl")
    assert read(serial / "summary.csv") == read(GOLDEN / "tworoom-studio.summary.csv")
    assert read(serial / "memory" / "tworoom-emn.graph.txt") == read(GOLDEN / "tworoom-emn.graph.txt")


def test_parallel_run_is_byte_identical(serial, tmp_path):
    assert main(["run", "--episodes", TWOROOM, "--episodes", STUDIO, "--jobs", "3", "--out", str(tmp_path)]) == 0
    for p in sorted(serial.rglob("*")):
        if p.is_file():
            assert read(tmp_path / p.relative_to(serial)) == read(p), p


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env-out"))
    assert main(["run", "--episodes", TWOROOM]) == 0
    assert (tmp_path / "env-out" / "summary.csv").is_file()


def test_report_recomputes_summary(serial, capsys):
    traces = sorted(str(p) for p in (serial / "traces").glob("*.jsonl"))
    assert main(["report", *traces]) == 0
    assert capsys.readouterr().out == (serial / "summary.csv").read_text()


def test_replay_golden_and_tampered(tmp_path, capsys):
    golden = sorted(str(p) for p in GOLDEN.glob("*.trace.jsonl"))
    assert main(["replay", *golden]) == 0
    assert capsys.readouterr().out.count(": verified") == len(golden)
    lines = (GOLDEN / "tworoom-emn.trace.jsonl").read_text().splitlines()
    recs = [json.loads(line) for line in lines]
    i = next(k for k, r in enumerate(recs) if r.get("action") == "move-forward")
    recs[i]["state"] = "0" * 16
    bad = tmp_path / "bad.trace.jsonl"
    bad.write_text("".join(json.dumps(r) + "\n" for r in recs))
    assert main(["replay", str(bad)]) == 1
    assert "divergence" in capsys.readouterr().out


def test_failed_subtasks_exit_one(tmp_path):
    doc = json.loads(open(TWOROOM).read())
    ep = doc["episodes"][1]
    ep["goals"][0].update(id="wrong", category="object", feasible=True, answer="kitchen", text="Which room is the sofa in?")
    ep["scenario"] = str(FIXTURES / "tworoom.scen")
    p = tmp_path / "w.episodes.json"
    p.write_text(json.dumps({"episodes": [ep]}))
    assert main(["run", "--episodes", str(p), "--out", str(tmp_path / "o")]) == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--episodes", TWOROOM, "--tau0", "2"],
        ["run", "--episodes", TWOROOM, "--theta", "0"],
        ["run", "--episodes", TWOROOM, "--oracle", "external"],
        ["run", "--episodes", "/nonexistent.episodes.json"],
        ["run", "--episodes", TWOROOM, "--episodes", TWOROOM],
        ["run", "--episodes", TWOROOM, "--jobs", "0"],
        ["snapshot", str(GOLDEN / "tworoom-emn.trace.jsonl"), "--step", "999", "--out", "/tmp/x.ppm"],
        ["gen", "--rooms", "0"],
    ],
)
def test_config_errors_exit_two(argv, tmp_path):
    assert main([*argv, *(["--out", str(tmp_path)] if argv[0] == "run" else [])]) == 2


def test_bad_weights_are_a_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["run", "--weights", "1,2"])
    assert e.value.code == 2


def test_external_oracle_gives_identical_traces(tmp_path):
    cmd = f"{sys.executable} -m seqexplore.reasoner"
    out = tmp_path / "ext"
    assert main(["run", "--episodes", TWOROOM, "--oracle", "external", "--oracle-command", cmd, "--out", str(out)]) == 0
    for name in ("tworoom-emn", "tworoom-absent"):
        assert read(out / "traces" / f"{name}.trace.jsonl") == read(GOLDEN / f"{name}.trace.jsonl")


def test_gen_then_run(tmp_path):
    gen = tmp_path / "gen"
    assert main(["gen", "--seed", "5", "--size", "small", "--track", "EMN", "--episodes", "2", "--out", str(gen)]) == 0
    eps = gen / "gen5-small.episodes.json"
    assert eps.is_file() and (gen / "gen5-small.scen").is_file()
    assert main(["run", "--episodes", str(eps), "--out", str(tmp_path / "out")]) in (0, 1)
    assert len(list((tmp_path / "out" / "traces").glob("*.jsonl"))) == 2
    again = tmp_path / "again"
    main(["gen", "--seed", "5", "--size", "small", "--track", "EMN", "--episodes", "2", "--out", str(again)])
    assert read(again / "gen5-small.scen") == read(gen / "gen5-small.scen")


def test_gen_suite(tmp_path):
    assert main(["gen", "--suite", "4", "--seed", "1", "--out", str(tmp_path)]) == 0
    assert len(list(tmp_path.glob("*.scen"))) == 4
    assert len(list(tmp_path.glob("*.episodes.json"))) == 4


def test_snapshot_command(tmp_path):
    out = tmp_path / "s.ppm"
    assert main(["snapshot", str(GOLDEN / "tworoom-emn.trace.jsonl"), "--step", "10", "--out", str(out)]) == 0
    assert read(out) == read(GOLDEN / "tworoom-emn.step10.ppm")
