import json
import os
import subprocess
import sys

import pytest

from conftest import DST, SAMPLE_LINKS
from seagull.cli import ABORTED, INVALID, OK, REJECTED, UNKNOWN, VIOLATED, main
from seagull.fib import read_fib_csv, write_fib_csv


@pytest.fixture
def tree7_shares(tmp_path, tree7):
    fib = tmp_path / "f4.csv"
    fib.write_text(write_fib_csv(tree7))
    out = tmp_path / "f4"
    assert main(["--seed", "3", "share", str(fib), "--out", str(out)]) == OK
    return str(out)


@pytest.fixture
def looped7_shares(tmp_path, looped7):
    fib = tmp_path / "f6.csv"
    fib.write_text(write_fib_csv(looped7))
    out = tmp_path / "f6"
    assert main(["share", str(fib), "--out", str(out), "--seed", "3"]) == OK
    return str(out)


def _last_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_gen_from_topology_and_verify(tmp_path, capsys):
    topo = tmp_path / "topo.txt"
    topo.write_text(SAMPLE_LINKS.replace(" ", "|") + "\n")
    out = tmp_path / "g.csv"
    assert main(["gen", "--topology", str(topo), "--dest", str(DST), "--out", str(out)]) == OK
    fib = read_fib_csv(out.read_text())
    assert fib.destination == DST and fib.n == 7
    assert main(["share", str(out), "--out", str(tmp_path / "s"), "--seed", "1"]) == OK
    capsys.readouterr()
    assert main(["verify", str(tmp_path / "s"), "loop_free"]) == OK
    rec = _last_json(capsys)
    assert rec["result"] is True and rec["check"] == "loop_free"


def test_gen_injected_loop_is_found(tmp_path, capsys):
    out = tmp_path / "l.csv"
    assert main(["--seed", "5", "gen", "--nodes", "30", "--shape", "random", "--inject-loop",
                 "--out", str(out)]) == OK
    assert os.path.exists(str(out) + ".cycle")
    main(["--seed", "5", "share", str(out), "--out", str(tmp_path / "s")])
    assert main(["verify", str(tmp_path / "s"), "loop_free"]) == VIOLATED


def test_looped7_violated(looped7_shares, capsys):
    assert main(["verify", looped7_shares, "loop_free", "--mode", "early-exit"]) == VIOLATED
    assert _last_json(capsys)["mode"] == "early-exit"


def test_walk_checks(tree7_shares, capsys):
    assert main(["verify", tree7_shares, "reachability", "--s", "1"]) == OK
    assert main(["verify", tree7_shares, "waypoint", "--s", "AS1", "--w", "6"]) == OK
    assert main(["verify", tree7_shares, "waypoint", "--s", "2", "--w", "6"]) == VIOLATED
    assert main(["verify", tree7_shares, "origin"]) == OK
    assert main(["verify", tree7_shares, "origin", "--registry", "1"]) == VIOLATED


def test_unknown_as(tree7_shares):
    assert main(["verify", tree7_shares, "reachability", "--s", "4242"]) == UNKNOWN


def test_budget_persists_between_invocations(tree7_shares, capsys):
    args = ["verify", tree7_shares, "waypoint", "--s", "1", "--w", "6", "--budget", "2"]
    assert main(args) == OK
    assert main(args) == OK
    assert main(args) == REJECTED
    assert main(args[:-2] + ["--budget", "2", "--principal", "other"]) == OK
    assert main(["--budget", "0"] + args[:-2]) == REJECTED


def test_query_commit(pre_update, tmp_path, capsys):
    fib = tmp_path / "pre.csv"
    fib.write_text(write_fib_csv(pre_update))
    sh = str(tmp_path / "pre")
    main(["share", str(fib), "--out", sh])
    assert main(["query", sh, "--source", "6", "--next-hop", "1", "--commit"]) == VIOLATED
    assert main(["query", sh, "--source", "6", "--next-hop", str(DST), "--commit"]) == OK
    capsys.readouterr()
    assert main(["reconstruct", sh]) == OK
    rebuilt = read_fib_csv(capsys.readouterr().out)
    assert dict(rebuilt.entries)[6] == DST
    assert json.loads(open(os.path.join(sh, "meta.json")).read())["version"] == 2


def test_audit(tree7_shares, capsys):
    assert main(["audit", tree7_shares, "loop_free"]) == OK
    rep = _last_json(capsys)
    assert rep["match"] and rep["observed"] == rep["expected"] and rep["verdict"]["result"] is True


def test_share_files_are_deterministic(tmp_path, tree7):
    fib = tmp_path / "f.csv"
    fib.write_text(write_fib_csv(tree7))
    blobs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        main(["share", str(fib), "--out", str(out), "--seed", "77", "--session", "x"])
        blobs.append({f: (out / f).read_bytes() for f in sorted(os.listdir(out))})
    assert blobs[0] == blobs[1]
    gens = []
    for k in range(2):
        out = tmp_path / f"g{k}.csv"
        main(["gen", "--nodes", "40", "--seed", "77", "--inject-loop", "--out", str(out)])
        gens.append(out.read_bytes())
    assert gens[0] == gens[1]


def test_metadata_reveals_no_next_hops(tree7_shares, tree7):
    meta = json.loads(open(os.path.join(tree7_shares, "meta.json")).read())
    assert set(meta) == {"session", "t", "n", "rows", "destination", "destination_index", "index_map", "version"}
    for i in range(3):
        lines = open(os.path.join(tree7_shares, f"party{i}.shares")).read().splitlines()
        header = json.loads(lines[0])
        assert set(header) == {"party", "session", "version", "rows", "n"}
        # every body value is a field residue, no AS numbers or pairs in clear
        assert all(l.split()[0] in ("src", "dst") for l in lines[1:])


def test_invalid_inputs(tmp_path, tree7_shares, capsys):
    assert main(["share", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x")]) == INVALID
    bad = tmp_path / "bad.csv"
    bad.write_text("this is not a fib\n")
    assert main(["share", str(bad), "--out", str(tmp_path / "x")]) == INVALID
    f = tmp_path / "f.csv"
    f.write_text("destination,7\n1,7\n")
    assert main(["share", str(f), "--t", "2", "--out", str(tmp_path / "y")]) == INVALID
    assert main(["verify", tree7_shares, "waypoint", "--s", "1"]) == INVALID
    assert main(["verify", tree7_shares, "nonsense"]) == INVALID
    with open(os.path.join(tree7_shares, "party1.shares"), "a") as fh:
        fh.write("src 0 1 2\n")
    assert main(["verify", tree7_shares, "loop_free"]) == INVALID


def test_bench(tmp_path, capsys):
    csv = tmp_path / "b.csv"
    assert main(["bench", "chain:10", "star+loop:12", "--random", "5", "--reps", "1", "--csv", str(csv)]) == OK
    out = capsys.readouterr().out
    assert "# Edges" in out and "Johnson" in out
    assert len(csv.read_text().splitlines()) == 1 + 7


def test_console_script(tmp_path):
    out = tmp_path / "g.csv"
    res = subprocess.run([sys.executable, "-m", "seagull.cli", "gen", "--nodes", "5", "--out", str(out)],
                         capture_output=True, text=True)
    assert res.returncode == OK, res.stderr
    assert json.loads(res.stdout)["n"] == 5
