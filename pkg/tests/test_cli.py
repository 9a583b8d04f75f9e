import json

import pytest

from elliptika import cli

SMALL = ["--lf2-ratio", "2", "--xi-ratio", "16", "--d-max", "4", "--xi-floor", "4"]


def run(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_klsum_csv(capsys):
    code, out, _ = run(["klsum", "--l", "3", "--f", "1", "--xi", "-4", "--n", "2"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "# elliptika-schema v1"
    assert lines[1].startswith("# config ") and json.loads(lines[1][9:])["params"]["l"] == 3
    assert lines[2] == "l,f,xi,n,brute,factor,diff"
    assert abs(float(lines[3].split(",")[4])) == pytest.approx(8.0)


def test_specfn_json(capsys):
    code, out, _ = run(["--format", "json", "specfn", "--fn", "F", "--x", "0,1"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == cli.SCHEMA_NAME
    assert doc["rows"][1]["value"] == pytest.approx(0.5, abs=1e-10)


def test_replay_roundtrip(tmp_path, capsys):
    path = tmp_path / "a.json"
    code, _, _ = run(["--format", "json", "-o", str(path), "klgrid", "--l", "1..3", "--f", "1..2",
                      "--xi=-2..2", "--n=-2..2"], capsys)
    assert code == 0
    again = tmp_path / "b.json"
    code, _, _ = run(["--replay", str(path), "-o", str(again)], capsys)
    assert code == 0
    assert path.read_text() == again.read_text()


def test_replay_rejects_unknown_keys(tmp_path, capsys):
    doc = {"schema": cli.SCHEMA_NAME,
           "config": {"command": "klsum", "format": "json",
                      "params": {"l": 1, "f": 1, "xi": 0, "n": 1, "method": "both", "bogus": 1}}}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(["--replay", str(path)], capsys)
    assert code == cli.EXIT_CONFIG
    assert "bogus" in json.loads(err)["message"]


def test_config_errors_exit_2(capsys):
    assert run(["sigma", "--p", "100"], capsys)[0] == cli.EXIT_CONFIG
    assert run(["klsum", "--l", "1"], capsys)[0] == cli.EXIT_CONFIG
    assert run([], capsys)[0] == cli.EXIT_CONFIG
    assert run(["--threads", "0", "klsum", "--l", "1", "--f", "1", "--xi", "0", "--n", "1"],
               capsys)[0] == cli.EXIT_CONFIG


def test_sigma_deterministic_across_threads(capsys):
    args = ["--no-timing", "--allow-dirty", "sigma", "--p", "101"] + SMALL
    c1, o1, _ = run(["--threads", "1"] + args, capsys)
    c2, o2, _ = run(["--threads", "2"] + args, capsys)
    assert c1 == c2 == 0
    assert o1 == o2
    assert o1.splitlines()[2].startswith("p,sigma_square,sigma_xi,term1")


def test_audit_failure_exit_4(capsys):
    args = ["sigma", "--p", "101", "--tail-tol", "1e-12"] + SMALL
    code, out, err = run(args, capsys)
    assert code == cli.EXIT_AUDIT and out
    assert json.loads(err)["exit_code"] == cli.EXIT_AUDIT
    assert run(["--allow-dirty"] + args, capsys)[0] == 0


def test_scan_primes_selection():
    ps = cli.scan_primes("100..2000", 20)
    assert len(ps) == 20 and ps[0] == 101 and ps[-1] == 1999
    assert cli.scan_primes("101,103", 20) == [101, 103]
    with pytest.raises(ValueError):
        cli.scan_primes("101,104", 20)


def test_threads_env(monkeypatch):
    from elliptika import elliptic
    monkeypatch.setenv("ELLIPTIKA_THREADS", "3")
    assert elliptic.default_threads() == 3
    monkeypatch.setenv("ELLIPTIKA_THREADS", "0")
    with pytest.raises(ValueError):
        elliptic.default_threads()
