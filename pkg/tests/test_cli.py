import csv
import io
import json

import pytest

from erwdelay.cli import (
    EXIT_BAD_KERNEL,
    EXIT_BAD_PROBS,
    EXIT_IO,
    EXIT_NO_SEED,
    main,
    parse_config,
)


def rows_of(text):
    return list(csv.reader(io.StringIO(text)))


def test_parse_documented_simulate_call():
    cfg = parse_config("simulate --kernel full --r 0.5 --p 0.25 --q 0.25 --n 4096 --reps 100000 --seed 7".split())
    assert (cfg.kernel.kind, cfg.params.p, cfg.n, cfg.reps, cfg.seed, cfg.format) == ("full", 0.25, 4096, 100000, 7, "csv")


def test_error_codes_are_distinct(capsys):
    assert main("simulate --r 0.5 --p 0.25 --q 0.24 --n 8".split()) == EXIT_BAD_PROBS
    assert "probabilities must sum to 1" in capsys.readouterr().err
    assert main("simulate --kernel bogus --n 8".split()) == EXIT_BAD_KERNEL
    assert main("verify --theorem 5.1".split()) == EXIT_NO_SEED
    assert main("oracle --kernel last --n 3 --output /nonexistent/dir/x.csv".split()) == EXIT_IO
    assert len({EXIT_BAD_PROBS, EXIT_BAD_KERNEL, EXIT_NO_SEED, EXIT_IO}) == 4


def test_exact_full_table(capsys):
    assert main("exact --kernel full --r 0.5 --n 16".split()) == 0
    rows = rows_of(capsys.readouterr().out)
    assert rows[0] == ["kernel", "r", "n", "branch", "statistic", "value", "stderr"]
    mean2 = [r for r in rows if r[2] == "2" and r[4] == "E(N*_n)"]
    assert float(mean2[0][5]) == 0.75


def test_oracle_last(capsys):
    assert main("oracle --kernel last --r 0.5 --n 3".split()) == 0
    rows = rows_of(capsys.readouterr().out)[1:]
    assert [float(r[5]) for r in rows] == [0.5, 0.25, 0.125, 0.125]


def test_simulate_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = "simulate --kernel first-last --r 0.4 --n 300 --reps 3000 --seed 7 --output".split()
    assert main(args + [str(a)]) == 0
    assert main(args + [str(b), "--workers", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes().split(b"\n")[0].endswith(b"\r")


def test_json_output(tmp_path):
    out = tmp_path / "s.json"
    assert main(f"simulate --kernel last --r 0.3 --n 64 --reps 500 --seed 2 --format json --output {out}".split()) == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["schema_version"] == "erwdelay.ensemble/1" and doc["checkpoints"][-1] == 64


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kernel": "last", "r": 0.5, "n": 3}))
    assert main(["oracle", "--config", str(cfg), "--n", "2"]) == 0
    rows = rows_of(capsys.readouterr().out)[1:]
    assert [r[2] for r in rows] == ["2", "2", "2"]


def test_verify_geometric_suite(tmp_path):
    out = tmp_path / "v.json"
    code = main(f"verify --theorem 5.1 --r 0.3 --seed 11 --format json --output {out}".split())
    doc = json.loads(out.read_text())
    assert code == 0 and doc["all_primary_passed"]
    assert {c["criterion"] for c in doc["checks"] if c["primary"]} == {"5"}


def test_verify_exit_code_follows_primary_checks(tmp_path):
    # the literal n^2 form of the Gamma check is red for x = 0.3, 0.5, -0.5
    assert main(f"verify --theorem gamma --seed 1 --output {tmp_path / 'g.csv'}".split()) == 1


def test_unknown_suite(capsys):
    assert main("verify --theorem 9.9 --seed 1".split()) != 0
