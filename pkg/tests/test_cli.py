from pathlib import Path

import pytest

from ftaplab.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main

DATA = Path(__file__).resolve().parent.parent / "data"
BINOMIAL = str(DATA / "binomial.tree")
UP_OR_FLAT = str(DATA / "up_or_flat.tree")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_binomial(capsys):
    code, out, _ = run(capsys, "analyze", BINOMIAL)
    assert code == EXIT_OK
    assert "NFLVR: holds" in out and "q(1|0) = 1/3" in out and "q(2|0) = 2/3" in out


def test_analyze_up_or_flat(capsys):
    code, out, _ = run(capsys, "analyze", UP_OR_FLAT)
    assert code == EXIT_FAIL
    assert "NA: fails" in out and "phi(0) = 1" in out and "Kreps-Yan: fails at atom 1" in out


def test_bad_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["analyze", BINOMIAL, "--no-such-flag"])
    assert exc.value.code == EXIT_USAGE
    assert "usage:" in capsys.readouterr().err


def test_missing_file(capsys):
    code, _, err = run(capsys, "analyze", "/nonexistent.tree")
    assert code == EXIT_USAGE and err.startswith("error:")


def test_parse_error(tmp_path, capsys):
    p = tmp_path / "bad.tree"
    p.write_text("FTAPLAB TREE 1\nnode 0 - 1/1\nnode 1 0 2/4\nnode 2 0 1/2\n")
    code, _, err = run(capsys, "analyze", str(p))
    assert code == EXIT_USAGE and "line 3" in err


def test_certify_deflator(capsys):
    code, out, _ = run(capsys, "certify", BINOMIAL, "--deflator")
    assert code == EXIT_OK
    assert "D(1) = 2/3" in out and "D(2) = 4/3" in out and "exact numeraire ratios: yes" in out


def test_certify_esm_and_ky(capsys):
    code, out, _ = run(capsys, "certify", BINOMIAL, "--esm")
    assert code == EXIT_OK and "Z(1) = 2/3" in out
    code, out, _ = run(capsys, "certify", BINOMIAL, "--kreps-yan")
    assert code == EXIT_OK and "Z(2) = 4/3" in out
    code, out, _ = run(capsys, "certify", UP_OR_FLAT, "--kreps-yan")
    assert code == EXIT_FAIL and "failed atom = 1" in out


def test_certify_deflator_fails_without_nupbr(tmp_path, capsys):
    p = tmp_path / "up.tree"
    p.write_text("FTAPLAB TREE 1\nnode 0 - 1/1\nnode 1 0 1/1\nproc S 1 0 1/1\nproc S 1 1 2/1\n")
    code, out, _ = run(capsys, "certify", str(p), "--deflator")
    assert code == EXIT_FAIL and "NUPBR certificate" in out


def test_decompose(capsys):
    code, out, _ = run(capsys, "decompose", BINOMIAL, "--proc", "S", "--threshold", "3/4")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "threshold C = 3/4" and lines[1] == "node B M Xcheck"
    # the up jump is big; the remainder has drift -1/4
    assert lines[3:] == ["1 -1/4 1/4 1", "2 -1/4 -1/4 0"]


def test_decompose_collision_warning(capsys):
    code, out, _ = run(capsys, "decompose", BINOMIAL, "--proc", "S", "--threshold", "1")
    assert code == EXIT_OK and "warning: a jump magnitude equals the threshold" in out


def test_distance(tmp_path, capsys):
    p = tmp_path / "two.tree"
    p.write_text(Path(BINOMIAL).read_text() + "proc Y 1 0 1/1\nproc Y 1 1 3/2\nproc Y 1 2 1/2\n")
    code, out, _ = run(capsys, "distance", str(p), "--proc", "S", "--proc2", "Y", "--ucp")
    assert code == EXIT_OK and out == "ucp = 1/4\n"
    code, out, _ = run(capsys, "distance", str(p), "--proc", "S", "--proc2", "Y", "--emery")
    assert code == EXIT_OK and "emery lower = 1/4" in out


def test_put_profile(capsys):
    code, out, _ = run(capsys, "put-profile", BINOMIAL, "--procs", "S", "--grid", "1/2", "1", "2")
    assert code == EXIT_OK
    assert out.splitlines()[1:] == ["1/2 1", "1 1/2", "2 0"]


def test_gen_round_trip(tmp_path, capsys):
    out_file = tmp_path / "g.tree"
    code, _, _ = run(capsys, "gen", "--seed", "4", "--depth", "2", "--branch", "2", "--emm-first",
                     "--out", str(out_file))
    assert code == EXIT_OK
    code, out, _ = run(capsys, "analyze", str(out_file))
    assert code == EXIT_OK and "ESM: exists" in out
    code, printed, _ = run(capsys, "gen", "--seed", "4", "--depth", "2", "--branch", "2", "--emm-first")
    assert printed == out_file.read_text()


def test_harness_writes_reports(tmp_path, capsys):
    code, out, _ = run(capsys, "harness", "--suite", "ftap", "--seeds", "0..9", "--out", str(tmp_path))
    assert code == EXIT_OK and "ftap-triangle: PASS instances=10" in out
    tsv = (tmp_path / "ftap.report.tsv").read_text().splitlines()
    assert tsv[0] == "name\tseed\tpass\tworst_slack" and len(tsv) == 31
    assert (tmp_path / "ftap.report.txt").exists()


def test_bad_seed_range():
    with pytest.raises(SystemExit) as exc:
        main(["harness", "--suite", "ftap", "--seeds", "5..1"])
    assert exc.value.code == EXIT_USAGE
