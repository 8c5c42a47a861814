import json
from pathlib import Path

import pytest

from plotview.cli import DataError, load_summary, main, medians_from_raw

DATA = Path(__file__).parent / "data"
GOLDEN_SUMMARY = DATA / "golden.summary.csv"
GOLDEN_RAW = DATA / "golden.csv"
GOLDEN_MEDIANS = {"force": 1.25, "reduction": 0.375, "other_ops": 0.5}


def test_load_summary_reads_medians():
    assert load_summary(GOLDEN_SUMMARY) == GOLDEN_MEDIANS


def test_raw_medians_match_summary_convention():
    assert medians_from_raw(GOLDEN_RAW) == GOLDEN_MEDIANS


def test_self_report_equals_csv_medians(tmp_path, capsys):
    out = tmp_path / "bars.png"
    code = main(["--summary", str(GOLDEN_SUMMARY), "--out", str(out),
                 "--self-report"])
    assert code == 0
    assert out.exists()
    report = json.loads(capsys.readouterr().out)
    assert report == {"golden": GOLDEN_MEDIANS}


def test_segment_heights_stack_to_total(tmp_path, capsys):
    code = main(["--summary", str(GOLDEN_SUMMARY), "--out",
                 str(tmp_path / "x.png"), "--self-report"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert sum(report["golden"].values()) == pytest.approx(2.125)


def test_output_is_deterministic_across_runs(tmp_path):
    first = tmp_path / "a.png"
    second = tmp_path / "b.png"
    assert main(["--summary", str(GOLDEN_SUMMARY), "--out", str(first)]) == 0
    assert main(["--summary", str(GOLDEN_SUMMARY), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_two_configurations_two_bars(tmp_path, capsys):
    other = tmp_path / "other.summary.csv"
    other.write_text("app,category,median,min,max\n"
                     "nbody,force,2.0,1.9,2.1\n"
                     "nbody,other_ops,1.0,0.9,1.1\n")
    code = main(["--summary", f"seq={GOLDEN_SUMMARY}", "--summary", f"par={other}",
                 "--out", str(tmp_path / "two.png"), "--group-by", "backend",
                 "--self-report"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) == {"seq", "par"}
    assert report["par"] == {"force": 2.0, "other_ops": 1.0}


def test_raw_cross_check_accepts_consistent_pair(tmp_path):
    code = main(["--summary", str(GOLDEN_SUMMARY), "--raw", str(GOLDEN_RAW),
                 "--out", str(tmp_path / "ok.png")])
    assert code == 0


def test_raw_cross_check_rejects_mismatch(tmp_path, capsys):
    tampered = tmp_path / "tampered.summary.csv"
    lines = GOLDEN_SUMMARY.read_text().splitlines()
    lines[1] = "nbody,force,9.99,1.1,1.4"
    tampered.write_text("\n".join(lines) + "\n")
    code = main(["--summary", str(tampered), "--raw", str(GOLDEN_RAW),
                 "--out", str(tmp_path / "bad.png")])
    assert code == 1
    assert "match no loaded summary" in capsys.readouterr().err


def test_missing_column_is_an_error(tmp_path, capsys):
    bad = tmp_path / "bad.summary.csv"
    bad.write_text("app,category,min,max\nnbody,force,1,2\n")
    code = main(["--summary", str(bad), "--out", str(tmp_path / "no.png")])
    assert code == 1
    assert "missing column" in capsys.readouterr().err


def test_empty_input_is_an_error(tmp_path, capsys):
    empty = tmp_path / "empty.summary.csv"
    empty.write_text("app,category,median,min,max\n")
    code = main(["--summary", str(empty), "--out", str(tmp_path / "no.png")])
    assert code == 1
    assert "no data rows" in capsys.readouterr().err


def test_label_defaults_strip_summary_suffix(tmp_path, capsys):
    code = main(["--summary", str(GOLDEN_SUMMARY), "--out",
                 str(tmp_path / "lbl.png"), "--self-report"])
    assert code == 0
    assert list(json.loads(capsys.readouterr().out)) == ["golden"]


def test_usage_error_without_required_flags():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2
