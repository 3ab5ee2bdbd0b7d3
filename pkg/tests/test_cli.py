from __future__ import annotations

import json
from pathlib import Path

import pytest

from camnet.cli import main

from conftest import fixture_path


def run(argv: list[str], capsys) -> tuple[int, dict | None, str]:
    code = main(argv)
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip().startswith("{") else None), err


# ---------------------------------------------------------------------------
# verify-lie
# ---------------------------------------------------------------------------


def test_verify_lie_default_systems_pass(capsys) -> None:
    code, report, err = run(["verify-lie", "--samples", "3"], capsys)
    assert code == 0
    assert report["ok"] and report["schema"] == "camnet/1"
    assert "cv_G2" in report["families"] and "chevalley_D4" in report["families"]
    assert all(line.startswith("PASS") for line in err.strip().splitlines())


def test_verify_lie_filtered_to_a2_cv(capsys) -> None:
    code, report, _ = run(["verify-lie", "--systems", "A2", "--families", "cv"], capsys)
    assert code == 0
    assert list(report["families"]) == ["cv_A2"]
    assert report["families"]["cv_A2"]["passed"] == 20


def test_verify_lie_a2_runs_only_a2(capsys) -> None:
    _, report, _ = run(["verify-lie", "--systems", "A2", "--samples", "2"], capsys)
    assert {f["system"] for f in report["families"].values()} == {"A2"}


def test_verify_lie_corrupted_constants_fail_jacobi(capsys) -> None:
    code, report, err = run(
        ["verify-lie", "--families", "chevalley", "--systems", "A2", "--structure-constants", "builtin:corrupted_a2_constants"],
        capsys,
    )
    assert code == 1
    fam = report["families"]["chevalley_A2"]
    assert fam["failed"] > 0
    assert all("jacobi" in f.lower() for f in fam["failures"])
    assert "FAIL chevalley_A2" in err


def test_verify_lie_as_stated_g2_fails(capsys) -> None:
    code, report, _ = run(["verify-lie", "--systems", "G2", "--families", "cv", "--samples", "3", "--as-stated"], capsys)
    assert code == 1
    assert report["families"]["cv_G2"]["failed"] == 3


def test_unknown_system_is_input_error(capsys) -> None:
    code, _, err = run(["verify-lie", "--systems", "E8"], capsys)
    assert code == 2
    assert "E8" in err


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------


def test_trace_bnr(tmp_path: Path, capsys) -> None:
    svg, graph = tmp_path / "bnr.svg", tmp_path / "bnr.json"
    code, summary, _ = run(["trace", "--config", "builtin:bnr_sl3", "--svg", str(svg), "--graph", str(graph)], capsys)
    assert code == 0
    assert len(summary["joints"]) == 2
    assert summary["acyclic"]
    assert summary["census"] == {"branch->puncture": 6, "joint->puncture": 2}
    assert svg.read_text().startswith("<svg")
    assert json.loads(graph.read_text())["schema"] == "camnet/1"


def test_trace_refuses_condition_r_violation(capsys) -> None:
    code, report, err = run(["trace", "--config", "builtin:condition_r_violation"], capsys)
    assert code == 2
    assert report["ok"] is False
    assert any(not d["ok"] for d in report["condition_R"])
    assert "input error" in err


def test_malformed_json_reports_position(tmp_path: Path, capsys) -> None:
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "group": "SL2",\n  "char_poly": {\n}')
    code, _, err = run(["trace", "--config", str(bad)], capsys)
    assert code == 2
    assert "line 4" in err


def test_missing_file_is_input_error(tmp_path: Path, capsys) -> None:
    code, _, _ = run(["trace", "--config", str(tmp_path / "nope.json")], capsys)
    assert code == 2


def test_non_positive_tolerance_is_rejected(capsys) -> None:
    with pytest.raises(SystemExit) as exc:
        main(["nonab", "--network", "builtin:bnr_sl3_network", "--tol.flatness", "0"])
    assert exc.value.code == 2
    capsys.readouterr()


# ---------------------------------------------------------------------------
# scatter, nonab, pd-check
# ---------------------------------------------------------------------------


def test_scatter_a3_fixture(capsys) -> None:
    code, report, _ = run(["scatter", "--config", "builtin:a3_interleaved"], capsys)
    assert code == 0
    assert report["residualZero"] and report["start_independent"]
    forms = report["closed_forms"]
    assert forms["commutator_ab"] and forms["commutator_bc"] and forms["triple_corrected"]
    assert forms["triple_as_stated"] is False


def test_nonab_bnr_all_green(tmp_path: Path, capsys) -> None:
    mono = tmp_path / "mono.json"
    code, report, _ = run(["nonab", "--network", "builtin:bnr_sl3_network", "--out", str(mono)], capsys)
    assert code == 0
    assert report["s_check"]["ok"]
    assert all(v < 1e-8 for v in report["flatness"].values())
    assert report["relation_residual"] < 1e-8
    data = json.loads(mono.read_text())
    assert [g["name"] for g in data["generators"]] == ["puncture:inf"]


def test_nonab_rejects_bad_system(tmp_path: Path, capsys) -> None:
    ls = {"rep": "SL3", "generators": [{"name": f"branch:{k}", "matrix": [[[1, 0], [0, 0], [0, 0]], [[0, 0], [1, 0], [0, 0]], [[0, 0], [0, 0], [1, 0]]]} for k in range(2)]}
    path = tmp_path / "ls.json"
    path.write_text(json.dumps(ls))
    code, report, _ = run(["nonab", "--network", "builtin:bnr_sl3_network", "--system", str(path)], capsys)
    assert code == 1
    assert not report["s_check"]["ok"]


def test_pd_check_gl2(capsys) -> None:
    code, report, _ = run(["pd-check", "--network", "builtin:three_pole_gl2_network", "--samples", "2"], capsys)
    assert code == 0
    assert report["max_deviation"] < 1e-8
    assert len(report["runs"]) == 2


def test_pd_check_corrupted_fails(capsys) -> None:
    code, report, _ = run(["pd-check", "--network", "builtin:bnr_gl3_network", "--corrupt", "0"], capsys)
    assert code == 1
    assert report["max_deviation"] > 1e-2


def test_config_is_not_a_network_graph(capsys) -> None:
    code, _, err = run(["nonab", "--network", str(fixture_path("bnr_sl3"))], capsys)
    assert code == 2
    assert "network graph" in err


# ---------------------------------------------------------------------------
# Determinism
# ---------------------------------------------------------------------------


def test_outputs_are_byte_identical(tmp_path: Path, capsys) -> None:
    blobs = []
    for k in range(2):
        d = tmp_path / str(k)
        d.mkdir()
        assert main(["trace", "--config", "builtin:bnr_sl3", "--svg", str(d / "n.svg"), "--graph", str(d / "g.json"), "--out", str(d / "s.json")]) == 0
        assert main(["nonab", "--network", str(d / "g.json"), "--seed", "4", "--report", str(d / "r.json")]) == 0
        assert main(["verify-lie", "--systems", "B2", "--samples", "3", "--seed", "9", "--out", str(d / "v.json")]) == 0
        blobs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    capsys.readouterr()
    assert blobs[0] == blobs[1]
    assert set(blobs[0]) == {"n.svg", "g.json", "s.json", "r.json", "v.json"}
