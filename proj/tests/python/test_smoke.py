import json
from pathlib import Path

import pytest

import tsnwcd

ROOT = Path(__file__).resolve().parents[2]
CORPUS = ROOT / "corpus"
FIXTURE = ROOT / "tests" / "fixtures" / "three_tc"


def test_analyze_both_mechanisms():
    cbs = tsnwcd.analyze(CORPUS / "tc" / "TC1", "cbs")
    cqf = tsnwcd.analyze(CORPUS / "tc" / "TC1", "CQF")
    assert len(cbs["flows"]) == len(cqf["flows"]) == 20
    assert all(f["wcd_us"] > 0 for f in cqf["flows"])


def test_unknown_mechanism_raises():
    with pytest.raises(ValueError):
        tsnwcd.analyze(CORPUS / "tc" / "TC1", "tas")


def test_generate_matches_shipped_corpus(tmp_path):
    names = tsnwcd.generate(str(CORPUS / "manifest.json"), str(tmp_path), 2)
    assert len(names) == 30
    for name in ("TC1", "TC30"):
        for f in (CORPUS / "tc" / name).iterdir():
            assert (tmp_path / name / f.name).read_bytes() == f.read_bytes()


def test_analyze_corpus_and_simulate(tmp_path):
    results = tsnwcd.analyze_corpus(CORPUS / "tc", tmp_path, "cbs", 2)
    assert len(results) == 30 and all(r["error"] is None for r in results)
    report = json.loads((tmp_path / "TC3.json").read_text())
    bounds = {f["id"]: f["wcd_us"] for f in report["flows"]}
    sim = tsnwcd.simulate(CORPUS / "tc" / "TC3", "cbs", seed=2, horizon_us=50000, release="jittered")
    assert sim["flows"]
    for f in sim["flows"]:
        assert f["max_delay_us"] <= bounds[f["id"]]


def test_prompt_and_parse():
    prompt = tsnwcd.build_prompt(str(CORPUS / "tc" / "TC2"), "cqf")
    assert "compute the Hypercycle" in prompt
    p = tsnwcd.parse_prediction('{"F0": 10, "F1": 0}', "TC2", [0, 1])
    assert p["failure_mode"] == "ok"


def test_score_open_fixture():
    truths = [json.loads(p.read_text()) for p in sorted((FIXTURE / "truth").glob("*.json"))]
    outputs = [(p.stem, p.read_text()) for p in sorted((FIXTURE / "pred").glob("*.txt"))]
    score = tsnwcd.score_open(truths, outputs, min_answered_tcs=3)
    assert score["mae_us"]["mean"] == pytest.approx(18.5)
    assert not score["suppressed"]


def test_mcqa_and_calibration():
    items = [{"id": "1", "question": "?", "options": ["a", "b"], "correct": 0}]
    runs = [{"id": "1", "runs": [{"answer": "A", "confidence": 1.0}]}]
    out = tsnwcd.score_mcqa(items, runs)
    assert out["mcqa"]["accuracy_pct"] == 100
    assert out["calibration"]["ece"] == 0
    cal = tsnwcd.calibration([(0.9, False)] * 4)
    assert cal["cw_rate_pct"] == 100
