"""TSN worst-case delay analysis, test-case generation and benchmark scoring."""

import json as _json

from . import _core
from ._core import TsnwcdError, build_prompt, generate

__all__ = [
    "TsnwcdError",
    "analyze",
    "analyze_corpus",
    "build_prompt",
    "calibration",
    "generate",
    "parse_prediction",
    "score_mcqa",
    "score_open",
    "simulate",
]


def analyze(tc_dir, mechanism=None):
    """Ground-truth report for the bundle in ``tc_dir``."""
    return _json.loads(_core.analyze(str(tc_dir), mechanism))


def analyze_corpus(root, out_dir, mechanism=None, jobs=0):
    return _json.loads(_core.analyze_corpus(str(root), str(out_dir), mechanism, jobs))


def simulate(tc_dir, mechanism=None, seed=1, horizon_us=50000.0, release="synchronized", best_effort=False):
    return _json.loads(_core.simulate(str(tc_dir), mechanism, seed, horizon_us, release, best_effort))


def parse_prediction(text, testcase, flow_ids):
    return _json.loads(_core.parse_prediction(text, testcase, list(flow_ids)))


def score_open(truths, outputs, min_answered_tcs=50):
    """Score raw model outputs.

    ``truths`` is a list of analysis reports, ``outputs`` a list of
    ``(testcase, text)`` pairs; repeated test cases count as runs.
    """
    return _json.loads(_core.score_open(_json.dumps(truths), list(outputs), min_answered_tcs))


def score_mcqa(items, runs, bins=10):
    """``items`` is a list of item dicts, ``runs`` a list of run records."""
    jsonl = "".join(_json.dumps(r) + "\n" for r in runs)
    return _json.loads(_core.score_mcqa(_json.dumps(items), jsonl, bins))


def calibration(samples, bins=10):
    """``samples`` is a list of ``(confidence, correct)`` pairs."""
    return _json.loads(_core.calibration([(float(c), bool(ok)) for c, ok in samples], bins))
