"""Acceptance criteria, one or more tests per criterion.

Test names carry the criterion number; ``conftest.py`` prints a PASS/FAIL
line per criterion in the terminal summary.
"""

import json
import random
import time
import unicodedata
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import rankdata

from halluspan.anchoring import anchor_phrase
from halluspan.cli import main
from halluspan.evaluation import char_iou, soft_correlation, spearman
from halluspan.model import CharSpan, SoftLabel, load_dataset, load_predictions, write_predictions
from halluspan.parsing import ParseError, parse_pipe_list, parse_prob_json
from halluspan.spans import (
    ResponseIntervals,
    aggregate_uniform,
    aggregate_weighted,
    merge_intervals,
    threshold_hard_labels,
)

from oracles import merge_oracle, spearman_oracle

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).parent / "fixtures"
E2E = FIXTURES / "e2e"

CRITERIA = {
    1: "headline numbers documented as not reproducible",
    2: "span algebra matches brute-force oracles on 1000 instances (<5 s)",
    3: "worked aggregation values within 1e-9",
    4: "strict > 0.5 threshold",
    5: "IoU and rank-correlation checks",
    6: "end-to-end replay determinism, golden output and reference report (<30 s)",
    7: "multi-byte offsets round-trip; Germany anchors at (24,31)",
    8: "parser fixture corpus",
}


# -- 1 ----------------------------------------------------------------------

def test_criterion_1_limitation_documented():
    readme = (ROOT / "README.md").read_text(encoding="utf-8")
    assert "0.5310" in readme and "0.5669" in readme
    assert "not reproducible" in readme.lower()


# -- 2 ----------------------------------------------------------------------

def _random_spans(rng, length, disjoint):
    count = rng.randint(0, 4)
    if disjoint:
        cuts = sorted(rng.sample(range(length + 1), min(2 * count, length + 1)))
        return [(a, b) for a, b in zip(cuts[::2], cuts[1::2]) if a < b]
    out = []
    for _ in range(count):
        s = rng.randrange(length)
        out.append((s, rng.randint(s + 1, length)))
    return out


def _direct_uniform(merged, responses, n):
    s, e = merged
    total = 0.0
    for spans in responses:
        o = sum(max(0, min(e, b) - max(s, a)) for a, b in spans)
        total += o / (e - s)
    return total / n


def _direct_weighted(merged, responses):
    s, e = merged
    num = den = 0.0
    for spans in responses:
        for a, b, p in spans:
            o = max(0, min(e, b) - max(s, a))
            num += o * p
            den += o
    return (num / den) ** 1.2


def test_criterion_2_span_algebra_oracles():
    rng = random.Random(20250)
    started = time.perf_counter()
    for _ in range(1000):
        length = rng.randint(1, 64)
        n = rng.randint(1, 5)

        raw = [_random_spans(rng, length, disjoint=False) for _ in range(n)]
        plain = [ResponseIntervals.from_items((CharSpan(a, b), None) for a, b in r) for r in raw]
        assert [(m.start, m.end) for m in merge_intervals(plain)] == merge_oracle(raw, length)

        disjoint = [_random_spans(rng, length, disjoint=True) for _ in range(n)]
        plain = [ResponseIntervals.from_items((CharSpan(a, b), None) for a, b in r) for r in disjoint]
        for m in merge_intervals(plain):
            got = aggregate_uniform(m, plain, n)
            assert abs(got - _direct_uniform((m.start, m.end), disjoint, n)) <= 1e-12

        scored_raw = [[(a, b, rng.uniform(0.01, 1.0)) for a, b in r] for r in disjoint]
        scored = [ResponseIntervals.from_items((CharSpan(a, b), p) for a, b, p in r) for r in scored_raw]
        for m in merge_intervals(scored):
            got = aggregate_weighted(m, scored)
            assert abs(got - _direct_weighted((m.start, m.end), scored_raw)) <= 1e-12
    assert time.perf_counter() - started < 5.0


# -- 3 ----------------------------------------------------------------------

def _scored(*items):
    return ResponseIntervals.from_items((CharSpan(s, e), p) for s, e, p in items)


def test_criterion_3_uniform_worked_value():
    plain = [ResponseIntervals.from_items([(CharSpan(0, 10), None)]), ResponseIntervals.from_items([(CharSpan(0, 5), None)])]
    assert abs(aggregate_uniform(CharSpan(0, 10), plain, 2) - 0.75) <= 1e-9


def test_criterion_3_weighted_worked_values():
    two = aggregate_weighted(CharSpan(0, 10), [_scored((0, 10, 0.8)), _scored((0, 5, 0.4))])
    assert abs(two - (10 / 15) ** 1.2) <= 1e-9
    assert round(two, 4) == 0.6147
    one = aggregate_weighted(CharSpan(0, 7), [_scored((0, 7, 0.5))])
    assert abs(one - 0.5**1.2) <= 1e-9
    assert round(one, 4) == 0.4353


# -- 4 ----------------------------------------------------------------------

def test_criterion_4_strict_threshold():
    assert threshold_hard_labels([SoftLabel(CharSpan(0, 3), 0.5)], 0.5) == []
    assert threshold_hard_labels([SoftLabel(CharSpan(0, 3), 0.5 + 1e-9)], 0.5) == [CharSpan(0, 3)]


# -- 5 ----------------------------------------------------------------------

def test_criterion_5_iou():
    assert abs(char_iou([CharSpan(0, 5)], [CharSpan(2, 7)], 10) - 3 / 7) <= 1e-12
    assert char_iou([], [], 10) == 1.0


def test_criterion_5_correlation_oracle_and_invariance():
    rng = random.Random(5)
    levels = [0.1, 0.2, 0.3, 0.5, 0.8, 1.0]
    for _ in range(500):
        n = rng.randint(2, 40)
        pred, gold = [], []
        pv, gv = [0.0] * n, [0.0] * n
        for labels, vec in ((pred, pv), (gold, gv)):
            for _ in range(rng.randint(0, 5)):
                s = rng.randrange(n)
                e = rng.randint(s + 1, n)
                p = rng.choice(levels)
                labels.append(SoftLabel(CharSpan(s, e), p))
                for i in range(s, e):
                    vec[i] = max(vec[i], p)
        assert abs(soft_correlation(pred, gold, n) - spearman_oracle(pv, gv)) <= 1e-9

        x = np.array(pv)
        y = np.array(gv)
        transformed = np.exp(4 * x) - 0.5
        assert np.array_equal(rankdata(x), rankdata(transformed))
        if np.ptp(x) > 0 and np.ptp(y) > 0:
            assert spearman(transformed, y) == spearman(x, y)


# -- 6 ----------------------------------------------------------------------

def test_criterion_6_end_to_end_determinism(tmp_path):
    started = time.perf_counter()
    samples = load_dataset(E2E / "dataset.jsonl")
    langs = {s.lang for s in samples}
    assert len(samples) >= 10 and len(langs) >= 3 and "zh" in langs

    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["run", str(E2E / "config.json"), "--output", str(first)]) == 0
    assert main(["run", str(E2E / "config.json"), "--output", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert first.read_bytes() == (E2E / "golden_mscgh.jsonl").read_bytes()

    report, table = tmp_path / "r.jsonl", tmp_path / "t.txt"
    status = main(["score", str(E2E / "golden_mscgh.jsonl"), str(E2E / "dataset.jsonl"),
                   "--report", str(report), "--table", str(table)])
    assert status == 0
    assert report.read_bytes() == (E2E / "reference_mscgh.jsonl").read_bytes()
    assert table.read_bytes() == (E2E / "reference_mscgh.txt").read_bytes()
    assert time.perf_counter() - started < 30.0


# -- 7 ----------------------------------------------------------------------

def test_criterion_7_multibyte_round_trip(tmp_path):
    samples = {s.id: s for s in load_dataset(E2E / "dataset.jsonl")}
    golden = {p.id: p for p in load_predictions(E2E / "golden_mscgh.jsonl")}
    text = samples["en-3"].model_output_text
    assert "ï" in text
    spans = [l.span for l in golden["en-3"].soft_labels]
    assert [text[s.start : s.end] for s in spans] == ["Naïve", "1999"]
    zh = samples["zh-1"].model_output_text
    assert [zh[s.start : s.end] for s in golden["zh-1"].hard_labels] == ["柏林"]
    es = samples["es-1"].model_output_text
    assert unicodedata.normalize("NFC", es[27:33]) == "Sídney"

    path = tmp_path / "rt.jsonl"
    preds = list(golden.values())
    write_predictions(preds, path)
    assert load_predictions(path) == preds


def test_criterion_7_germany_anchor():
    assert anchor_phrase("Paris is the capital of Germany", "Germany").span == CharSpan(24, 31)


# -- 8 ----------------------------------------------------------------------

def test_criterion_8_parser_corpus():
    corpus = json.loads((FIXTURES / "parser_corpus.json").read_text(encoding="utf-8"))
    assert len(corpus) >= 12
    parsers = {"pipe": parse_pipe_list, "prob": parse_prob_json}
    for case in corpus:
        parser = parsers[case["parser"]]
        if case["expected"] == "error":
            with pytest.raises(ParseError):
                parser(case["raw"])
            continue
        assert [list(item) for item in parser(case["raw"]).items] == case["expected"], case["name"]
