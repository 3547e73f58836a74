"""Acceptance suite: one test per exit criterion, each with its runtime budget.

Every test prints a single ``CRITERION n ...: PASS|FAIL`` line to the
terminal (visible without ``-s``). Run just this file with

    pytest tests/test_acceptance.py -v
"""

import json
import math
import random
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from forgeryscore import synth
from forgeryscore.cct import CueRecord, Modality, StageKind, Subtype, parse_trace, render_trace, validate
from forgeryscore.cli import main
from forgeryscore.corpus import write_ground_truth, write_predictions
from forgeryscore.embedder import RemoteEmbedder, cosine, embed_fallback
from forgeryscore.errors import EmbeddingUnavailable, ProtocolViolation
from forgeryscore.grpo import group_advantages
from forgeryscore.metrics import localization_metrics, macro_f1, pixel_scores
from forgeryscore.model import AnalysisReport, BoundingBox, GroundTruthRecord, Verdict
from forgeryscore.parser import parse_report, serialize_report
from forgeryscore.reward import (
    RewardConfig,
    count_reward,
    format_reward,
    localization_miou,
    tiered_iou_reward,
    total_reward,
)

pytestmark = pytest.mark.acceptance

DATA = Path(__file__).parent / "data"
F, A = Verdict.FORGED, Verdict.AUTHENTIC


def check(capsys, n, title, limit, body):
    t0 = time.perf_counter()
    err = None
    try:
        body()
    except AssertionError as e:
        err = e
    dt = time.perf_counter() - t0
    if err is None and dt > limit:
        err = AssertionError(f"took {dt:.2f}s, budget {limit}s")
    status = "PASS" if err is None else "FAIL"
    detail = "" if err is None else " :: " + (str(err).splitlines() or ["assertion failed"])[0]
    with capsys.disabled():
        print(f"\nCRITERION {n} {title}: {status} ({dt:.2f}s){detail}")
    if err is not None:
        raise err


# 1 -------------------------------------------------------------------------


def test_criterion_1_mf1_reconstruction(capsys):
    rows = json.loads((DATA / "published_rows.json").read_text(encoding="utf-8"))

    def body():
        assert len(rows) == 30
        bad = []
        for r in rows:
            got = 100 * macro_f1(r["f1"] / 100, r["mf1"] / 100, r["bs_f1"] / 100)
            if abs(got - r["m_f1"]) > 0.05 + 1e-9:
                bad.append(f"{r['table']}/{r['benchmark']}/{r['method']}: {got:.3f} vs printed {r['m_f1']}")
        assert not bad, f"{len(bad)}/{len(rows)} rows off by more than 0.05: " + "; ".join(bad)

    check(capsys, 1, "M-F1 reconstruction", 1.0, body)


def test_criterion_1_worked_examples():
    for cols, printed in (((93.2, 36.7, 76.9), 68.9), ((55.6, 12.4, 53.8), 40.6), ((90.3, 31.1, 73.2), 64.9)):
        assert abs(100 * macro_f1(*(c / 100 for c in cols)) - printed) <= 0.05


# 2 -------------------------------------------------------------------------


def test_criterion_2_reward_fixtures(capsys):
    def body():
        tags = ["<think>", "</think>", "<report>", "</report>"]
        for k in range(5):
            assert format_reward(" x ".join(tags[:k])) == (0.0, 0.25, 0.5, 0.75, 1.0)[k]
        for m, expected in ((0.49, 0.0), (0.50, 0.4), (0.80, 0.4), (0.81, 0.6)):
            assert tiered_iou_reward(m, F) == expected
        assert count_reward(3, F, 3) == 0.5 and count_reward(2, F, 3) == 0.0
        assert count_reward(0, A, 0) == 0.5 and count_reward(1, A, 0) == 0.0
        gt = GroundTruthRecord("p", 200, 100, F, (BoundingBox(10, 10, 60, 40), BoundingBox(100, 20, 150, 90)), "pasted total")
        out = serialize_report(AnalysisReport(F, gt.gt_regions, gt.gt_rationale))
        b = total_reward(out, gt, RewardConfig())
        assert abs(b.r_total - 1.0) <= 1e-12, b.r_total

    check(capsys, 2, "reward formula fixtures", 1.0, body)


# 3 -------------------------------------------------------------------------


def _exact_iou(a, b):
    iw = max(0, min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return Fraction(inter, union)


def _miou_oracle(pred, gt):
    best = []
    for g in gt:
        m = Fraction(0)
        for p in pred:
            m = max(m, _exact_iou(p, g))
        best.append(float(m))
    return math.fsum(best) / len(best)


def _int_box(rng, size=100):
    x0, x1 = sorted(rng.sample(range(size + 1), 2))
    y0, y1 = sorted(rng.sample(range(size + 1), 2))
    return (x0, y0, x1, y1)


def test_criterion_3_miou_oracle(capsys):
    def body():
        rng = random.Random(3)
        for _ in range(1000):
            gt = [_int_box(rng) for _ in range(rng.randint(1, 6))]
            pred = [_int_box(rng) for _ in range(rng.randint(0, 6))]
            got = localization_miou([BoundingBox(*p) for p in pred], [BoundingBox(*g) for g in gt])
            assert got == _miou_oracle(pred, gt), (pred, gt)

    check(capsys, 3, "mIoU oracle equivalence", 5.0, body)


# 4 -------------------------------------------------------------------------


def _disjoint_boxes(rng, k, size=64):
    out = []
    while len(out) < k:
        b = _int_box(rng, size)
        if all(_exact_iou(b, o) == 0 for o in out):
            out.append(b)
    return out


def _area(b):
    return (b[2] - b[0]) * (b[3] - b[1])


def _inter(a, b):
    return max(0, min(a[2], b[2]) - max(a[0], b[0])) * max(0, min(a[3], b[3]) - max(a[1], b[1]))


def test_criterion_4_pixel_oracle(capsys):
    def body():
        s = pixel_scores([BoundingBox(0, 0, 20, 20)], [BoundingBox(0, 0, 10, 10)], 20, 20)
        assert (s.iou, s.f1) == (0.25, 0.4)
        rng = random.Random(4)
        corpus, ious, f1s = [], [], []
        for i in range(500):
            gt = _disjoint_boxes(rng, rng.randint(1, 3))
            pred = _disjoint_boxes(rng, rng.randint(0, 3))
            # boxes are disjoint within each side, so pairwise overlaps never double count
            inter = sum(_inter(p, g) for p in pred for g in gt)
            area_p, area_g = sum(map(_area, pred)), sum(map(_area, gt))
            iou, f1 = float(Fraction(inter, area_p + area_g - inter)), float(Fraction(2 * inter, area_p + area_g))
            rec = GroundTruthRecord(f"i{i}", 64, 64, F, tuple(BoundingBox(*g) for g in gt), "")
            pboxes = [BoundingBox(*p) for p in pred]
            assert localization_metrics([(pboxes, rec)]) == (iou, f1), (pred, gt)
            corpus.append((pboxes, rec))
            ious.append(iou)
            f1s.append(f1)
        assert localization_metrics(corpus) == (math.fsum(ious) / 500, math.fsum(f1s) / 500)

    check(capsys, 4, "pixel-metric oracle", 10.0, body)


# 5 -------------------------------------------------------------------------


def test_criterion_5_grpo_properties(capsys):
    def body():
        rng = np.random.default_rng(5)
        for i in range(1000):
            g = int(rng.integers(2, 17))
            if i % 10 == 0:
                rewards = [float(rng.random())] * g
                assert group_advantages(rewards) == [0.0] * g
                continue
            rewards = [float(x) for x in rng.random(g)]
            adv = group_advantages(rewards)
            assert abs(math.fsum(adv) / g) <= 1e-9 * g
            c = float(rng.uniform(-5, 5))
            shifted = group_advantages([r + c for r in rewards])
            assert max(abs(a - b) for a, b in zip(adv, shifted)) <= 1e-9
        adv = group_advantages([1, 2, 3], 1e-9)
        assert all(abs(a - e) <= 1e-4 for a, e in zip(adv, (-1.2247, 0.0, 1.2247)))

    check(capsys, 5, "GRPO properties", 1.0, body)


# 6 -------------------------------------------------------------------------

_ALPHABET = "abcXYZ 0123<>/\\\"'{}[]\n\té中😀"
_VERDICT_TEXTS = {F: ["HIGH INDICATION OF FORGERY", "forged", "Tampered"], A: ["AUTHENTIC", "genuine", "NO INDICATION OF FORGERY"]}


def _random_report(rng):
    verdict = rng.choice((F, A))
    boxes = []
    for _ in range(rng.randint(0, 5)):
        x0, y0 = rng.uniform(0, 4000), rng.uniform(0, 4000)
        boxes.append(BoundingBox(x0, y0, x0 + rng.uniform(1e-3, 1000), y0 + rng.uniform(1e-3, 1000)))
    rationale = "".join(rng.choice(_ALPHABET) for _ in range(rng.randint(0, 60)))
    if rng.random() < 0.1:
        rationale += "</report><think>"
    return AnalysisReport(verdict, tuple(boxes), rationale, rng.choice(_VERDICT_TEXTS[verdict]))


def test_criterion_6_parser_round_trip(capsys):
    def body():
        rng = random.Random(6)
        for _ in range(1000):
            r = _random_report(rng)
            out = serialize_report(r)
            assert parse_report(out) == r
            assert format_reward(out) == 1.0

    check(capsys, 6, "parser round-trip", 2.0, body)


# 7 -------------------------------------------------------------------------

BOX = BoundingBox(100, 50, 200, 80)
V1 = CueRecord("V1", Modality.VISUAL, Subtype.LOCAL, "font weight differs in the average", 0.92)
L1 = CueRecord("L1", Modality.LOGICAL, Subtype.INTERNAL, "average .381 contradicts 135/480", 0.88)
LOW = CueRecord("L2", Modality.LOGICAL, Subtype.SCENARIO, "slight yellowing", 0.2)


def _codes(trace_text, report):
    return [f.code for f in validate(parse_trace(trace_text), report).findings]


def test_criterion_7_cct_validation(capsys):
    forged = AnalysisReport(F, (BOX,), "average does not match")
    authentic = AnalysisReport(A, (), "consistent")

    def body():
        golden = render_trace([V1, L1, LOW], [("V1", BOX), ("L1", BOX)], ocr=[("AVG .381", BOX)], caption="a card", synthesis="x")
        assert _codes(golden, forged) == []
        no_stage1 = [k for k in StageKind if k is not StageKind.KNOWLEDGE_PREPARATION]
        assert _codes(render_trace([LOW], [], stage_order=no_stage1), authentic) == ["STAGE_MISSING"]
        swapped = [StageKind(k) for k in (1, 3, 2, 4, 5, 6)]
        assert _codes(render_trace([LOW], [], stage_order=swapped), authentic) == ["STAGE_ORDER"]
        assert _codes(render_trace([LOW], []), AnalysisReport(F, (), "r")) == ["VERDICT_REGION_MISMATCH"]
        assert _codes(render_trace([V1], [("V1", BOX)]), authentic) == ["VERDICT_REGION_MISMATCH"]
        assert _codes(render_trace([LOW], [], high_value=["V9"]), authentic) == ["DANGLING_CUE_REF"]

    check(capsys, 7, "CCT validation suite", 1.0, body)


# 8 -------------------------------------------------------------------------


def test_criterion_8_embedder_contract(capsys, stub_server):
    golden = json.loads((DATA / "golden_embeddings.json").read_text(encoding="utf-8"))["vectors"]

    def body():
        assert len(golden) == 20
        for row in golden:
            v = embed_fallback(row["text"], row["dim"])
            assert {str(i): x.hex() for i, x in enumerate(v.components) if x != 0.0} == row["nonzero"], row["text"]
            assert cosine(v, v) == 1.0
        stub_server.mode = "echo"
        vecs = RemoteEmbedder(stub_server.url, batch_size=2, backoff=0.0).embed(["a b", "ccc", "d"])
        assert [v.components for v in vecs] == [(3.0, 1.0, 2.0), (3.0, 1.0, 1.0), (1.0, 1.0, 1.0)]
        stub_server.mode, stub_server.requests = "fail", 0
        with pytest.raises(EmbeddingUnavailable):
            RemoteEmbedder(stub_server.url, attempts=3, backoff=0.01).embed(["x"])
        assert stub_server.requests == 3
        stub_server.mode = "mixed"
        with pytest.raises(ProtocolViolation):
            RemoteEmbedder(stub_server.url).embed(["a", "b"])

    check(capsys, 8, "embedder determinism and contract", 5.0, body)


# 9 -------------------------------------------------------------------------


def test_criterion_9_end_to_end_determinism(capsys, tmp_path):
    gts, preds = synth.corpus(200, seed=9)
    g, p = tmp_path / "gt.jsonl", tmp_path / "pred.jsonl"
    write_ground_truth(g, gts)
    write_predictions(p, preds)

    def evaluate(name, jobs):
        out = tmp_path / name
        assert main(["evaluate", "--pred", str(p), "--gt", str(g), "--out", str(out), "--jobs", str(jobs)]) == 0
        return out.read_bytes()

    def body():
        first = evaluate("a.json", 1)
        assert evaluate("b.json", 1) == first
        assert evaluate("c.json", 8) == first
        assert json.loads(first)["metrics"]["n_samples"] == 200

    check(capsys, 9, "end-to-end determinism", 30.0, body)
    capsys.readouterr()
