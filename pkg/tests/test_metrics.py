import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from forgeryscore.embedder import HashingEmbedder
from forgeryscore.errors import EmptyCorpus
from forgeryscore.metrics import (
    EvalSample,
    confusion,
    detection_metrics,
    localization_metrics,
    macro_f1,
    pixel_scores,
    rasterize,
    summarize,
)
from forgeryscore.model import BoundingBox, GroundTruthRecord, Verdict

F, A = Verdict.FORGED, Verdict.AUTHENTIC


def gt(sid, label, regions=(), w=20, h=20, bs=None, rationale="r"):
    return GroundTruthRecord(sid, w, h, label, tuple(regions), rationale, bs)


def test_confusion_and_f1():
    pairs = [(F, F)] * 3 + [(A, F)] + [(F, A)] * 2 + [(A, A)] * 4
    c = confusion(pairs)
    assert (c.tp, c.fn, c.fp, c.tn) == (3, 1, 2, 4)
    acc, f1 = detection_metrics(pairs)
    assert acc == 7 / 10
    assert f1 == 2 * 3 / (2 * 3 + 2 + 1)


def test_unparseable_counts_as_wrong():
    c = confusion([(None, F), (None, A)])
    assert (c.fn, c.fp) == (1, 1)


def test_f1_undefined_reports_zero_with_diagnostic():
    diag = []
    acc, f1 = detection_metrics([(A, A)], diag)
    assert (acc, f1) == (1.0, 0.0)
    assert diag


def test_detection_empty():
    with pytest.raises(EmptyCorpus):
        detection_metrics([])


def test_rasterize_half_open():
    m = rasterize([BoundingBox(1, 2, 3, 5)], 6, 6)
    assert m.shape == (6, 6)
    assert m.sum() == 2 * 3
    assert m[2:5, 1:3].all()
    # fractional edges: pixel i covered iff ceil(x0) <= i < ceil(x1)
    assert rasterize([BoundingBox(0.5, 0, 2.5, 1)], 4, 1).tolist() == [[False, True, True, False]]


def test_rasterize_clips_to_frame():
    assert rasterize([BoundingBox(15, 15, 40, 40)], 20, 20).sum() == 25


def test_worked_pixel_case():
    s = pixel_scores([BoundingBox(0, 0, 20, 20)], [BoundingBox(0, 0, 10, 10)], 20, 20)
    assert (s.iou, s.f1) == (0.25, 0.4)


def test_localization_skips_authentic():
    corpus = [
        ([BoundingBox(0, 0, 20, 20)], gt("f", F, [BoundingBox(0, 0, 10, 10)])),
        ([BoundingBox(0, 0, 5, 5)], gt("a", A)),
    ]
    assert localization_metrics(corpus) == (0.25, 0.4)
    with pytest.raises(EmptyCorpus):
        localization_metrics(corpus[1:])


def test_macro_f1_example():
    assert round(100 * macro_f1(0.932, 0.367, 0.769), 1) == 68.9


def test_summarize_bertscore_gating():
    g1 = gt("1", F, [BoundingBox(0, 0, 10, 10)], bs=0.8)
    g2 = gt("2", A, bs=None)
    samples = [EvalSample(g1, F, (BoundingBox(0, 0, 10, 10),), "r"), EvalSample(g2, A, (), "r")]
    s = summarize(samples, HashingEmbedder())
    assert s.bertscore_f1 is None and s.m_f1 is None
    assert any("BERTScore" in d for d in s.diagnostics)
    s = summarize(samples, HashingEmbedder(), css_substitute=True)
    assert s.m_f1_label == "M-F1(CSS)"
    assert s.m_f1 == pytest.approx(1.0)
    s = summarize(samples, HashingEmbedder(), bertscore={"2": 0.6})
    assert s.bertscore_f1 == pytest.approx(0.7)
    assert s.m_f1 == pytest.approx((1 + 1 + 0.7) / 3)
    assert "M-F1" in s.to_table("x")


def test_summarize_reports_clipping():
    g = gt("1", F, [BoundingBox(0, 0, 10, 10)], bs=0.5)
    s = summarize([EvalSample(g, F, (BoundingBox(5, 5, 30, 30),), "r")], HashingEmbedder())
    assert any("clipped" in d for d in s.diagnostics)


def test_table_format():
    g = gt("1", F, [BoundingBox(0, 0, 10, 10)], bs=0.5)
    s = summarize([EvalSample(g, F, (BoundingBox(0, 0, 10, 10),), "r")], HashingEmbedder())
    lines = s.to_table("m").splitlines()
    assert [c.strip() for c in lines[0].split("|")] == ["Method", "Acc", "F1", "mIoU", "mF1", "CSS", "BS(F1)", "M-F1"]
    assert lines[2].split("|")[1].strip() == "100.0"


small_box = st.tuples(st.integers(0, 15), st.integers(0, 15), st.integers(1, 8), st.integers(1, 8)).map(
    lambda t: BoundingBox(t[0], t[1], t[0] + t[2], t[1] + t[3])
)


@given(st.lists(small_box, max_size=3), st.lists(small_box, min_size=1, max_size=3))
def test_pixel_scores_match_numpy_masks(pred, gts):
    s = pixel_scores(pred, gts, 20, 20)
    pm, gm = np.zeros((20, 20), bool), np.zeros((20, 20), bool)
    for b in pred:
        pm[int(b.y0):min(20, int(b.y1)), int(b.x0):min(20, int(b.x1))] = True
    for b in gts:
        gm[int(b.y0):min(20, int(b.y1)), int(b.x0):min(20, int(b.x1))] = True
    inter, union = (pm & gm).sum(), (pm | gm).sum()
    assert s.iou == inter / union
    assert 0.0 <= s.iou <= s.f1 <= 1.0


@settings(max_examples=30)
@given(st.randoms(use_true_random=False))
def test_metrics_order_invariant(rnd):
    samples = []
    for i in range(12):
        label = F if rnd.random() < 0.6 else A
        regions = [BoundingBox(rnd.randint(0, 10), rnd.randint(0, 10), 15, 15)] if label is F else []
        pred = rnd.choice([F, A, None])
        pregions = (BoundingBox(rnd.randint(0, 10), rnd.randint(0, 10), 18, 18),) if pred is F else ()
        samples.append(EvalSample(gt(str(i), label, regions, bs=rnd.random()), pred, pregions, f"text {i % 3}"))
    if not any(s.gt.label is F for s in samples):
        return
    emb = HashingEmbedder(512)
    a = summarize(samples, emb)
    shuffled = samples[:]
    random.Random(1).shuffle(shuffled)
    b = summarize(shuffled, emb)
    assert a.to_dict() == b.to_dict()
