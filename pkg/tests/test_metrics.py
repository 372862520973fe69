import pytest

from lsqmamot.geometry import DetectionBox
from lsqmamot.metrics import (MetricsError, evaluate, match_frame,
                              merge_reports)
from lsqmamot.scenario import TrackRecord


def box(x, y=0.0, score=1.0):
    return DetectionBox(x=x, y=y, z=0.75, yaw=0.0, h=1.5, w=2.0, l=4.0,
                        score=score)


def rec(frame, track_id, x, y=0.0, score=1.0):
    return TrackRecord(frame=frame, track_id=track_id,
                       box=box(x, y, score=score), confirmed=True)


class TestMatchFrame:
    def test_perfect_frame(self):
        gt = [(0, box(0.0)), (1, box(20.0))]
        preds = [(1, box(0.0)), (2, box(20.0))]
        fm = match_frame(gt, preds, 0.25)
        assert (fm.tp, fm.fp, fm.fn, fm.idsw) == (2, 0, 0, 0)
        assert fm.matched_ious == (1.0, 1.0)

    def test_no_predictions(self):
        gt = [(0, box(0.0)), (1, box(20.0))]
        fm = match_frame(gt, [], 0.25)
        assert (fm.tp, fm.fp, fm.fn, fm.idsw) == (0, 0, 2, 0)

    def test_identity_switch_definition(self):
        gt = [(0, box(0.0))]
        last = {}
        fm1 = match_frame(gt, [(1, box(0.0))], 0.25, last)
        fm2 = match_frame(gt, [(2, box(0.0))], 0.25, last)
        assert fm1.idsw == 0 and fm2.idsw == 1

    def test_idsw_counted_across_gaps(self):
        gt = [(0, box(0.0))]
        last = {}
        match_frame(gt, [(1, box(0.0))], 0.25, last)
        match_frame(gt, [], 0.25, last)          # object unmatched this frame
        fm = match_frame(gt, [(2, box(0.0))], 0.25, last)
        assert fm.idsw == 1

    def test_gate_applies(self):
        fm = match_frame([(0, box(0.0))], [(1, box(3.5))], 0.25)
        assert (fm.tp, fm.fp, fm.fn) == (0, 1, 1)


class TestEvaluate:
    def make_gt(self, num_frames=10, num_objects=3, spacing=20.0):
        return {f: [(k, box(spacing * k)) for k in range(num_objects)]
                for f in range(num_frames)}

    def test_perfect_tracking_all_ones(self):
        gt = self.make_gt()
        records = [rec(f, k + 1, 20.0 * k)
                   for f in range(10) for k in range(3)]
        rep = evaluate(gt, records)
        assert rep.samota == pytest.approx(1.0)
        assert rep.amota == pytest.approx(1.0)
        assert rep.amotp == pytest.approx(1.0)
        assert rep.mt == pytest.approx(1.0)

    def test_no_predictions_clamps_to_zero(self):
        rep = evaluate(self.make_gt(), [])
        assert rep.samota == 0.0
        assert rep.amota == 0.0
        assert rep.amotp == 0.0
        assert rep.mt == 0.0
        assert all(lv.threshold is None and lv.smota == 0.0
                   for lv in rep.levels)

    def test_hand_enumerated_two_frame_oracle(self):
        gt = {0: [(0, box(0.0)), (1, box(20.0))],
              1: [(0, box(0.0)), (1, box(20.0))]}
        records = [
            rec(0, 1, 0.0, score=0.9),
            rec(1, 1, 0.0, score=0.9),
            rec(0, 2, 20.0, score=0.6),
            rec(1, 4, 20.0, score=0.6),          # id switch on object 1
            rec(1, 3, 100.0, y=50.0, score=0.95),  # confident false positive
        ]
        rep = evaluate(gt, records, iou_min=0.25, num_recall_points=4)

        assert [lv.target_recall for lv in rep.levels] == [0.25, 0.5, 0.75, 1.0]
        assert [lv.threshold for lv in rep.levels] == [0.9, 0.9, 0.6, 0.6]
        assert [(lv.tp, lv.fp, lv.fn, lv.idsw) for lv in rep.levels] == \
            [(2, 1, 2, 0), (2, 1, 2, 0), (4, 1, 0, 1), (4, 1, 0, 1)]
        assert [lv.smota for lv in rep.levels] == \
            pytest.approx([1.0, 0.5, 2.0 / 3.0, 0.5], abs=1e-12)
        assert [lv.mota for lv in rep.levels] == \
            pytest.approx([0.25, 0.25, 0.5, 0.5], abs=1e-12)
        assert [lv.motp for lv in rep.levels] == pytest.approx([1.0] * 4)

        assert rep.samota == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert rep.amota == pytest.approx(0.375, abs=1e-12)
        assert rep.amotp == pytest.approx(1.0, abs=1e-12)
        assert rep.mt == pytest.approx(1.0)
        assert rep.num_gt == 4

    def test_amotp_equals_matched_iou(self):
        # x-shift of 4/3 m gives IoU exactly 0.5 for a 4x2x1.5 box
        gt = self.make_gt(num_frames=5, num_objects=2)
        records = [rec(f, k + 1, 20.0 * k + 4.0 / 3.0)
                   for f in range(5) for k in range(2)]
        rep = evaluate(gt, records)
        assert rep.amotp == pytest.approx(0.5, abs=1e-9)
        assert rep.samota == pytest.approx(1.0)

    def test_samota_dominates_amota(self):
        gt = self.make_gt()
        records = [rec(f, k + 1, 20.0 * k + 0.5, score=0.5 + 0.1 * k)
                   for f in range(10) for k in range(3)]
        rep = evaluate(gt, records)
        assert rep.samota >= rep.amota
        assert 0.0 <= rep.amota <= 1.0
        assert 0.0 <= rep.samota <= 1.0

    def test_track_id_permutation_invariance(self):
        gt = self.make_gt()
        records = [rec(f, k + 1, 20.0 * k + 0.3, score=0.6 + 0.1 * k)
                   for f in range(10) for k in range(3)]
        relabeled = [TrackRecord(r.frame, r.track_id + 100, r.box, r.confirmed)
                     for r in records]
        a = evaluate(gt, records)
        b = evaluate(gt, relabeled)
        assert (a.samota, a.amota, a.amotp, a.mt) == \
            (b.samota, b.amota, b.amotp, b.mt)

    def test_low_confidence_fp_never_raises_samota(self):
        gt = self.make_gt()
        records = [rec(f, k + 1, 20.0 * k, score=0.6 + 0.1 * k)
                   for f in range(10) for k in range(3)]
        base = evaluate(gt, records)
        noisy = records + [rec(f, 99, 500.0, score=0.05) for f in range(10)]
        spiked = evaluate(gt, noisy)
        assert spiked.samota <= base.samota + 1e-12

    def test_empty_gt_is_error(self):
        with pytest.raises(MetricsError):
            evaluate({}, [])
        with pytest.raises(MetricsError):
            evaluate({0: []}, [rec(0, 1, 0.0)])

    def test_mostly_tracked_threshold(self):
        # object 1 matched 8/10 frames (>= 80%), object 2 only 5/10
        gt = self.make_gt(num_frames=10, num_objects=2)
        records = [rec(f, 1, 0.0) for f in range(8)]
        records += [rec(f, 2, 20.0) for f in range(5)]
        rep = evaluate(gt, records)
        assert rep.mt == pytest.approx(0.5)


class TestMergeReports:
    def test_gt_weighted_average(self):
        gt_small = {f: [(0, box(0.0))] for f in range(2)}       # 2 gt boxes
        gt_large = {f: [(0, box(0.0))] for f in range(8)}       # 8 gt boxes
        perfect = [rec(f, 1, 0.0) for f in range(8)]
        rep_bad = evaluate(gt_small, [])
        rep_good = evaluate(gt_large, perfect)
        merged = merge_reports([rep_bad, rep_good])
        assert merged.samota == pytest.approx(0.2 * 0.0 + 0.8 * 1.0)
        assert merged.num_gt == 10

    def test_empty_merge_is_error(self):
        with pytest.raises(MetricsError):
            merge_reports([])
