"""Evaluation metrics against brute-force oracles, plus the crossvalidation
grid driven by an oracle decoder stub."""

import numpy as np
import pytest
from oracles import brute_force_matching

from odocount import evaluation as ev
from odocount.config import PipelineConfig
from odocount.odo import Event, Transcript
from odocount.scene import LabeledScene, SceneConfig, generate_scene


def tr(pairs):
    return Transcript.from_events([Event(on, dur) for on, dur in pairs])


class TestMatchEvents:
    def test_identical_transcripts_match_perfectly(self):
        t = tr([(0.1, 0.1), (0.5, 0.08), (0.52, 0.2)])
        matching = ev.match_events(t, t)
        assert len(matching) == len(t)

    def test_onset_beyond_tolerance_unmatched(self):
        truth = tr([(1.000, 0.1)])
        est = tr([(1.030, 0.1)])  # 30 ms > 25 ms
        assert ev.match_events(est, truth) == []
        est_ok = tr([(1.024, 0.1)])
        assert len(ev.match_events(est_ok, truth)) == 1

    def test_duration_tolerance_relative_to_truth(self):
        truth = tr([(1.0, 0.1)])
        assert len(ev.match_events(tr([(1.0, 0.151)]), truth)) == 0
        assert len(ev.match_events(tr([(1.0, 0.149)]), truth)) == 1
        assert len(ev.match_events(tr([(1.0, 0.051)]), truth)) == 1

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(0)
        cfg = ev.MatchConfig()
        for _ in range(25):
            n_e, n_t = rng.integers(0, 7), rng.integers(0, 7)
            est = tr([(rng.uniform(0, 0.5), rng.uniform(0.05, 0.15)) for _ in range(n_e)])
            truth = tr([(rng.uniform(0, 0.5), rng.uniform(0.05, 0.15)) for _ in range(n_t)])
            got = ev.match_events(est, truth, cfg)
            got_dev = sum(abs(est.events[i].onset_seconds - truth.events[j].onset_seconds)
                          for i, j in got)
            want_size, want_dev = brute_force_matching(est.events, truth.events, cfg)
            assert len(got) == want_size
            assert got_dev == pytest.approx(want_dev, abs=1e-12)

    def test_one_to_one(self):
        truth = tr([(1.0, 0.1)])
        est = tr([(0.999, 0.1), (1.001, 0.1)])
        assert len(ev.match_events(est, truth)) == 1

    def test_loosening_tolerance_never_shrinks_matching(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            est = tr([(rng.uniform(0, 1), rng.uniform(0.05, 0.2)) for _ in range(5)])
            truth = tr([(rng.uniform(0, 1), rng.uniform(0.05, 0.2)) for _ in range(5)])
            tight = ev.match_events(est, truth, ev.MatchConfig(0.01, 0.2))
            loose = ev.match_events(est, truth, ev.MatchConfig(0.05, 0.8))
            assert len(loose) >= len(tight)


class TestFMeasure:
    def test_perfect(self):
        assert ev.f_measure(3, 3, 3) == (1.0, 1.0, 1.0)

    def test_empty_matching(self):
        assert ev.f_measure(0, 5, 7) == (0.0, 0.0, 0.0)
        assert ev.f_measure(0, 0, 0) == (0.0, 0.0, 0.0)

    def test_arithmetic(self):
        p, r, f = ev.f_measure(3, 4, 6)
        assert (p, r) == (0.75, 0.5)
        assert f == pytest.approx(0.6)

    def test_order_invariance(self):
        rng = np.random.default_rng(2)
        events = [(rng.uniform(0, 1), rng.uniform(0.05, 0.2)) for _ in range(6)]
        truth = tr(events)
        est_sorted = tr(events)
        est_shuffled = Transcript.from_events(
            [Event(on, dur) for on, dur in reversed(events)])
        m1 = ev.match_events(est_sorted, truth)
        m2 = ev.match_events(est_shuffled, truth)
        assert ev.f_measure(m1, 6, 6) == ev.f_measure(m2, 6, 6)


class TestRmsCountError:
    def test_exact_match_is_zero(self):
        assert ev.rms_count_error([3.0, 4.0], [3.0, 4.0]) == 0.0

    def test_arithmetic(self):
        assert ev.rms_count_error([1.0, 3.0], [2.0, 2.0]) == 1.0

    def test_matches_formula_oracle(self):
        rng = np.random.default_rng(3)
        e, t = rng.random(40), rng.random(40)
        want = float(np.sqrt(np.mean((e - t) ** 2)))
        assert ev.rms_count_error(e, t) == pytest.approx(want, abs=1e-12)

    def test_constant_offset_detected_exactly(self):
        truths = np.full(12, 5.0)
        assert ev.rms_count_error(truths + 1.75, truths) == pytest.approx(1.75)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ev.rms_count_error([1.0], [1.0, 2.0])


class TestWindowSpans:
    def test_partial_final_window_included(self):
        spans = ev.window_spans(25.0, 10.0)
        assert spans == [(0.0, 10.0), (10.0, 20.0), (20.0, 25.0)]

    def test_exact_division(self):
        assert ev.window_spans(20.0, 10.0) == [(0.0, 10.0), (10.0, 20.0)]

    def test_counts_partition_events(self):
        rng = np.random.default_rng(4)
        t = tr([(rng.uniform(0, 25), 0.1) for _ in range(50)])
        spans = ev.window_spans(25.5, 10.0)
        counts = ev.transcript_window_counts(t, spans)
        assert counts.sum() == 50


class OracleDecoder:
    """Decoder stub: every system reproduces the scene's ground truth."""

    def __init__(self, bundle, scene):
        self.scene = scene

    def transcript(self, system):
        return self.scene.truth

    def window_counts(self, system, spans):
        return ev.transcript_window_counts(self.scene.truth, spans)


class TestCrossvalidate:
    @pytest.fixture(scope="class")
    def sessions(self):
        cfg = SceneConfig(duration_seconds=30.0, rate_per_minute=60.0,
                          call_band_hz=(2000.0, 6000.0), sample_rate=16000, seed=3)
        s = generate_scene(cfg)
        return [s, s]

    def run(self, sessions, **kw):
        cfg = PipelineConfig(count_window_seconds=10.0)
        return ev.crossvalidate(sessions, cfg, train_fn=lambda scenes, c: None,
                                decoder_fn=OracleDecoder, **kw)

    def test_oracle_stub_achieves_perfect_scores(self, sessions):
        report = self.run(sessions, conditions=("matched",))
        for fold in (0, 1):
            assert report.values("odo", "matched", "f_measure") == [1.0, 1.0]
            assert report.values("odo", "matched", "rms_count_error") == [0.0, 0.0]
        assert not report.errors

    def test_grid_cardinality(self, sessions):
        report = self.run(sessions)
        f_rows = [r for r in report.rows if r.metric == "f_measure"]
        rms_rows = [r for r in report.rows if r.metric == "rms_count_error"]
        # 4 transcription systems x 3 conditions x 2 folds
        assert len(f_rows) == 4 * 3 * 2
        # all 5 systems report counts on the full grid
        assert len(rms_rows) == 5 * 3 * 2
        cells = {(r.system, r.condition, r.fold) for r in rms_rows}
        assert len(cells) == 5 * 3 * 2

    def test_onset_count_not_evaluated_for_transcription(self, sessions):
        report = self.run(sessions)
        assert report.values("onset_count", "matched", "f_measure") == []
        assert len(report.values("onset_count", "matched", "rms_count_error")) == 2

    def test_per_system_failures_do_not_abort(self, sessions):
        class FailingSystem:
            name = "broken"
            transcribes = True

            def transcribe(self, decoder):
                raise RuntimeError("boom")

            def window_counts(self, decoder, spans):
                raise RuntimeError("boom")

        systems = ev.default_systems() + [FailingSystem()]
        with pytest.warns(UserWarning, match="broken failed"):
            report = self.run(sessions, systems=systems, conditions=("matched",))
        assert report.values("odo", "matched", "f_measure") == [1.0, 1.0]
        assert [e[0] for e in report.errors] == ["broken", "broken"]

    def test_needs_two_sessions(self, sessions):
        with pytest.raises(ValueError):
            self.run(sessions[:1])

    def test_csv_roundtrip(self, sessions, tmp_path):
        report = self.run(sessions, conditions=("matched",))
        path = tmp_path / "results.csv"
        report.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "system,condition,fold,metric,value"
        assert len(lines) == 1 + len(report.rows)
        for line, row in zip(lines[1:], report.rows):
            system, condition, fold, metric, value = line.split(",")
            assert (system, condition, int(fold), metric) == (
                row.system, row.condition, row.fold, row.metric)
            assert float(value) == row.value
