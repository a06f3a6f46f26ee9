"""Evaluation protocols: tolerance-matched transcription F-measure, windowed
RMS count error, and the two-fold crossvalidation grid with density-mismatch
conditions.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .scene import fold_dense

DEFAULT_SYSTEMS = ("odo", "odo_flat", "hmm", "odo_hmm", "onset_count")
CONDITIONS = ("matched", "train_dense", "test_dense")


@dataclass(frozen=True)
class MatchConfig:
    onset_tolerance_seconds: float = 0.025
    duration_ratio_tolerance: float = 0.5

    def __post_init__(self):
        if self.onset_tolerance_seconds <= 0 or self.duration_ratio_tolerance <= 0:
            raise ValueError("tolerances must be positive")


def admissible(est, truth, cfg):
    """Match rule: onset within the tolerance AND duration within the given
    fraction of the TRUE duration."""
    return (abs(est.onset_seconds - truth.onset_seconds) <= cfg.onset_tolerance_seconds
            and abs(est.duration_seconds - truth.duration_seconds)
            <= cfg.duration_ratio_tolerance * truth.duration_seconds)


def match_events(estimated, truth, cfg=None):
    """Maximum-cardinality one-to-one matching over admissible pairs, breaking
    ties by minimum total onset deviation. Returns [(est_idx, truth_idx)]."""
    if cfg is None:
        cfg = MatchConfig()
    n_e, n_t = len(estimated), len(truth)
    if n_e == 0 or n_t == 0:
        return []
    est_events = list(estimated)
    truth_events = list(truth)
    big = (min(n_e, n_t) + 1.0) * (cfg.onset_tolerance_seconds + 1.0) * 10.0
    cost = np.full((n_e, n_t), big)
    for i, e in enumerate(est_events):
        for j, g in enumerate(truth_events):
            if admissible(e, g, cfg):
                cost[i, j] = abs(e.onset_seconds - g.onset_seconds)
    rows, cols = linear_sum_assignment(cost)
    return [(int(i), int(j)) for i, j in zip(rows, cols) if cost[i, j] < big]


def f_measure(matching, n_estimated, n_truth):
    """(precision, recall, F); zero-denominator conventions give zeros."""
    m = matching if isinstance(matching, int) else len(matching)
    precision = m / n_estimated if n_estimated > 0 else 0.0
    recall = m / n_truth if n_truth > 0 else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f


def rms_count_error(estimates, truths):
    estimates = np.asarray(estimates, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if estimates.shape != truths.shape or estimates.size == 0:
        raise ValueError("estimates and truths must be equal-length and nonempty")
    return float(np.sqrt(np.mean((estimates - truths) ** 2)))


def window_spans(total_seconds, window_seconds=10.0):
    """Consecutive non-overlapping [start, end) spans; the final partial
    window is included."""
    spans = []
    start = 0.0
    while start < total_seconds:
        spans.append((start, min(start + window_seconds, total_seconds)))
        start += window_seconds
    return spans


def transcript_window_counts(transcript, spans):
    onsets = np.array([ev.onset_seconds for ev in transcript.events])
    return np.array([int(np.sum((onsets >= a) & (onsets < b))) for a, b in spans], dtype=np.float64)


@dataclass(frozen=True)
class ResultRow:
    system: str
    condition: str
    fold: int
    metric: str
    value: float


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def add(self, system, condition, fold, metric, value):
        self.rows.append(ResultRow(system, condition, fold, metric, float(value)))

    def values(self, system, condition, metric):
        return [r.value for r in self.rows
                if r.system == system and r.condition == condition and r.metric == metric]

    def mean(self, system, condition, metric):
        vals = self.values(system, condition, metric)
        return float(np.mean(vals)) if vals else float("nan")

    def fold_range(self, system, condition, metric):
        vals = self.values(system, condition, metric)
        return (min(vals), max(vals)) if vals else (float("nan"), float("nan"))

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("system,condition,fold,metric,value\n")
            for r in self.rows:
                fh.write(f"{r.system},{r.condition},{r.fold},{r.metric},{r.value!r}\n")

    def summary(self):
        lines = []
        systems = sorted({r.system for r in self.rows})
        conditions = [c for c in CONDITIONS if any(r.condition == c for r in self.rows)]
        for cond in conditions:
            for sys_name in systems:
                parts = []
                for metric in ("f_measure", "rms_count_error"):
                    vals = self.values(sys_name, cond, metric)
                    if vals:
                        lo, hi = self.fold_range(sys_name, cond, metric)
                        parts.append(f"{metric}={np.mean(vals):.4f} [{lo:.4f},{hi:.4f}]")
                if parts:
                    lines.append(f"{cond:12s} {sys_name:12s} " + "  ".join(parts))
        for sys_name, cond, fold, msg in self.errors:
            lines.append(f"FAILED      {sys_name:12s} {cond} fold {fold}: {msg}")
        return "\n".join(lines)


class BundleSystem:
    """A named decode path through a trained model bundle."""

    def __init__(self, name, transcribes=True):
        self.name = name
        self.transcribes = transcribes

    def transcribe(self, decoder):
        return decoder.transcript(self.name)

    def window_counts(self, decoder, spans):
        return decoder.window_counts(self.name, spans)


def default_systems():
    return [
        BundleSystem("odo"),
        BundleSystem("odo_flat"),
        BundleSystem("hmm"),
        BundleSystem("odo_hmm"),
        BundleSystem("onset_count", transcribes=False),
    ]


def crossvalidate(sessions, cfg, systems=None, conditions=CONDITIONS,
                  match_config=None, train_fn=None, decoder_fn=None, fold_parts=3,
                  bundle_cache=None):
    """Leave-one-session-out crossvalidation over the condition grid.

    Conditions: matched (natural train/test), train_dense (train folded x3),
    test_dense (test folded x3). One bundle per (fold, training density) is
    shared by all systems; pass a dict as ``bundle_cache`` to reuse trained
    bundles across calls. Per-system failures are recorded and do not abort
    the remaining grid.
    """
    from . import pipeline

    if len(sessions) < 2:
        raise ValueError("crossvalidation needs at least 2 sessions")
    if systems is None:
        systems = default_systems()
    if match_config is None:
        match_config = MatchConfig(cfg.onset_tolerance_seconds, cfg.duration_ratio_tolerance)
    if train_fn is None:
        train_fn = pipeline.train_bundle
    if decoder_fn is None:
        decoder_fn = pipeline.Decoder

    report = EvalReport()
    for fold in range(len(sessions)):
        test_natural = sessions[fold]
        train_natural = [s for i, s in enumerate(sessions) if i != fold]
        bundles = bundle_cache.setdefault(fold, {}) if bundle_cache is not None else {}
        fe_cache = {}

        def make_decoder(bundle, scene):
            decoder = decoder_fn(bundle, scene)
            if isinstance(decoder, pipeline.Decoder):
                # the natural test scene is decoded under several bundles;
                # its front end does not depend on the bundle
                key = id(scene)
                if key in fe_cache:
                    decoder._cache["fe"] = fe_cache[key]
                else:
                    fe_cache[key] = decoder.front_end
            return decoder

        def bundle_for(dense_train):
            if dense_train not in bundles:
                scenes = ([fold_dense(s, fold_parts) for s in train_natural]
                          if dense_train else train_natural)
                bundles[dense_train] = train_fn(scenes, cfg)
            return bundles[dense_train]

        for condition in conditions:
            dense_train = condition == "train_dense"
            test_scene = fold_dense(test_natural, fold_parts) if condition == "test_dense" \
                else test_natural
            try:
                bundle = bundle_for(dense_train)
            except Exception as exc:  # training failed: every system fails here
                warnings.warn(f"training failed for fold {fold} {condition}: {exc}")
                for system in systems:
                    report.errors.append((system.name, condition, fold, str(exc)))
                continue
            decoder = make_decoder(bundle, test_scene)
            spans = window_spans(test_scene.audio.duration_seconds, cfg.count_window_seconds)
            truth_counts = transcript_window_counts(test_scene.truth, spans)
            for system in systems:
                try:
                    if system.transcribes:
                        est = system.transcribe(decoder)
                        matching = match_events(est, test_scene.truth, match_config)
                        p, r, f = f_measure(matching, len(est), len(test_scene.truth))
                        report.add(system.name, condition, fold, "precision", p)
                        report.add(system.name, condition, fold, "recall", r)
                        report.add(system.name, condition, fold, "f_measure", f)
                    est_counts = system.window_counts(decoder, spans)
                    rms = rms_count_error(est_counts, truth_counts)
                    report.add(system.name, condition, fold, "rms_count_error", rms)
                except Exception as exc:
                    warnings.warn(f"{system.name} failed on fold {fold} {condition}: {exc}")
                    report.errors.append((system.name, condition, fold, str(exc)))
    return report
