"""End-to-end orchestration: front-end feature extraction, bundle training
(all five decode systems share one set of detectors), and cached decoding.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import detectors, dsp, hmm as hmm_mod, odo
from .duration_prior import fit_duration_gmm, flat_prior
from .evaluation import MatchConfig, transcript_window_counts, window_spans
from .odo import CalibrationFactor, build_posterior, expected_count, extract_transcript


@dataclass
class FrontEnd:
    """Per-clip features shared by every system."""

    base: dsp.Spectrogram       # band-limited, noise-reduced, optionally pooled
    diff: dsp.DiffSpectrogram
    det_X: np.ndarray           # [n_frames, det_dim] float32
    hmm_X: np.ndarray           # [n_frames, hmm_dim] float64
    n_frames: int
    hop_seconds: float


def compute_front_end(clip, cfg):
    spec = dsp.compute_spectrogram(clip, frame_len=cfg.frame_len, hop=cfg.hop,
                                   window=cfg.window)
    spec = dsp.band_limit(spec, cfg.band_lo_hz, cfg.band_hi_hz)
    if cfg.gain_normalize:
        # Recording-gain invariance: the in-band median magnitude tracks the
        # noise floor, which scales with any overall gain change (e.g. the
        # peak normalization applied to folded dense mixtures).
        floor = float(np.median(spec.magnitudes))
        if floor <= 0:
            floor = float(np.sqrt(np.mean(spec.magnitudes ** 2))) or 1.0
        spec = dsp.Spectrogram(magnitudes=spec.magnitudes / floor,
                               hop_seconds=spec.hop_seconds, bin_freqs=spec.bin_freqs)
    spec = dsp.reduce_noise_median(spec, cfg.median_window_seconds, clamp=cfg.median_clamp)
    spec = dsp.pool_frequencies(spec, cfg.pool_bins)
    diff = dsp.time_difference(spec)
    det_X = dsp.extract_patch_matrix(diff, cfg.detector_patch_before,
                                     cfg.detector_patch_after, n_frames=spec.n_frames)
    hmm_X = dsp.extract_patch_matrix(spec, cfg.hmm_patch_before, cfg.hmm_patch_after,
                                     dtype=np.float64)
    return FrontEnd(base=spec, diff=diff, det_X=det_X, hmm_X=hmm_X,
                    n_frames=spec.n_frames, hop_seconds=spec.hop_seconds)


def _forest_params(cfg):
    return dict(
        n_trees=cfg.n_trees,
        max_depth=cfg.tree_max_depth if cfg.tree_max_depth > 0 else None,
        min_samples_leaf=cfg.tree_min_samples_leaf,
        max_features=cfg.tree_max_features if cfg.tree_max_features > 0 else None,
        negative_subsample=cfg.negative_subsample,
    )


def _train_edge_detector(fes, flags_per_scene, cfg, seed, kind):
    X = np.vstack([fe.det_X for fe in fes])
    y = np.concatenate(flags_per_scene)
    forest = detectors.train_forest(X, y, seed=seed, **_forest_params(cfg))
    raws = [detectors.predict_raw(forest, fe.det_X, fe.hop_seconds, kind) for fe in fes]
    design = np.vstack([detectors.sharpener_design_matrix(r.probs, cfg.sharpener_window)
                        for r in raws])
    design = np.hstack([design, np.ones((len(design), 1))])
    coef, *_ = np.linalg.lstsq(design, y.astype(np.float64), rcond=None)
    sharpener = detectors.SharpenerModel(weights=coef[:-1], bias=float(coef[-1]),
                                         window_len=cfg.sharpener_window)
    sharp = [detectors.sharpen(sharpener, r) for r in raws]
    return forest, sharpener, sharp


def _curve_window_mass(curve, spans):
    mids = (np.arange(len(curve)) + 0.5) * curve.hop_seconds
    return np.array([float(np.sum(curve.probs[(mids >= a) & (mids < b)])) for a, b in spans])


def _safe_calibration(estimates, truths, label):
    try:
        return odo.fit_calibration(estimates, truths)
    except ValueError as exc:
        warnings.warn(f"calibration for {label} fell back to 1.0: {exc}")
        return CalibrationFactor(1.0)


@dataclass
class ModelBundle:
    """Everything cmd_detect / cmd_count / cmd_eval need, under one roof."""

    config: object
    onset_forest: object
    onset_sharpener: object
    offset_forest: object
    offset_sharpener: object
    gmm_prior: object
    flat_prior: object
    threshold_gmm: float
    threshold_flat: float
    calibration: dict
    hmm_plain: object
    hmm_expanded: object
    k_max: int
    prior_kind: str = "gmm"  # prior used by the plain "odo" CLI system
    version: int = 1

    def threshold_for(self, prior_kind):
        return self.threshold_gmm if prior_kind == "gmm" else self.threshold_flat

    def prior_for(self, prior_kind):
        return self.gmm_prior if prior_kind == "gmm" else self.flat_prior


def train_bundle(scenes, cfg, train_hmms=True):
    """Train every system on the labeled scenes; shares one front end.

    Returns a ModelBundle with detectors, both duration priors and their
    thresholds, plain/expanded HMMs, and per-system calibration factors.
    """
    if not scenes:
        raise ValueError("train_bundle needs at least one labeled scene")
    rates = {s.audio.sample_rate for s in scenes}
    if len(rates) != 1:
        raise ValueError(f"training scenes disagree on sample rate: {sorted(rates)}")

    fes = [compute_front_end(s.audio, cfg) for s in scenes]
    labels = [detectors.labels_from_transcript(s.truth, fe.n_frames, fe.hop_seconds)
              for s, fe in zip(scenes, fes)]
    hop = fes[0].hop_seconds

    onset_forest, onset_sharp, on_curves = _train_edge_detector(
        fes, [l.onset_flags for l in labels], cfg, cfg.seed, "onset")
    offset_forest, offset_sharp, off_curves = _train_edge_detector(
        fes, [l.offset_flags for l in labels], cfg, cfg.seed + 1, "offset")

    durations = np.concatenate([s.truth.durations for s in scenes])
    gmm_prior = fit_duration_gmm(durations, cfg.duration_prior_components,
                                 seed=cfg.seed, hop_seconds=hop,
                                 widen=cfg.duration_prior_widen,
                                 max_iter=cfg.duration_gmm_max_iter,
                                 tol=cfg.duration_gmm_tol)
    flat = flat_prior(gmm_prior.tau_min, gmm_prior.tau_max)

    truths = [s.truth for s in scenes]
    match_cfg = MatchConfig(cfg.onset_tolerance_seconds, cfg.duration_ratio_tolerance)
    posts_gmm = [build_posterior(on, off, gmm_prior) for on, off in zip(on_curves, off_curves)]
    posts_flat = [build_posterior(on, off, flat) for on, off in zip(on_curves, off_curves)]
    threshold_gmm = odo.select_threshold(posts_gmm, truths, match_cfg, cfg.threshold_grid_max)
    threshold_flat = odo.select_threshold(posts_flat, truths, match_cfg, cfg.threshold_grid_max)

    cards = [hmm_mod.derive_cardinality(s.truth, fe.n_frames, fe.hop_seconds)
             for s, fe in zip(scenes, fes)]
    hmm_plain = hmm_expanded = None
    if train_hmms:
        hmm_plain = hmm_mod.train_hmm(
            [fe.hmm_X for fe in fes], cards, expanded=False, seed=cfg.seed + 2,
            n_components=cfg.hmm_gmm_components, var_floor=cfg.obs_gmm_var_floor,
            max_iter=cfg.obs_gmm_max_iter, tol=cfg.obs_gmm_tol)
        hmm_expanded = hmm_mod.train_hmm(
            [fe.hmm_X for fe in fes], cards, expanded=True, frame_labels=labels,
            odo_curves=list(zip(on_curves, off_curves)), seed=cfg.seed + 3,
            n_components=cfg.hmm_gmm_components, var_floor=cfg.obs_gmm_var_floor,
            max_iter=cfg.obs_gmm_max_iter, tol=cfg.obs_gmm_tol)

    # Calibration: training-data window estimates vs. true counts, per system.
    spans_per_scene = [window_spans(s.audio.duration_seconds, cfg.count_window_seconds)
                       for s in scenes]
    truth_counts = np.concatenate([transcript_window_counts(s.truth, spans)
                                   for s, spans in zip(scenes, spans_per_scene)])

    def window_est(fn):
        return np.concatenate([fn(i) for i in range(len(scenes))])

    est = {
        "odo": window_est(lambda i: np.array(
            [expected_count(posts_gmm[i], w) for w in spans_per_scene[i]])),
        "odo_flat": window_est(lambda i: np.array(
            [expected_count(posts_flat[i], w) for w in spans_per_scene[i]])),
        "onset_count": window_est(lambda i: _curve_window_mass(on_curves[i], spans_per_scene[i])),
    }
    if train_hmms:
        for name, model in (("hmm", hmm_plain), ("odo_hmm", hmm_expanded)):
            def decode_counts(i, model=model, name=name):
                obs = fes[i].hmm_X
                if model.expanded:
                    obs = hmm_mod.augment_observations(obs, on_curves[i], off_curves[i])
                path = hmm_mod.viterbi(model, obs)
                tr = hmm_mod.states_to_transcript(path, model, hop, cfg.hmm_pairing)
                return transcript_window_counts(tr, spans_per_scene[i])
            est[name] = window_est(decode_counts)

    calibration = {name: _safe_calibration(e, truth_counts, name).factor
                   for name, e in est.items()}

    return ModelBundle(
        config=cfg,
        onset_forest=onset_forest, onset_sharpener=onset_sharp,
        offset_forest=offset_forest, offset_sharpener=offset_sharp,
        gmm_prior=gmm_prior, flat_prior=flat,
        threshold_gmm=float(threshold_gmm), threshold_flat=float(threshold_flat),
        calibration=calibration,
        hmm_plain=hmm_plain, hmm_expanded=hmm_expanded,
        k_max=hmm_plain.k_max if hmm_plain is not None else int(max(int(np.max(c)) for c in cards)),
    )


class Decoder:
    """Lazy, cached decode of one clip against one bundle.

    All five systems pull from the same cached front end and detector curves,
    mirroring how the bundle was trained.
    """

    SYSTEMS = ("odo", "odo_flat", "hmm", "odo_hmm", "onset_count")

    def __init__(self, bundle, scene_or_clip):
        self.bundle = bundle
        self.scene = scene_or_clip if hasattr(scene_or_clip, "audio") else None
        self.clip = scene_or_clip.audio if self.scene is not None else scene_or_clip
        self.cfg = bundle.config
        self._cache = {}

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def front_end(self):
        return self._get("fe", lambda: compute_front_end(self.clip, self.cfg))

    def curves(self):
        def build():
            fe = self.front_end
            on_raw = detectors.predict_raw(self.bundle.onset_forest, fe.det_X,
                                           fe.hop_seconds, "onset")
            off_raw = detectors.predict_raw(self.bundle.offset_forest, fe.det_X,
                                            fe.hop_seconds, "offset")
            return (detectors.sharpen(self.bundle.onset_sharpener, on_raw),
                    detectors.sharpen(self.bundle.offset_sharpener, off_raw))
        return self._get("curves", build)

    def posterior(self, prior_kind):
        def build():
            on, off = self.curves()
            return build_posterior(on, off, self.bundle.prior_for(prior_kind))
        return self._get(("post", prior_kind), build)

    def hmm_path(self, expanded):
        def build():
            model = self.bundle.hmm_expanded if expanded else self.bundle.hmm_plain
            if model is None:
                raise ValueError("bundle was trained without HMMs")
            obs = self.front_end.hmm_X
            if expanded:
                on, off = self.curves()
                obs = hmm_mod.augment_observations(obs, on, off)
            return hmm_mod.viterbi(model, obs)
        return self._get(("path", expanded), build)

    def transcript(self, system):
        def build():
            if system in ("odo", "odo_flat"):
                kind = "gmm" if system == "odo" else "flat"
                if system == "odo":
                    kind = self.bundle.prior_kind
                return extract_transcript(self.posterior(kind), self.bundle.threshold_for(kind))
            if system in ("hmm", "odo_hmm"):
                expanded = system == "odo_hmm"
                model = self.bundle.hmm_expanded if expanded else self.bundle.hmm_plain
                return hmm_mod.states_to_transcript(self.hmm_path(expanded), model,
                                                    self.front_end.hop_seconds,
                                                    self.cfg.hmm_pairing)
            raise ValueError(f"system {system!r} does not produce transcripts")
        return self._get(("transcript", system), build)

    def window_counts(self, system, spans):
        cal = CalibrationFactor(self.bundle.calibration.get(system, 1.0))
        if system in ("odo", "odo_flat"):
            kind = self.bundle.prior_kind if system == "odo" else "flat"
            post = self.posterior(kind)
            return np.array([expected_count(post, w, cal) for w in spans])
        if system in ("hmm", "odo_hmm"):
            tr = self.transcript(system)
            return transcript_window_counts(tr, spans) * cal.factor
        if system == "onset_count":
            on, _ = self.curves()
            return _curve_window_mass(on, spans) * cal.factor
        raise ValueError(f"unknown system {system!r}")
