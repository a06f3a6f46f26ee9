"""Onset/offset detectors: random-forest regression plus an OLS sharpener.

Forests are fitted with scikit-learn and immediately exported to plain
arrays; all prediction goes through the package's own traversal (compiled
or numpy), which is also what gets serialized. Traversal sends
feature < threshold left and feature >= threshold right.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.ensemble import RandomForestRegressor


@dataclass
class DetectionCurve:
    """Per-frame detection probabilities from one detector."""

    probs: np.ndarray
    hop_seconds: float
    kind: str  # "onset" | "offset"

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 1:
            raise ValueError("probs must be 1-D")

    def __len__(self):
        return len(self.probs)


@dataclass
class FrameLabels:
    """Binary per-frame onset/offset supervision targets."""

    onset_flags: np.ndarray
    offset_flags: np.ndarray


@dataclass
class ForestModel:
    """Regression forest flattened to arrays (one concatenated node table).

    ``left[i] < 0`` marks a leaf; ``value[i]`` is the mean training target in
    that leaf, so predictions stay inside [0, 1] for binary targets.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    tree_offsets: np.ndarray
    n_trees: int
    feature_dim: int
    metadata: dict = field(default_factory=dict)


@dataclass
class SharpenerModel:
    """Sliding-window OLS that maps raw detector outputs onto edge labels."""

    weights: np.ndarray
    bias: float
    window_len: int

    def __post_init__(self):
        if self.window_len % 2 != 1:
            raise ValueError("window_len must be odd")
        if len(self.weights) != self.window_len:
            raise ValueError("weights length must equal window_len")


def labels_from_transcript(transcript, n_frames, hop_seconds):
    """Binary edge flags: onset_flags[t] = 1 iff an onset lies in frame t's span.

    Coinciding edges collapse to a single flag. Events outside the frame
    range are an error.
    """
    onset = np.zeros(n_frames, dtype=np.int8)
    offset = np.zeros(n_frames, dtype=np.int8)
    for ev in transcript.events:
        t_on = int(ev.onset_seconds / hop_seconds)
        t_off = int((ev.onset_seconds + ev.duration_seconds) / hop_seconds)
        if not (0 <= t_on < n_frames) or not (0 <= t_off < n_frames):
            raise ValueError(
                f"event at {ev.onset_seconds:.6f}s (+{ev.duration_seconds:.6f}s) "
                f"falls outside the {n_frames}-frame range"
            )
        onset[t_on] = 1
        offset[t_off] = 1
    return FrameLabels(onset_flags=onset, offset_flags=offset)


def _as_matrix(patches, dtype=np.float32):
    if isinstance(patches, np.ndarray):
        return np.ascontiguousarray(patches, dtype=dtype)
    return np.ascontiguousarray([p.values for p in patches], dtype=dtype)


def train_forest(patches, targets, n_trees=20, seed=0, max_depth=None,
                 min_samples_leaf=1, max_features=None, bootstrap=True,
                 negative_subsample=0.0):
    """Fit a regression forest on patches -> binary edge targets.

    Defaults: unlimited depth, min_samples_leaf 1, all features per split,
    bootstrap resampling. ``negative_subsample`` > 0 keeps only that many
    negatives per positive (seeded), recorded in the model metadata.
    """
    X = _as_matrix(patches)
    y = np.asarray(targets, dtype=np.float64)
    if len(X) != len(y) or len(y) < 2:
        raise ValueError("need at least 2 aligned patches/targets")
    if np.unique(y).size < 2:
        raise ValueError("degenerate supervision: targets contain a single class")

    meta = {"seed": int(seed), "negative_subsample": float(negative_subsample)}
    if negative_subsample > 0:
        rng = np.random.default_rng(seed)
        pos = np.flatnonzero(y > 0)
        neg = np.flatnonzero(y <= 0)
        keep_n = min(len(neg), int(round(negative_subsample * len(pos))))
        keep = rng.choice(neg, size=keep_n, replace=False)
        idx = np.sort(np.concatenate([pos, keep]))
        X, y = X[idx], y[idx]

    forest = RandomForestRegressor(
        n_estimators=n_trees,
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        max_features=max_features if max_features is not None else 1.0,
        bootstrap=bootstrap,
        random_state=seed,
        n_jobs=1,
    )
    forest.fit(X, y)

    feats, thrs, lefts, rights, values, offsets = [], [], [], [], [], [0]
    for est in forest.estimators_:
        tree = est.tree_
        base = offsets[-1]
        feats.append(tree.feature.astype(np.int32))
        thrs.append(tree.threshold.astype(np.float64))
        left = tree.children_left.astype(np.int32)
        right = tree.children_right.astype(np.int32)
        lefts.append(np.where(left >= 0, left + base, -1).astype(np.int32))
        rights.append(np.where(right >= 0, right + base, -1).astype(np.int32))
        values.append(tree.value[:, 0, 0].astype(np.float64))
        offsets.append(base + tree.node_count)

    return ForestModel(
        feature=np.concatenate(feats),
        threshold=np.concatenate(thrs),
        left=np.concatenate(lefts),
        right=np.concatenate(rights),
        value=np.concatenate(values),
        tree_offsets=np.asarray(offsets, dtype=np.int64),
        n_trees=n_trees,
        feature_dim=X.shape[1],
        metadata=meta,
    )


def predict_raw(model, patches, hop_seconds, kind="onset"):
    """Mean leaf value over the ensemble for every patch, clipped to [0, 1]."""
    from . import kernels

    X = _as_matrix(patches)
    if X.shape[1] != model.feature_dim:
        raise ValueError(
            f"patch dimension {X.shape[1]} does not match model feature_dim {model.feature_dim}"
        )
    probs = kernels.forest_predict(
        X, model.feature, model.threshold, model.left, model.right,
        model.value, model.tree_offsets,
    )
    return DetectionCurve(probs=np.clip(probs, 0.0, 1.0), hop_seconds=hop_seconds, kind=kind)


def sharpener_design_matrix(raw_probs, window_len):
    """Rows of zero-padded sliding windows of the raw curve."""
    half = window_len // 2
    padded = np.zeros(len(raw_probs) + window_len - 1, dtype=np.float64)
    padded[half:half + len(raw_probs)] = raw_probs
    return np.lib.stride_tricks.sliding_window_view(padded, window_len).copy()


def train_sharpener(raw, labels, window_len=11):
    """Least-squares map from an 11-wide window of raw outputs to the labels.

    Solved as a minimum-norm least-squares problem, so rank-deficient designs
    (e.g. an all-constant raw curve) still yield a well-defined model.
    """
    if window_len % 2 != 1:
        raise ValueError("window_len must be odd")
    probs = raw.probs if isinstance(raw, DetectionCurve) else np.asarray(raw, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if len(probs) != len(y):
        raise ValueError("raw curve and labels must have equal length")
    X = sharpener_design_matrix(probs, window_len)
    design = np.hstack([X, np.ones((len(X), 1))])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return SharpenerModel(weights=coef[:-1], bias=float(coef[-1]), window_len=window_len)


def sharpen(model, raw):
    """Apply the sharpener and clamp the linear prediction into [0, 1]."""
    probs = raw.probs if isinstance(raw, DetectionCurve) else np.asarray(raw, dtype=np.float64)
    X = sharpener_design_matrix(probs, model.window_len)
    pred = X @ model.weights + model.bias
    hop = raw.hop_seconds if isinstance(raw, DetectionCurve) else 0.0
    kind = raw.kind if isinstance(raw, DetectionCurve) else "onset"
    return DetectionCurve(probs=np.clip(pred, 0.0, 1.0), hop_seconds=hop, kind=kind)
