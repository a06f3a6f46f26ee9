"""Event posterior over [onset frame x duration frames], transcript extraction
under the one-edge-per-frame dominance rule, and calibrated expected counts.

The posterior cell (t, tau) multiplies the onset probability at t, the offset
probability at t + tau, and the duration pmf at tau. Cells are independent
binomial event probabilities, deliberately NOT normalized: their sum is the
expected event count, and a single multiplicative calibration factor fitted
on training data absorbs residual scale bias.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .duration_prior import eval_prior


@dataclass(frozen=True, order=True)
class Event:
    onset_seconds: float
    duration_seconds: float
    confidence: float = 1.0

    def __post_init__(self):
        if self.duration_seconds <= 0:
            raise ValueError("event duration must be positive")

    @property
    def offset_seconds(self):
        return self.onset_seconds + self.duration_seconds


@dataclass(frozen=True)
class Transcript:
    """Events sorted by onset then duration."""

    events: tuple

    @classmethod
    def from_events(cls, events):
        return cls(events=tuple(sorted(events)))

    @classmethod
    def empty(cls):
        return cls(events=())

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def durations(self):
        return np.array([ev.duration_seconds for ev in self.events])

    @property
    def onsets(self):
        return np.array([ev.onset_seconds for ev in self.events])


@dataclass(frozen=True)
class CalibrationFactor:
    factor: float

    def __post_init__(self):
        if not (np.isfinite(self.factor) and self.factor > 0):
            raise ValueError(f"calibration factor must be positive and finite, got {self.factor}")


@dataclass
class EventPosterior:
    values: np.ndarray  # [n_frames, tau_max - tau_min + 1]
    tau_min: int
    tau_max: int
    hop_seconds: float
    _frame_mass: np.ndarray = field(default=None, repr=False)

    @property
    def n_frames(self):
        return self.values.shape[0]

    @property
    def taus(self):
        return np.arange(self.tau_min, self.tau_max + 1)

    def frame_mass(self):
        """Exactly-summed per-onset-frame posterior mass (cached)."""
        if self._frame_mass is None:
            self._frame_mass = np.array([math.fsum(row) for row in self.values])
        return self._frame_mass


def build_posterior(on, off, prior):
    """values[t, tau] = p_on(t) * p_off(t + tau) * pmf(tau), zero once t + tau
    runs past the final frame."""
    if len(on) != len(off):
        raise ValueError(f"curve length mismatch: {len(on)} vs {len(off)}")
    if abs(on.hop_seconds - off.hop_seconds) > 1e-12:
        raise ValueError("onset/offset curves disagree on hop_seconds")
    n = len(on)
    taus = np.arange(prior.tau_min, prior.tau_max + 1)
    values = np.zeros((n, len(taus)), dtype=np.float64)
    for j, tau in enumerate(taus):
        if tau >= n:
            break
        values[: n - tau, j] = on.probs[: n - tau] * off.probs[tau:] * prior.pmf[j]
    return EventPosterior(values=values, tau_min=prior.tau_min, tau_max=prior.tau_max,
                          hop_seconds=on.hop_seconds)


def _dominance_survivors(post):
    """Cells that win both their onset row and their offset antidiagonal.

    Ties break toward smaller tau (then smaller t, which on a fixed row or
    antidiagonal is already implied). Returns (t, tau, value) arrays.
    """
    V = post.values
    n, m = V.shape
    taus = post.taus

    # Cells with t + tau past the final frame are structurally zero; mask them
    # below any probability so they can never win a designation tie.
    valid_cell = (np.arange(n)[:, None] + taus[None, :]) < n
    masked = np.where(valid_cell, V, -1.0)
    row_arg = np.argmax(masked, axis=1)  # first max: smallest tau wins ties
    row_val = V[np.arange(n), row_arg]

    # Antidiagonal designation: scan columns in ascending tau with strict '>'
    # updates, so the smallest tau keeps ties.
    diag_val = np.full(n + 1, -1.0)
    diag_t = np.full(n + 1, -1, dtype=np.int64)
    diag_j = np.full(n + 1, -1, dtype=np.int64)
    for j in range(m):
        tau = taus[j]
        if tau >= n:
            break
        t = np.arange(0, n - tau)
        d = t + tau
        better = V[t, j] > diag_val[d]
        diag_val[d[better]] = V[t[better], j]
        diag_t[d[better]] = t[better]
        diag_j[d[better]] = j

    t_all = np.arange(n)
    d_all = t_all + taus[row_arg]
    valid = d_all < n
    keep = valid.copy()
    keep[valid] &= (diag_t[d_all[valid]] == t_all[valid]) & (diag_j[d_all[valid]] == row_arg[valid])
    return t_all[keep], taus[row_arg[keep]], row_val[keep]


def _survivors_to_transcript(t, tau, val, threshold, hop):
    keep = val > threshold
    events = [
        Event(onset_seconds=(int(ti) + 0.5) * hop,
              duration_seconds=int(taui) * hop,
              confidence=float(vi))
        for ti, taui, vi in zip(t[keep], tau[keep], val[keep])
    ]
    return Transcript.from_events(events)


def extract_transcript(post, threshold):
    """Keep dominance winners strictly above the threshold as Events.

    Onset/duration in seconds use frame midpoints. The output never contains
    two events sharing an onset frame or an offset frame.
    """
    t, tau, val = _dominance_survivors(post)
    return _survivors_to_transcript(t, tau, val, threshold, post.hop_seconds)


def select_threshold(posteriors, truths, match_config=None, max_candidates=200):
    """Grid-search the extraction threshold that maximizes training F-measure.

    Candidates are 0 plus the distinct surviving cell values (each the
    smallest threshold of its extraction-equivalence class), evenly
    subsampled to ``max_candidates``; ties prefer the larger threshold.
    An event-free training truth degenerates to the suppressing threshold.
    """
    from .evaluation import MatchConfig, f_measure, match_events

    if len(posteriors) == 0:
        raise ValueError("select_threshold needs a nonempty training set")
    if len(posteriors) != len(truths):
        raise ValueError("posteriors and truths must align")
    if match_config is None:
        match_config = MatchConfig()

    survivors = [_dominance_survivors(p) for p in posteriors]
    values = np.concatenate([val[val > 0] for (_, _, val) in survivors]) if survivors else np.empty(0)
    candidates = np.unique(values)
    if len(candidates) > max_candidates - 1:
        idx = np.unique(np.round(np.linspace(0, len(candidates) - 1, max_candidates - 1)).astype(int))
        candidates = candidates[idx]
    grid = np.concatenate([[0.0], candidates])

    n_truth_total = sum(len(tr) for tr in truths)
    if n_truth_total == 0:
        return float(grid[-1]) if len(grid) > 1 else 1.0

    best_f, best_theta = -1.0, 0.0
    for theta in grid:
        n_match = n_est = 0
        for (t, tau, val), post, truth in zip(survivors, posteriors, truths):
            est = _survivors_to_transcript(t, tau, val, theta, post.hop_seconds)
            n_est += len(est)
            n_match += len(match_events(est, truth, match_config))
        _, _, f = f_measure(n_match, n_est, n_truth_total)
        if f >= best_f:  # ties -> larger threshold (grid is ascending)
            best_f, best_theta = f, float(theta)
    return best_theta


def expected_count(post, window, cal=None):
    """Calibrated posterior mass of cells whose onset frame-midpoint falls in
    [start, end); additive over window partitions."""
    start, end = window
    if start >= end:
        raise ValueError("window start must precede end")
    mids = (np.arange(post.n_frames) + 0.5) * post.hop_seconds
    mask = (mids >= start) & (mids < end)
    total = math.fsum(post.frame_mass()[mask])
    factor = cal.factor if cal is not None else 1.0
    return factor * total


def fit_calibration(estimates, truths):
    """factor = sum(truths) / sum(estimates): the multiplicative correction
    minimizing squared error of the aggregate."""
    if len(estimates) != len(truths):
        raise ValueError("estimates and truths must have equal length")
    est_total = math.fsum(estimates)
    truth_total = math.fsum(truths)
    if est_total <= 0:
        raise ValueError("zero estimate mass; cannot fit a multiplicative calibration")
    return CalibrationFactor(factor=truth_total / est_total)
