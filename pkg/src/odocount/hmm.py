"""Cardinality HMM: hidden states count the currently-active events.

The plain state space is {0..K} with K the maximum simultaneous count seen
in training. The expanded variant multiplies states by four with binary
onset/offset frame indicators and appends the sharpened detector outputs to
the observation vector. Transitions never observed in training keep
probability zero (a 1e-12 decode floor avoids dead ends); per-state
observations are 10-component diagonal GMMs.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .gmm import fit_diagonal_gmm
from .odo import Event, Transcript

TRANSITION_FLOOR = 1e-12


@dataclass
class HmmModel:
    k_max: int
    expanded: bool
    transitions: np.ndarray  # [S, S] row-stochastic
    initial: np.ndarray      # [S]
    state_gmms: list         # DiagonalGMM per state; None marks a dead state
    obs_dim: int
    metadata: dict = field(default_factory=dict)

    @property
    def n_states(self):
        return len(self.state_gmms)

    def state_cardinality(self, state):
        return state // 4 if self.expanded else state


@dataclass
class StatePath:
    states: np.ndarray
    log_prob: float


def derive_cardinality(truth, n_frames, hop_seconds):
    """counts[t] = number of events whose span covers frame t's midpoint."""
    counts = np.zeros(n_frames, dtype=np.int64)
    for ev in truth.events:
        a = int(np.ceil(ev.onset_seconds / hop_seconds - 0.5 - 1e-9))
        b = int(np.ceil((ev.onset_seconds + ev.duration_seconds) / hop_seconds - 0.5 - 1e-9))
        counts[max(a, 0):max(b, 0)] += 1
    return counts


def expanded_state_index(cardinality, onset_flag, offset_flag):
    return cardinality * 4 + int(onset_flag) * 2 + int(offset_flag)


def _state_sequences(cardinalities, expanded, frame_labels):
    if not expanded:
        return [np.asarray(c, dtype=np.int64) for c in cardinalities]
    seqs = []
    for counts, labels in zip(cardinalities, frame_labels):
        seqs.append(np.asarray(counts, dtype=np.int64) * 4
                    + np.asarray(labels.onset_flags, dtype=np.int64) * 2
                    + np.asarray(labels.offset_flags, dtype=np.int64))
    return seqs


def augment_observations(obs, on_curve, off_curve):
    """Append the two sharpened detector outputs to each observation row."""
    return np.hstack([
        np.asarray(obs, dtype=np.float64),
        np.asarray(on_curve.probs)[:, None],
        np.asarray(off_curve.probs)[:, None],
    ])


def train_hmm(observations, cardinalities, expanded=False, frame_labels=None,
              odo_curves=None, seed=0, n_components=10, var_floor=1e-6,
              max_iter=100, tol=1e-6):
    """Learn transitions from observed state bigrams and per-state GMMs.

    Expanded mode needs ``frame_labels`` (per-sequence edge flags) and
    ``odo_curves`` (per-sequence (onset, offset) DetectionCurve pairs); the
    curves are appended to the observation vectors. In plain mode every
    cardinality 0..K must be observed; in expanded mode unobserved flag
    combinations become structurally dead states.
    """
    if len(observations) != len(cardinalities) or len(observations) == 0:
        raise ValueError("need aligned, nonempty observation/cardinality sequences")
    if expanded:
        if frame_labels is None or odo_curves is None:
            raise ValueError("expanded mode requires frame_labels and odo_curves")
        observations = [augment_observations(o, on, off)
                        for o, (on, off) in zip(observations, odo_curves)]
    observations = [np.ascontiguousarray(o, dtype=np.float64) for o in observations]
    for o, c in zip(observations, cardinalities):
        if len(o) != len(c):
            raise ValueError("observation/cardinality length mismatch")

    k_max = int(max(int(np.max(c)) for c in cardinalities))
    S = 4 * (k_max + 1) if expanded else k_max + 1
    seqs = _state_sequences(cardinalities, expanded, frame_labels)

    counts = np.zeros((S, S), dtype=np.float64)
    init_counts = np.zeros(S, dtype=np.float64)
    for s in seqs:
        np.add.at(counts, (s[:-1], s[1:]), 1.0)
        init_counts[s[0]] += 1.0
    smoothed = np.where(counts > 0, counts + 1.0, 0.0)
    row_tot = smoothed.sum(axis=1, keepdims=True)
    # States with no observed outgoing transition (unobserved states, or a
    # state seen only at sequence ends) self-loop; they carry no real mass.
    transitions = np.divide(smoothed, row_tot, out=np.eye(S), where=row_tot > 0)
    initial = init_counts / init_counts.sum()

    obs_all = np.concatenate(observations, axis=0)
    states_all = np.concatenate(seqs)
    state_gmms = []
    traces = []
    occupancy = np.bincount(states_all, minlength=S)
    for s in range(S):
        n_s = int(occupancy[s])
        if n_s == 0:
            if not expanded:
                raise ValueError(f"cardinality state {s} has no training frames")
            state_gmms.append(None)
            traces.append(np.empty(0))
            continue
        k_s = min(n_components, n_s)
        if k_s < n_components:
            warnings.warn(f"state {s}: only {n_s} frames; reducing GMM to {k_s} component(s)")
        model = fit_diagonal_gmm(obs_all[states_all == s], k_s,
                                 seed=np.random.SeedSequence([seed, s]),
                                 var_floor=var_floor, max_iter=max_iter, tol=tol)
        state_gmms.append(model)
        traces.append(model.loglik_trace)

    return HmmModel(
        k_max=k_max, expanded=expanded, transitions=transitions, initial=initial,
        state_gmms=state_gmms, obs_dim=obs_all.shape[1],
        metadata={"state_occupancy": occupancy, "loglik_traces": traces,
                  "gmm_components": n_components, "seed": int(seed)},
    )


def emission_loglik(model, observations):
    X = np.asarray(observations, dtype=np.float64)
    if X.shape[1] != model.obs_dim:
        raise ValueError(f"observation dim {X.shape[1]} != model obs_dim {model.obs_dim}")
    ll = np.full((len(X), model.n_states), -np.inf)
    for s, g in enumerate(model.state_gmms):
        if g is not None:
            ll[:, s] = g.loglik(X)
    return ll


def viterbi(model, observations):
    """Most probable state path; ties break toward the lower state index."""
    ll = emission_loglik(model, observations)
    log_init = np.log(np.maximum(model.initial, TRANSITION_FLOOR))
    log_trans = np.log(np.maximum(model.transitions, TRANSITION_FLOOR))
    dead = np.array([g is None for g in model.state_gmms])
    log_init[dead] = -np.inf
    log_trans[:, dead] = -np.inf
    path, log_prob = kernels.viterbi(log_init, log_trans, ll)
    return StatePath(states=path, log_prob=log_prob)


def states_to_transcript(path, model, hop_seconds, pairing="fifo"):
    """Rises emit onsets, falls emit offsets, paired in order of occurrence.

    FIFO pairing by default (LIFO behind the flag). Unclosed onsets are
    closed just past the final frame. Coincident duplicate events collapse
    to one with a warning.
    """
    if pairing not in ("fifo", "lifo"):
        raise ValueError("pairing must be 'fifo' or 'lifo'")
    cards = np.asarray([model.state_cardinality(int(s)) for s in path.states], dtype=np.int64)
    open_onsets = []
    pairs = []
    prev = 0
    for t, c in enumerate(cards):
        delta = int(c) - prev
        if delta > 0:
            open_onsets.extend([t] * delta)
        elif delta < 0:
            for _ in range(-delta):
                onset = open_onsets.pop(0) if pairing == "fifo" else open_onsets.pop()
                pairs.append((onset, t))
        prev = int(c)
    final = len(cards)
    while open_onsets:
        onset = open_onsets.pop(0) if pairing == "fifo" else open_onsets.pop()
        pairs.append((onset, final))

    unique_pairs = sorted(set(pairs))
    if len(unique_pairs) < len(pairs):
        warnings.warn(f"collapsed {len(pairs) - len(unique_pairs)} coincident duplicate event(s)")
    events = [
        Event(onset_seconds=(a + 0.5) * hop_seconds,
              duration_seconds=(b - a) * hop_seconds,
              confidence=1.0)
        for a, b in unique_pairs
    ]
    return Transcript.from_events(events)


def hmm_count(transcript, window, cal=None):
    """Events with onset in [start, end), scaled by the calibration factor."""
    start, end = window
    onsets = np.array([ev.onset_seconds for ev in transcript.events])
    n = int(np.sum((onsets >= start) & (onsets < end))) if len(onsets) else 0
    factor = cal.factor if cal is not None else 1.0
    return factor * n
