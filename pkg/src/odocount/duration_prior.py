"""Priors over event duration: a 1-D Gaussian mixture on training durations,
or a flat prior over an allowed frame range.

Either way the prior is held as a normalized pmf over integer frame counts
tau in [tau_min, tau_max]: the event posterior sums cells into expected
counts, so a density would leave that sum hop-dependent.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .gmm import fit_diagonal_gmm


@dataclass
class DurationPrior:
    kind: str  # "gmm" | "flat" | "pmf"
    tau_min: int
    tau_max: int
    pmf: np.ndarray  # normalized over [tau_min, tau_max]
    components: tuple = ()  # (weight, mean_seconds, std_seconds) for gmm
    hop_seconds: float = 0.0
    loglik_trace: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        if self.tau_min < 1 or self.tau_max < self.tau_min:
            raise ValueError("need 1 <= tau_min <= tau_max")
        if len(self.pmf) != self.tau_max - self.tau_min + 1:
            raise ValueError("pmf length must cover [tau_min, tau_max]")
        total = math.fsum(self.pmf)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"pmf must sum to 1 (got {total})")

    @property
    def n_taus(self):
        return self.tau_max - self.tau_min + 1

    @classmethod
    def from_pmf(cls, tau_min, pmf, hop_seconds=0.0):
        """Custom prior from explicit per-tau masses (renormalized)."""
        pmf = np.asarray(pmf, dtype=np.float64)
        return cls(kind="pmf", tau_min=tau_min, tau_max=tau_min + len(pmf) - 1,
                   pmf=pmf / math.fsum(pmf), hop_seconds=hop_seconds)


def _mixture_pdf(x, components):
    dens = np.zeros_like(x, dtype=np.float64)
    for w, mu, sigma in components:
        dens += w * np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))
    return dens


def fit_duration_gmm(durations, n_components=3, seed=0, hop_seconds=1024 / 96000,
                     widen=0.25, max_iter=500, tol=1e-8):
    """Fit the duration GMM and discretize it to a pmf over frame counts.

    The allowed range [tau_min, tau_max] is the training [min, max] widened
    by ``widen`` on each side, in frames. Variance is floored at
    (hop_seconds / 2)^2 so identical durations degenerate gracefully.
    """
    durations = np.asarray(durations, dtype=np.float64)
    if len(durations) == 0:
        raise ValueError("no durations to fit")
    if np.any(durations <= 0):
        raise ValueError("durations must be positive")
    n_unique = len(np.unique(durations))
    k = min(n_components, n_unique)
    if k < n_components:
        warnings.warn(
            f"reducing duration prior components from {n_components} to {k}: "
            f"only {n_unique} distinct duration(s)"
        )

    model = fit_diagonal_gmm(
        durations[:, None], k, seed=seed,
        var_floor=(hop_seconds / 2.0) ** 2, max_iter=max_iter, tol=tol,
    )
    components = tuple(
        (float(w), float(m[0]), float(np.sqrt(v[0])))
        for w, m, v in zip(model.weights, model.means, model.variances)
    )

    tau_min = max(1, int(np.floor(durations.min() * (1.0 - widen) / hop_seconds)))
    tau_max = max(tau_min, int(np.ceil(durations.max() * (1.0 + widen) / hop_seconds)))
    taus = np.arange(tau_min, tau_max + 1, dtype=np.float64)
    dens = _mixture_pdf(taus * hop_seconds, components)
    return DurationPrior(
        kind="gmm", tau_min=tau_min, tau_max=tau_max, pmf=dens / math.fsum(dens),
        components=components, hop_seconds=hop_seconds,
        loglik_trace=model.loglik_trace,
    )


def flat_prior(tau_min, tau_max):
    """Uniform pmf over frame durations in [tau_min, tau_max]."""
    if tau_min < 1 or tau_min > tau_max:
        raise ValueError(f"invalid duration range [{tau_min}, {tau_max}]")
    n = tau_max - tau_min + 1
    return DurationPrior(kind="flat", tau_min=tau_min, tau_max=tau_max,
                         pmf=np.full(n, 1.0 / n))


def eval_prior(prior, tau):
    """pmf(tau); zero outside [tau_min, tau_max]."""
    if tau < prior.tau_min or tau > prior.tau_max:
        return 0.0
    return float(prior.pmf[tau - prior.tau_min])
