"""Monte Carlo dropout: predictive mean and per-coordinate variance."""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePose
from .seqmodel import predict_batch

VAR_FLOOR = 1e-8


@dataclass
class PredictiveDistribution:
    """Per-step mean and variance of ``K`` stochastic predictions, both ``(M, d)``.

    ``samples`` keeps the ``(K, M, d)`` draws the moments were computed from.
    """

    mean: np.ndarray
    variance: np.ndarray
    K: int
    samples: np.ndarray = None

    @property
    def d(self):
        return self.mean.shape[1]

    @property
    def horizon(self):
        return self.mean.shape[0]


def pass_seeds(seed, K):
    """Seeds of the ``K`` stochastic passes derived from one run seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(K)]


def moments(samples):
    """Mean and population variance, streamed over samples in order (Welford).

    Identical samples give exactly zero variance.
    """
    samples = np.asarray(samples, dtype=float)
    mean = np.zeros(samples.shape[1:])
    m2 = np.zeros(samples.shape[1:])
    for k, y in enumerate(samples, start=1):
        delta = y - mean
        mean = mean + delta / k
        m2 = m2 + delta * (y - mean)
    return mean, m2 / samples.shape[0]


def distribution_from_samples(samples):
    samples = np.asarray(samples, dtype=float)
    mean, var = moments(samples)
    return PredictiveDistribution(mean, var, samples.shape[0], samples)


def mc_dropout_predict(model, observed, K=10, seed=0, predictor=None):
    """Run ``K`` seeded dropout passes and summarize them.

    Parameters
    ----------
    model : SeqModel
        Ignored when ``predictor`` is given.
    observed : array_like, shape (N, d)
    K : int
        Number of stochastic passes, at least 2.
    seed : int
        Run seed; pass ``k`` uses the ``k``-th seed of :func:`pass_seeds`.
    predictor : callable, optional
        ``predictor(observed, pass_seed) -> (M, d)`` replacing the model.

    Returns
    -------
    PredictiveDistribution
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    seeds = pass_seeds(seed, K)
    if predictor is not None:
        samples = np.stack([np.asarray(predictor(observed, s), dtype=float) for s in seeds])
    else:
        observed = np.asarray(observed, dtype=float)
        batch = np.broadcast_to(observed, (K,) + observed.shape)
        samples = predict_batch(model, batch, [np.random.default_rng(s) for s in seeds])
    return distribution_from_samples(samples)


def surrogate_measurement(dist, scale=None, floor=VAR_FLOOR):
    """Filter measurements from a pose distribution.

    Returns
    -------
    y_star : ndarray, shape (M, 6)
        Mean bone vectors renormalized to unit length.
    r_diag : ndarray, shape (M, 6)
        ``max(scale * variance, floor)``, the measurement-noise diagonals.

    Raises
    ------
    DegeneratePose
        If a mean bone vector is shorter than 1e-6.
    """
    mean = np.asarray(dist.mean, dtype=float)
    if mean.shape[-1] != 6:
        raise ValueError("surrogate measurements need a pose distribution")
    scale = np.ones(6) if scale is None else np.asarray(scale, dtype=float)
    na = np.linalg.norm(mean[:, :3], axis=1, keepdims=True)
    nb = np.linalg.norm(mean[:, 3:], axis=1, keepdims=True)
    if np.any(na < 1e-6) or np.any(nb < 1e-6):
        raise DegeneratePose("mean bone vector has (near) zero length")
    y_star = np.concatenate([mean[:, :3] / na, mean[:, 3:] / nb], axis=1)
    return y_star, np.maximum(scale * dist.variance, floor)
