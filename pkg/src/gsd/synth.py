"""Finite-sample RSS estimate synthesis.

A frame's RSS estimate at one receiver is the average of N squared sample
magnitudes. For Gaussian samples the scaled estimate is chi-square with
2N degrees of freedom, so estimates can be synthesized directly at the
statistic level from the true RSS instead of simulating waveforms:

    estimate_i = true_rss_i * c / (2N),   c ~ chi2(2N), independent per receiver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of statistic-level estimate synthesis.

    samples_per_frame: N, samples averaged into one RSS estimate.
    estimates_per_location: E, pool size per location for pair sampling.
    noise_floor: watts added to the true RSS before synthesis (default 0;
        fingerprint data records received power, which already includes it).
    """

    samples_per_frame: int = 150
    estimates_per_location: int = 1000
    noise_floor: float = 0.0

    def __post_init__(self):
        if self.samples_per_frame < 1:
            raise ConfigError("samples_per_frame must be >= 1")
        if self.estimates_per_location < 1:
            raise ConfigError("estimates_per_location must be >= 1")
        if self.noise_floor < 0:
            raise ConfigError("noise_floor must be >= 0")


def check_rss_vector(values: np.ndarray) -> np.ndarray:
    """Validate an RSS vector: finite, strictly positive linear powers."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ConfigError("RSS vector must be 1-D and nonempty")
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise ConfigError("RSS vector entries must be finite and strictly positive")
    return values


def chi2_sample(dof: int, rng: np.random.Generator, size=None):
    """Draw chi-square variates via numpy's gamma-based sampler."""
    if dof < 1:
        raise ConfigError("dof must be >= 1")
    return rng.chisquare(dof, size=size)


def synth_estimate(true_rss: np.ndarray, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """One synthetic RSS estimate: per-receiver chi2(2N)-scaled true RSS."""
    true_rss = check_rss_vector(true_rss)
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    dof = 2 * n_samples
    c = rng.chisquare(dof, size=true_rss.shape)
    return true_rss * c / dof


def synth_estimate_pool(
    true_rss_matrix: np.ndarray, n_samples: int, num_estimates: int, rng: np.random.Generator
) -> np.ndarray:
    """Pool of estimates for many locations at once.

    true_rss_matrix: (D, M) true RSS per location. Returns (D, E, M).
    """
    true = np.asarray(true_rss_matrix, dtype=float)
    if true.ndim != 2:
        raise ConfigError("true_rss_matrix must be (D, M)")
    if not np.all(np.isfinite(true)) or np.any(true <= 0):
        raise ConfigError("true RSS entries must be finite and strictly positive")
    if n_samples < 1 or num_estimates < 1:
        raise ConfigError("n_samples and num_estimates must be >= 1")
    dof = 2 * n_samples
    c = rng.chisquare(dof, size=(true.shape[0], num_estimates, true.shape[1]))
    return true[:, None, :] * c / dof


def estimate_rss_from_samples(samples) -> float:
    """RSS estimate from raw complex samples: mean squared magnitude."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ConfigError("sample list must be nonempty")
    return float(np.mean(np.abs(samples) ** 2))
