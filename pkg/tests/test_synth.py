"""Chi-square estimate synthesis: moment oracles and stream behavior."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsd.errors import ConfigError
from gsd.synth import (
    SynthConfig,
    chi2_sample,
    estimate_rss_from_samples,
    synth_estimate,
    synth_estimate_pool,
)


def test_chi2_moments_match_dof():
    # moment oracle: chi2(dof) has mean dof and variance 2*dof
    rng = np.random.default_rng(7)
    dof = 300  # 2N at N=150
    draws = chi2_sample(dof, rng, size=100_000)
    assert abs(draws.mean() - dof) < 0.01 * dof
    assert abs(draws.var() - 2 * dof) < 0.05 * 2 * dof


def test_chi2_support_nonnegative():
    rng = np.random.default_rng(1)
    assert np.all(chi2_sample(1, rng, size=1000) >= 0)


def test_chi2_fixed_seed_reproduces():
    a = chi2_sample(10, np.random.default_rng(42), size=50)
    b = chi2_sample(10, np.random.default_rng(42), size=50)
    assert np.array_equal(a, b)


def test_chi2_rejects_zero_dof():
    with pytest.raises(ConfigError):
        chi2_sample(0, np.random.default_rng(0))


def test_synth_estimate_mean_converges():
    # law of large numbers oracle: E[estimate] = true_rss, Var = true^2/N
    rng = np.random.default_rng(11)
    draws = np.array([synth_estimate(np.array([1.0]), 150, rng)[0] for _ in range(10_000)])
    assert abs(draws.mean() - 1.0) < 0.02
    assert abs(draws.var() - 1.0 / 150) < 0.1 / 150


def test_synth_estimate_variance_scales_with_true_rss():
    rng = np.random.default_rng(2)
    true = np.array([4.0])
    draws = np.array([synth_estimate(true, 100, rng)[0] for _ in range(10_000)])
    assert abs(draws.mean() - 4.0) < 0.02 * 4.0
    assert abs(draws.var() - 16.0 / 100) < 0.1 * 16.0 / 100


def test_variance_monotone_in_sample_count():
    true = np.array([1.0])
    variances = {}
    for n in (25, 150, 600):
        rng = np.random.default_rng(100 + n)
        draws = np.array([synth_estimate(true, n, rng)[0] for _ in range(5_000)])
        variances[n] = draws.var()
    assert variances[600] < variances[150] < variances[25]


def test_disjoint_seeds_give_distinct_streams():
    root = np.random.SeedSequence(5)
    s1, s2 = root.spawn(2)
    a = synth_estimate_pool(np.array([[1.0, 2.0]]), 50, 64, np.random.default_rng(s1))
    b = synth_estimate_pool(np.array([[1.0, 2.0]]), 50, 64, np.random.default_rng(s2))
    assert not np.array_equal(a, b)


def test_zero_entry_rejected():
    with pytest.raises(ConfigError):
        synth_estimate(np.array([1.0, 0.0]), 10, np.random.default_rng(0))


@settings(deadline=None, max_examples=25)
@given(
    values=st.lists(st.floats(min_value=1e-12, max_value=1e3), min_size=1, max_size=6),
    n=st.integers(min_value=1, max_value=500),
)
def test_outputs_strictly_positive(values, n):
    rng = np.random.default_rng(0)
    out = synth_estimate(np.array(values), n, rng)
    assert np.all(out > 0) and np.all(np.isfinite(out))


def test_estimate_from_constant_magnitude_samples():
    assert estimate_rss_from_samples([1, 1, 1, 1]) == pytest.approx(1.0)


def test_estimate_from_unit_magnitude_complex():
    assert estimate_rss_from_samples([1 + 0j, 0 + 1j]) == pytest.approx(1.0)


def test_estimate_hand_computed():
    # (|2|^2 + |0|^2) / 2 = 2
    assert estimate_rss_from_samples([2, 0]) == pytest.approx(2.0)


def test_estimate_rejects_empty():
    with pytest.raises(ConfigError):
        estimate_rss_from_samples([])


def test_config_validation():
    with pytest.raises(ConfigError):
        SynthConfig(samples_per_frame=0)
    with pytest.raises(ConfigError):
        SynthConfig(estimates_per_location=0)
    with pytest.raises(ConfigError):
        SynthConfig(noise_floor=-1.0)
