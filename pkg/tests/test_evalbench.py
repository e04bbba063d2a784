"""Detection-curve, percentile, latency-harness, and gain-sweep tests."""

import time

import numpy as np
import pytest

from ssbwatch.evalbench import (
    LatencyCdf,
    accuracy_percent,
    fa_md_curve,
    gain_sweep,
    measure_latency,
    nearest_rank_percentile,
    threshold_decision,
)
from ssbwatch.radio import ChannelParams, RadioConfig


def test_threshold_decision_boundary_inclusive():
    assert threshold_decision(0.7, 0.5) == 1
    assert threshold_decision(0.5, 0.5) == 1
    assert threshold_decision(0.499999, 0.5) == 0
    assert threshold_decision(0.0, 0.0) == 1   # tau 0 flags everything
    assert threshold_decision(0.999, 1.0) == 0  # tau 1 only at exactly 1
    assert threshold_decision(1.0, 1.0) == 1


def test_fa_md_hand_enumeration():
    scores = np.array([0.2, 0.6, 0.4, 0.9])
    labels = np.array([0, 0, 1, 1])
    curve = fa_md_curve(scores, labels, taus=np.array([0.5]))
    assert curve.p_fa[0] == pytest.approx(0.5)
    assert curve.p_md[0] == pytest.approx(0.5)


def test_fa_md_perfect_scores():
    scores = np.array([0.0, 0.0, 1.0, 1.0])
    labels = np.array([0, 0, 1, 1])
    curve = fa_md_curve(scores, labels)
    interior = (curve.taus > 0) & (curve.taus <= 1)
    assert np.all(curve.p_fa[interior] == 0.0)
    assert np.all(curve.p_md[interior] == 0.0)


def test_fa_md_tau_zero_extreme():
    scores = np.array([0.3, 0.8])
    labels = np.array([0, 1])
    curve = fa_md_curve(scores, labels, taus=np.array([0.0]))
    assert curve.p_fa[0] == 1.0  # inclusive rule flags everything at tau 0
    assert curve.p_md[0] == 0.0


def test_fa_md_monotonicity_random_scores():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = rng.integers(4, 60)
        scores = rng.random(n)
        labels = np.concatenate([[0, 1], rng.integers(0, 2, n - 2)])
        curve = fa_md_curve(scores, labels)
        assert np.all(np.diff(curve.p_fa) <= 1e-12)
        assert np.all(np.diff(curve.p_md) >= -1e-12)
        assert np.all((curve.p_fa >= 0) & (curve.p_fa <= 1))
        assert np.all((curve.p_md >= 0) & (curve.p_md <= 1))


def test_fa_md_complement_identity():
    rng = np.random.default_rng(1)
    scores = rng.random(40)
    labels = np.concatenate([[0, 1], rng.integers(0, 2, 38)])
    curve = fa_md_curve(scores, labels)
    benign = scores[labels == 0]
    for tau, fa in zip(curve.taus[::100], curve.p_fa[::100]):
        correct_benign = np.mean(benign < tau)
        assert fa + correct_benign == pytest.approx(1.0)


def test_fa_md_requires_both_classes():
    with pytest.raises(ValueError):
        fa_md_curve(np.array([0.1, 0.2]), np.array([0, 0]))


def test_nearest_rank_percentile_definition():
    # frozen hand check: 90th percentile of {0.1, ..., 1.0} is 1.0
    samples = np.arange(1, 11) * 0.1
    assert nearest_rank_percentile(samples, 0.90) == pytest.approx(1.0)
    assert nearest_rank_percentile(samples, 0.95) == pytest.approx(1.0)
    assert nearest_rank_percentile(samples, 0.0) == pytest.approx(0.1)
    assert nearest_rank_percentile(samples, 1.0) == pytest.approx(1.0)
    assert nearest_rank_percentile(samples, 0.85) == pytest.approx(0.9)
    with pytest.raises(ValueError):
        nearest_rank_percentile(samples, 1.5)
    with pytest.raises(ValueError):
        nearest_rank_percentile([], 0.5)


def test_latency_cdf_p95_covers_95_percent():
    rng = np.random.default_rng(2)
    cdf = LatencyCdf(samples=rng.random(1000) * 1e-3)
    p95 = cdf.percentile(0.95)
    values, fractions = cdf.cdf()
    assert fractions[np.searchsorted(values, p95, side="right") - 1] >= 0.95
    assert np.all(np.diff(fractions) >= 0)
    assert fractions[-1] == pytest.approx(1.0)


def test_measure_latency_stub_classifier():
    def stub(_x):  # constant-time classifier: spins for exactly 1 ms
        start = time.perf_counter()
        while time.perf_counter() - start < 1e-3:
            pass

    cdf = measure_latency(stub, inputs=[0], trials=50, warmup=2)
    p95 = cdf.percentile(0.95)
    assert 1e-3 <= p95 <= 1.5e-3
    assert len(cdf.samples) == 50
    assert np.all(cdf.samples > 0)


def test_measure_latency_single_trial():
    cdf = measure_latency(lambda x: None, inputs=[1, 2, 3], trials=1)
    assert len(cdf.samples) == 1
    values, fractions = cdf.cdf()
    assert fractions.tolist() == [1.0]


def test_measure_latency_argument_errors():
    with pytest.raises(ValueError):
        measure_latency(lambda x: None, inputs=[], trials=10)
    with pytest.raises(ValueError):
        measure_latency(lambda x: None, inputs=[0], trials=0)


def test_measure_latency_warns_on_coarse_clock(monkeypatch):
    import ssbwatch.evalbench as eb

    class CoarseClock:
        resolution = 1.0

    monkeypatch.setattr(eb.time, "get_clock_info", lambda name: CoarseClock())
    cdf = measure_latency(lambda x: None, inputs=[0], trials=5)
    assert len(cdf.warnings) == 1
    assert "resolution" in cdf.warnings[0]


def test_accuracy_percent():
    assert accuracy_percent(np.array([1, 0, 1]), np.array([1, 1, 1])) == pytest.approx(200 / 3)
    assert np.isnan(accuracy_percent(np.array([]), np.array([])))


class ConstantModel:
    """Stand-in detector: score rises with mean input energy."""

    def predict(self, x, batch_size=32):
        level = x.mean(axis=(1, 2, 3))
        return 1.0 / (1.0 + np.exp(-(10.0 - level)))  # bright (low -log PSD) -> high score


def test_gain_sweep_shapes_distances_and_determinism():
    from ssbwatch.spectrogram import SpectrogramParams

    cfg = RadioConfig()
    channel = ChannelParams()
    params = SpectrogramParams(window_size=128, stack_depth=8)
    gains = [channel.jammer_gain_db, channel.jammer_gain_db - 20.0]
    a = gain_sweep(cfg, channel, gains, ConstantModel(), samples_per_gain=3,
                   seed=5, params=params)
    b = gain_sweep(cfg, channel, gains, ConstantModel(), samples_per_gain=3,
                   seed=5, params=params)
    assert a.gains_db == gains
    assert a.relative_distance[0] == pytest.approx(1.0)
    assert a.relative_distance[1] == pytest.approx(10.0)  # 20 dB -> 10x distance
    for pa, pb in zip(a.p90, b.p90):
        assert pa == pb
    assert all(len(o) == 3 for o in a.outputs)
    assert all(0.0 < p < 1.0 for p in a.p90)
