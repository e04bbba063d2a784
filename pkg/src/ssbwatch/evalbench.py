"""Measurement machinery: detection curves, latency CDFs, gain sweeps.

Decision rule everywhere: a sample is called jammed when its score is at or
above the threshold (the boundary itself counts as a detection). False-alarm
and misdetection rates are empirical conditional frequencies on the benign
and jammed subsets respectively.

Percentiles are nearest-rank with the conservative convention
rank = floor(p * n) + 1 (capped at n), so the reported value always has
empirical CDF >= p and, at exact multiples, sits one sample above the naive
cut: the 90th percentile of ten samples is the largest one.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .radio import CaseLabel, ChannelParams, RadioConfig, derive_seed, generate_frame
from .spectrogram import SpectrogramParams, make_spectrogram

DEFAULT_TAU_GRID = np.linspace(0.0, 1.0, 1001)


def threshold_decision(score: float, threshold: float) -> int:
    """1 (jammed) iff score >= threshold; the boundary is a detection."""
    return 1 if score >= threshold else 0


def accuracy_percent(predictions: np.ndarray, labels: np.ndarray) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if len(predictions) == 0:
        return float("nan")
    return 100.0 * float(np.mean(predictions == labels))


@dataclass
class FaMdCurve:
    taus: np.ndarray
    p_fa: np.ndarray
    p_md: np.ndarray


def fa_md_curve(scores: np.ndarray, labels: np.ndarray,
                taus: np.ndarray | None = None) -> FaMdCurve:
    """Empirical false-alarm and misdetection probabilities over a threshold grid."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    taus = DEFAULT_TAU_GRID if taus is None else np.asarray(taus, dtype=np.float64)
    benign = scores[labels == 0]
    jammed = scores[labels == 1]
    if len(benign) == 0 or len(jammed) == 0:
        raise ValueError("need both classes in the evaluation set")
    flagged = lambda s: (s[:, None] >= taus[None, :]).mean(axis=0)
    return FaMdCurve(taus=taus, p_fa=flagged(benign), p_md=1.0 - flagged(jammed))


def nearest_rank_percentile(samples: Sequence[float], p: float) -> float:
    """Nearest-rank percentile, p in [0, 1], rank = floor(p*n) + 1 capped at n."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    ordered = np.sort(np.asarray(samples, dtype=np.float64))
    n = len(ordered)
    if n == 0:
        raise ValueError("need at least one sample")
    rank = min(int(np.floor(p * n)) + 1, n)
    return float(ordered[rank - 1])


@dataclass
class LatencyCdf:
    """Sorted per-trial durations (seconds) with percentile access."""

    samples: np.ndarray
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.samples = np.sort(np.asarray(self.samples, dtype=np.float64))
        if len(self.samples) == 0:
            raise ValueError("latency CDF needs at least one sample")

    def percentile(self, p: float) -> float:
        return nearest_rank_percentile(self.samples, p)

    def cdf(self) -> tuple[np.ndarray, np.ndarray]:
        n = len(self.samples)
        return self.samples, np.arange(1, n + 1) / n


def measure_latency(classify_one: Callable, inputs: Sequence, trials: int = 1000,
                    warmup: int = 10) -> LatencyCdf:
    """Time ``trials`` single-sample classifications on the calling thread.

    ``classify_one`` takes one element of ``inputs`` (already in the model's
    input representation) and returns its decision; inputs are cycled. A
    warm-up pass runs untimed to exclude cold caches. If the clock's stated
    resolution is coarser than 1% of the median duration, a warning is
    recorded on the result instead of silently reporting garbage.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if len(inputs) == 0:
        raise ValueError("need at least one input")
    for i in range(warmup):
        classify_one(inputs[i % len(inputs)])
    durations = np.empty(trials)
    for t in range(trials):
        x = inputs[t % len(inputs)]
        start = time.perf_counter_ns()
        classify_one(x)
        durations[t] = (time.perf_counter_ns() - start) * 1e-9
    result = LatencyCdf(samples=durations)
    resolution = time.get_clock_info("perf_counter").resolution
    median = float(np.median(durations))
    if median <= 0 or resolution > 0.01 * median:
        result.warnings.append(
            f"clock resolution {resolution:.3e}s exceeds 1% of median duration {median:.3e}s"
        )
    return result


@dataclass
class GainSweepResult:
    gains_db: list[float]
    relative_distance: list[float]   # amplitude ratio to the reference gain
    outputs: list[np.ndarray]        # detector scores on jammed samples, per gain
    p90: list[float]


def gain_sweep(config: RadioConfig, channel: ChannelParams, gains_db: Sequence[float],
               model, samples_per_gain: int = 40, seed: int = 0,
               params: SpectrogramParams | None = None,
               duty_cycle: float = 0.7) -> GainSweepResult:
    """Detector response to jammed samples as the jammer amplitude drops.

    Each entry of ``gains_db`` replaces the jammer amplitude with
    10**(dB/20); fresh jammed samples are generated per gain and scored with
    the trained detector. The 90th percentile of the scores summarizes each
    gain, and distances are reported as the amplitude ratio to the
    template's reference gain (inverse-square path loss makes amplitude
    ratio equal distance ratio).
    """
    params = params or SpectrogramParams()
    reference_db = channel.jammer_gain_db
    result = GainSweepResult([], [], [], [])
    for g_index, gain_db in enumerate(gains_db):
        swept = channel.with_jammer_gain_db(gain_db)
        scores = np.empty(samples_per_gain)
        batch = np.empty((samples_per_gain, params.stack_depth, params.window_size, 1),
                         dtype=np.float32)
        for i in range(samples_per_gain):
            frame = generate_frame(
                config, swept, CaseLabel.JAMMED, duty_cycle=duty_cycle,
                seed=derive_seed(seed, g_index, i),
                num_samples=params.samples_per_spectrogram,
            )
            batch[i, :, :, 0] = make_spectrogram(frame, params).values
        scores = model.predict(batch)
        result.gains_db.append(float(gain_db))
        result.relative_distance.append(10.0 ** ((reference_db - gain_db) / 20.0))
        result.outputs.append(scores)
        result.p90.append(nearest_rank_percentile(scores, 0.90))
    return result
