"""Synthetic complex-baseband IQ generation for a monitored 5G downlink.

Models a watchdog receiver observing an OFDM downlink that may carry TDD
traffic, periodic synchronization beacons, and a narrowband jammer parked on
the synchronization sub-band (SSB). Per subcarrier the received sample is

    y = signal_gain * x + jammer_gain * x_jam + w

with x a QPSK data/beacon symbol, x_jam jammer noise confined to the SSB
bins, and w circular AWGN. Gains are linear amplitudes; a unit-power symbol
at gain g produces a per-bin PSD of g**2 in the analysis pipeline, so gains
are directly interpretable against the noise floor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

_MASK64 = (1 << 64) - 1

# unit-power QPSK constellation
QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j], dtype=np.complex128) / np.sqrt(2.0)


def splitmix64(x: int) -> int:
    """One splitmix64 step; the documented mixing primitive for seed derivation."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master: int, *indices: int) -> int:
    """Fold indices into a master seed via splitmix64.

    The derivation is fixed so that parallel and serial builds that hand out
    per-item seeds agree: seed_i = derive_seed(master, i) regardless of the
    order items are produced in.
    """
    s = splitmix64(master & _MASK64)
    for i in indices:
        s = splitmix64(s ^ splitmix64(i & _MASK64))
    return s


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent RNG substream (signal / jammer / noise draws stay decoupled)."""
    return np.random.default_rng(derive_seed(seed, index))


def gain_db_to_linear(gain_db: float) -> float:
    """Amplitude-dB to linear amplitude: 10**(dB/20). Monotone increasing."""
    return 10.0 ** (gain_db / 20.0)


class CaseLabel(IntEnum):
    """The three labeled channel states seen by the watchdog."""

    EMPTY_CHANNEL = 0
    ONGOING_TRANSMISSION = 1
    JAMMED = 2

    @property
    def binary_label(self) -> int:
        """1 for an attack (jammed), 0 for the two legitimate states."""
        return int(self is CaseLabel.JAMMED)


@dataclass(frozen=True)
class RadioConfig:
    """Static radio parameters of the monitored cell and the watchdog frontend.

    Defaults model an n78-style private network: a 100 MHz downlink observed
    over 120 MHz, 30 kHz subcarrier spacing, 3333 occupied subcarriers, and a
    7.2 MHz (240 subcarrier) synchronization block centered 40.08 MHz below
    the carrier.
    """

    observation_bandwidth: float = 120e6
    signal_bandwidth: float = 100e6
    subcarrier_spacing: float = 30e3
    num_subcarriers: int = 3333
    ssb_subcarriers: int = 240
    ssb_center_offset: float = -40.08e6
    sample_rate: float = 128e6

    def __post_init__(self) -> None:
        if self.subcarrier_spacing <= 0 or self.sample_rate <= 0:
            raise ValueError("subcarrier_spacing and sample_rate must be positive")
        if not (self.num_subcarriers * self.subcarrier_spacing
                <= self.signal_bandwidth <= self.observation_bandwidth):
            raise ValueError("need num_subcarriers*spacing <= signal_bandwidth <= observation_bandwidth")
        if not 0 < self.ssb_subcarriers < self.num_subcarriers:
            raise ValueError("SSB must occupy a strict, nonempty subset of the signal subcarriers")
        half_ssb = self.ssb_subcarriers * self.subcarrier_spacing / 2
        if abs(self.ssb_center_offset) + half_ssb > self.observation_bandwidth / 2:
            raise ValueError("SSB band falls outside the observation bandwidth")

    @property
    def fft_grid_size(self) -> int:
        """Synthesis IFFT size: next power of two covering the observation span."""
        bins = math.ceil(self.observation_bandwidth / self.subcarrier_spacing)
        return 1 << (bins - 1).bit_length()

    def data_bins(self) -> np.ndarray:
        """Indices of the occupied downlink subcarriers on the shifted grid."""
        center = self.fft_grid_size // 2
        lo = center - self.num_subcarriers // 2
        return np.arange(lo, lo + self.num_subcarriers)

    def ssb_bins(self) -> np.ndarray:
        """Indices of the SSB subcarriers on the shifted grid."""
        center = self.fft_grid_size // 2
        offset = round(self.ssb_center_offset / self.subcarrier_spacing)
        lo = center + offset - self.ssb_subcarriers // 2
        return np.arange(lo, lo + self.ssb_subcarriers)


@dataclass(frozen=True)
class ChannelParams:
    """Frequency-flat link gains and receiver noise power.

    Defaults put the downlink 25 dB and the jammer 30 dB above the per-bin
    noise floor, mimicking a short-range lab deployment where absolute
    transmit powers are a calibration rather than a model input.
    """

    signal_gain: float = math.sqrt(10 ** (25 / 10) * 1e-6)
    jammer_gain: float = math.sqrt(10 ** (30 / 10) * 1e-6)
    noise_power: float = 1e-6

    def __post_init__(self) -> None:
        # zero noise is allowed so component frames compose sample-exactly
        if self.noise_power < 0:
            raise ValueError("noise_power must be nonnegative")
        if self.signal_gain < 0 or self.jammer_gain < 0:
            raise ValueError("gains must be nonnegative")

    @property
    def jammer_gain_db(self) -> float:
        """dB view of the jammer amplitude, for gain sweeps."""
        return 20.0 * math.log10(self.jammer_gain)

    def with_jammer_gain_db(self, gain_db: float) -> "ChannelParams":
        return ChannelParams(self.signal_gain, gain_db_to_linear(gain_db), self.noise_power)


@dataclass
class IqFrame:
    """A window of complex baseband samples plus capture metadata."""

    samples: np.ndarray
    sample_rate: float
    case: CaseLabel
    seed: int | None = None

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1 or len(self.samples) == 0:
            raise ValueError("samples must be a nonempty 1-D complex array")
        if not np.all(np.isfinite(self.samples.view(np.float64))):
            raise ValueError("samples must be finite")

    def __len__(self) -> int:
        return len(self.samples)


# maximum frame length; guards runaway allocations from bad configs
MAX_FRAME_SAMPLES = 1 << 26


def generate_frame(
    config: RadioConfig,
    channel: ChannelParams,
    case: CaseLabel,
    duty_cycle: float = 0.7,
    seed: int = 0,
    num_samples: int = 102400,
    jammer_noise: str = "gaussian",
    beacon_period: int = 20,
) -> IqFrame:
    """Synthesize one labeled IQ frame of at least ``num_samples`` samples.

    Per OFDM symbol, QPSK symbols are drawn on the active subcarriers and
    converted to time domain with an inverse FFT on the observation grid
    (active bins centered, no cyclic prefix). Occupancy per case:

    * EMPTY_CHANNEL: one beacon symbol per ``beacon_period`` symbols, on the
      SSB subcarriers only.
    * ONGOING_TRANSMISSION: each symbol carries full-band data with
      probability ``duty_cycle``; idle beacon slots still carry beacons.
    * JAMMED: beacons as in the empty case, plus jammer noise on the SSB
      bins of every symbol (100% jammer duty cycle).

    Signal, jammer, and noise values come from independent seeded substreams,
    so frames generated with one gain zeroed compose additively, sample-exact,
    into the jointly generated frame.
    """
    if not 0.0 <= duty_cycle <= 1.0:
        raise ValueError(f"duty_cycle must lie in [0, 1], got {duty_cycle}")
    if jammer_noise not in ("gaussian", "uniform"):
        raise ValueError(f"unknown jammer_noise kind: {jammer_noise!r}")
    if beacon_period < 1:
        raise ValueError("beacon_period must be >= 1")
    if num_samples < 1 or num_samples > MAX_FRAME_SAMPLES:
        raise ValueError(f"num_samples must lie in [1, {MAX_FRAME_SAMPLES}]")

    n_fft = config.fft_grid_size
    n_sym = -(-num_samples // n_fft)  # whole symbols only
    if n_sym * n_fft > MAX_FRAME_SAMPLES:
        raise ValueError("frame length overflow")

    rng_sched = substream(seed, 0)
    rng_sig = substream(seed, 1)
    rng_jam = substream(seed, 2)
    rng_noise = substream(seed, 3)

    data_bins = config.data_bins()
    ssb_bins = config.ssb_bins()

    beacon_slots = (np.arange(n_sym) % beacon_period) == 0
    if case is CaseLabel.ONGOING_TRANSMISSION:
        data_slots = rng_sched.random(n_sym) < duty_cycle
        beacon_slots = beacon_slots & ~data_slots
    else:
        data_slots = np.zeros(n_sym, dtype=bool)

    grid = np.zeros((n_sym, n_fft), dtype=np.complex128)
    n_beacon = int(beacon_slots.sum())
    if n_beacon:
        symbols = QPSK[rng_sig.integers(4, size=(n_beacon, len(ssb_bins)))]
        grid[np.flatnonzero(beacon_slots)[:, None], ssb_bins] = channel.signal_gain * symbols
    n_data = int(data_slots.sum())
    if n_data:
        symbols = QPSK[rng_sig.integers(4, size=(n_data, len(data_bins)))]
        grid[np.flatnonzero(data_slots)[:, None], data_bins] = channel.signal_gain * symbols

    # sqrt(N) IFFT scaling keeps per-bin PSD equal to gain**2 for unit symbols
    sig_time = (np.fft.ifft(np.fft.ifftshift(grid, axes=1), axis=1) * np.sqrt(n_fft)).ravel()

    total = n_sym * n_fft
    scale = np.sqrt(channel.noise_power / 2.0)
    noise = scale * (rng_noise.standard_normal(total) + 1j * rng_noise.standard_normal(total))
    samples = sig_time + noise

    if case is CaseLabel.JAMMED:
        if jammer_noise == "gaussian":
            draws = (rng_jam.standard_normal((n_sym, len(ssb_bins)))
                     + 1j * rng_jam.standard_normal((n_sym, len(ssb_bins)))) / np.sqrt(2.0)
        else:
            width = np.sqrt(1.5)  # unit power per bin
            draws = (rng_jam.uniform(-width, width, (n_sym, len(ssb_bins)))
                     + 1j * rng_jam.uniform(-width, width, (n_sym, len(ssb_bins))))
        jam_grid = np.zeros((n_sym, n_fft), dtype=np.complex128)
        jam_grid[:, ssb_bins] = channel.jammer_gain * draws
        jam_time = (np.fft.ifft(np.fft.ifftshift(jam_grid, axes=1), axis=1) * np.sqrt(n_fft)).ravel()
        samples = samples + jam_time

    return IqFrame(samples=samples, sample_rate=config.sample_rate, case=case, seed=seed)


def write_iq_frame(frame: IqFrame, stem: str | Path) -> tuple[Path, Path]:
    """Export a frame as interleaved little-endian float32 I,Q plus a JSON sidecar."""
    stem = Path(stem)
    iq_path = stem.with_suffix(".iq")
    meta_path = stem.with_suffix(".json")
    interleaved = np.empty(2 * len(frame.samples), dtype="<f4")
    interleaved[0::2] = frame.samples.real
    interleaved[1::2] = frame.samples.imag
    iq_path.write_bytes(interleaved.tobytes())
    meta = {
        "format": "interleaved float32 I,Q little-endian",
        "sample_rate": frame.sample_rate,
        "case": frame.case.name,
        "seed": frame.seed,
        "num_samples": len(frame.samples),
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return iq_path, meta_path


def read_iq_frame(stem: str | Path) -> IqFrame:
    """Read a frame written by :func:`write_iq_frame`."""
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    raw = np.frombuffer(stem.with_suffix(".iq").read_bytes(), dtype="<f4")
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    if len(samples) != meta["num_samples"]:
        raise ValueError("IQ payload length does not match sidecar")
    return IqFrame(
        samples=samples,
        sample_rate=float(meta["sample_rate"]),
        case=CaseLabel[meta["case"]],
        seed=meta["seed"],
    )
