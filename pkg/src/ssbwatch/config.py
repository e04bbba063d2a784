"""Run configuration: built-in defaults plus INI-style override files.

The config file is plain line-oriented key/value with ``[section]`` headers
(configparser syntax, ``#`` comments). Only keys that appear override the
defaults; every value is re-validated through the same dataclasses the
library uses, so a bad config fails at load time rather than mid-run.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .cnn import TrainConfig
from .radio import ChannelParams, RadioConfig
from .spectrogram import SpectrogramParams


@dataclass
class RunConfig:
    radio: RadioConfig = field(default_factory=RadioConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    spectrogram: SpectrogramParams = field(default_factory=SpectrogramParams)
    train_cnn: TrainConfig = field(default_factory=TrainConfig)
    # per-case sample counts per split
    train_per_case: int = 2000
    validation_per_case: int = 1000
    test_per_case: int = 400
    duty_cycle: float = 0.7
    jammer_noise: str = "gaussian"
    seed: int = 0
    # knn
    k_values: list[int] = field(default_factory=lambda: [1, 2, 4, 8, 10, 20, 30, 40, 50])
    knn_mode: str = "pca-projected"
    # svm
    kernels: list[str] = field(default_factory=lambda: ["linear", "polynomial", "rbf"])
    svm_dims: list = field(default_factory=lambda: [8, 13, 85, "full"])
    svm_C: float = 1.0
    svm_tol: float = 1e-3
    # bench
    trials: int = 1000
    warmup: int = 10

    def counts(self) -> dict[str, tuple[int, int, int]]:
        return {
            "train": (self.train_per_case,) * 3,
            "validation": (self.validation_per_case,) * 3,
            "test": (self.test_per_case,) * 3,
        }


def _get(parser, section, key, cast, default):
    if parser.has_option(section, key):
        raw = parser.get(section, key)
        return cast(raw)
    return default


def _int_list(raw: str) -> list[int]:
    return [int(v) for v in raw.replace(",", " ").split()]


def _str_list(raw: str) -> list[str]:
    return [v for v in raw.replace(",", " ").split()]


def parse_dims(raw: str) -> list:
    return [v if v == "full" else int(v) for v in raw.replace(",", " ").split()]


def load_config(path: str | Path | None = None) -> RunConfig:
    """Defaults, optionally overridden by an INI file."""
    defaults = RunConfig()
    if path is None:
        return defaults

    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")

    r, ch, sp, tc = defaults.radio, defaults.channel, defaults.spectrogram, defaults.train_cnn
    radio = RadioConfig(
        observation_bandwidth=_get(parser, "radio", "observation_bandwidth", float, r.observation_bandwidth),
        signal_bandwidth=_get(parser, "radio", "signal_bandwidth", float, r.signal_bandwidth),
        subcarrier_spacing=_get(parser, "radio", "subcarrier_spacing", float, r.subcarrier_spacing),
        num_subcarriers=_get(parser, "radio", "num_subcarriers", int, r.num_subcarriers),
        ssb_subcarriers=_get(parser, "radio", "ssb_subcarriers", int, r.ssb_subcarriers),
        ssb_center_offset=_get(parser, "radio", "ssb_center_offset", float, r.ssb_center_offset),
        sample_rate=_get(parser, "radio", "sample_rate", float, r.sample_rate),
    )
    channel = ChannelParams(
        signal_gain=_get(parser, "channel", "signal_gain", float, ch.signal_gain),
        jammer_gain=_get(parser, "channel", "jammer_gain", float, ch.jammer_gain),
        noise_power=_get(parser, "channel", "noise_power", float, ch.noise_power),
    )
    spectro = SpectrogramParams(
        window_size=_get(parser, "spectrogram", "window_size", int, sp.window_size),
        stack_depth=_get(parser, "spectrogram", "stack_depth", int, sp.stack_depth),
        epsilon=_get(parser, "spectrogram", "epsilon", float, sp.epsilon),
    )
    train_cnn = TrainConfig(
        batch_size=_get(parser, "cnn", "batch_size", int, tc.batch_size),
        learning_rate=_get(parser, "cnn", "learning_rate", float, tc.learning_rate),
        patience=_get(parser, "cnn", "patience", int, tc.patience),
        consecutive_patience=_get(parser, "cnn", "consecutive_patience",
                                  lambda s: s.lower() in ("1", "true", "yes"), tc.consecutive_patience),
        max_epochs=_get(parser, "cnn", "max_epochs", int, tc.max_epochs),
        seed=_get(parser, "cnn", "seed", int, tc.seed),
    )
    return RunConfig(
        radio=radio,
        channel=channel,
        spectrogram=spectro,
        train_cnn=train_cnn,
        train_per_case=_get(parser, "dataset", "train_per_case", int, defaults.train_per_case),
        validation_per_case=_get(parser, "dataset", "validation_per_case", int, defaults.validation_per_case),
        test_per_case=_get(parser, "dataset", "test_per_case", int, defaults.test_per_case),
        duty_cycle=_get(parser, "dataset", "duty_cycle", float, defaults.duty_cycle),
        jammer_noise=_get(parser, "dataset", "jammer_noise", str, defaults.jammer_noise),
        seed=_get(parser, "dataset", "seed", int, defaults.seed),
        k_values=_get(parser, "knn", "k_values", _int_list, defaults.k_values),
        knn_mode=_get(parser, "knn", "mode", str, defaults.knn_mode),
        kernels=_get(parser, "svm", "kernels", _str_list, defaults.kernels),
        svm_dims=_get(parser, "svm", "dims", parse_dims, defaults.svm_dims),
        svm_C=_get(parser, "svm", "C", float, defaults.svm_C),
        svm_tol=_get(parser, "svm", "tol", float, defaults.svm_tol),
        trials=_get(parser, "bench", "trials", int, defaults.trials),
        warmup=_get(parser, "bench", "warmup", int, defaults.warmup),
    )


DEFAULT_CONFIG_TEXT = """\
# ssbwatch run configuration. Values shown are the built-in defaults; delete
# anything you do not want to override.

[radio]
observation_bandwidth = 120e6   # watchdog capture span (Hz)
signal_bandwidth = 100e6        # downlink occupancy (Hz)
subcarrier_spacing = 30e3
num_subcarriers = 3333
ssb_subcarriers = 240           # 7.2 MHz synchronization block
ssb_center_offset = -40.08e6    # SSB center relative to the carrier (Hz)
sample_rate = 128e6             # capture metadata only

[channel]
# linear amplitudes against a per-bin noise-floor PSD of noise_power
signal_gain = 0.01778279410038923   # downlink 25 dB above the floor
jammer_gain = 0.03162277660168379   # jammer 30 dB above the floor
noise_power = 1e-6

[spectrogram]
window_size = 1024
stack_depth = 100
epsilon = 1e-21

[dataset]
train_per_case = 2000           # 6000 train / 3000 validation / 1200 test total
validation_per_case = 1000
test_per_case = 400
duty_cycle = 0.7                # share of symbols carrying full-band traffic
jammer_noise = gaussian         # or "uniform"
seed = 0

[cnn]
batch_size = 32
learning_rate = 1e-3
patience = 3                    # stop after three non-improving validation epochs
consecutive_patience = false    # true: the three must be consecutive
max_epochs = 30
seed = 0

[knn]
k_values = 1, 2, 4, 8, 10, 20, 30, 40, 50
mode = pca-projected            # or "standardized-full"

[svm]
kernels = linear, polynomial, rbf
dims = 8, 13, 85, full
C = 1.0
tol = 1e-3

[bench]
trials = 1000
warmup = 10
"""


def write_default_config(path: str | Path) -> None:
    Path(path).write_text(DEFAULT_CONFIG_TEXT)
