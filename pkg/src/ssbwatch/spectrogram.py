"""IQ frames to labeled spectrograms, and the on-disk dataset format.

The watchdog pipeline slices a frame into consecutive non-overlapping
windows of ``window_size`` IQ samples, takes a plain FFT periodogram per
window (|FFT|^2 / window_size, shifted so index 0 is the lowest frequency),
applies -log(x + epsilon) elementwise, and stacks ``stack_depth`` rows into
one matrix. No tapering, no overlap, no Welch averaging.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import containers as c
from .radio import CaseLabel, ChannelParams, RadioConfig, derive_seed, generate_frame

DATASET_MAGIC = b"SSBSPEC1"
SPLIT_NAMES = ("train", "validation", "test")


@dataclass(frozen=True)
class SpectrogramParams:
    """Windowing parameters of the spectrogram pipeline."""

    window_size: int = 1024
    stack_depth: int = 100
    epsilon: float = 1e-21

    def __post_init__(self) -> None:
        if self.window_size < 1 or self.window_size & (self.window_size - 1):
            raise ValueError("window_size must be a power of two")
        if self.stack_depth < 1:
            raise ValueError("stack_depth must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    @property
    def samples_per_spectrogram(self) -> int:
        return self.window_size * self.stack_depth


@dataclass
class Spectrogram:
    """A stack_depth x window_size matrix of log-compressed PSD rows."""

    values: np.ndarray  # float32, shape (stack_depth, window_size)
    case: CaseLabel

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValueError("spectrogram values must be 2-D")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spectrogram values must be finite")

    @property
    def label(self) -> int:
        return self.case.binary_label

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def compute_psd(window: np.ndarray) -> np.ndarray:
    """Periodogram of one window: |FFT|^2 / len(window), lowest frequency first."""
    window = np.asarray(window)
    if window.ndim != 1:
        raise ValueError("window must be 1-D")
    spectrum = np.fft.fftshift(np.fft.fft(window))
    return (spectrum.real**2 + spectrum.imag**2) / len(window)


def transform_psd(psd: np.ndarray, epsilon: float = 1e-21) -> np.ndarray:
    """Elementwise -ln(x + epsilon); finite for every nonnegative input."""
    psd = np.asarray(psd, dtype=np.float64)
    if np.any(psd < 0):
        raise ValueError("PSD values must be nonnegative")
    return -np.log(psd + epsilon)


def make_spectrogram(frame, params: SpectrogramParams) -> Spectrogram:
    """Stack the transformed periodograms of consecutive windows of a frame."""
    needed = params.samples_per_spectrogram
    if len(frame.samples) < needed:
        raise ValueError(f"frame too short: {len(frame.samples)} < {needed} samples")
    windows = frame.samples[:needed].reshape(params.stack_depth, params.window_size)
    spectrum = np.fft.fftshift(np.fft.fft(windows, axis=1), axes=1)
    psd = (spectrum.real**2 + spectrum.imag**2) / params.window_size
    return Spectrogram(values=(-np.log(psd + params.epsilon)).astype(np.float32), case=frame.case)


def average_psd(spec: Spectrogram) -> np.ndarray:
    """Time-average a spectrogram down to one PSD row (column-wise mean)."""
    return spec.values.astype(np.float64).mean(axis=0)


@dataclass
class Dataset:
    """Labeled spectrograms partitioned into train/validation/test splits."""

    splits: dict[str, list[Spectrogram]] = field(default_factory=dict)
    params: SpectrogramParams = field(default_factory=SpectrogramParams)

    def class_counts(self, split: str) -> dict[CaseLabel, int]:
        counts = {case: 0 for case in CaseLabel}
        for spec in self.splits.get(split, []):
            counts[spec.case] += 1
        return counts

    def features_labels(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        """Stacked spectrogram tensors (N, n, m) and binary labels for one split."""
        specs = self.splits[split]
        x = np.stack([s.values for s in specs]) if specs else np.zeros((0, 0, 0), np.float32)
        y = np.array([s.label for s in specs], dtype=np.int64)
        return x, y

    def averaged_psds(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        """Time-averaged PSD matrix (N, m) and binary labels for one split."""
        specs = self.splits[split]
        x = (np.stack([average_psd(s) for s in specs])
             if specs else np.zeros((0, self.params.window_size)))
        y = np.array([s.label for s in specs], dtype=np.int64)
        return x, y


def build_dataset(
    config: RadioConfig,
    channel: ChannelParams,
    params: SpectrogramParams,
    counts: dict[str, tuple[int, int, int]],
    duty_cycle: float = 0.7,
    seed: int = 0,
    jammer_noise: str = "gaussian",
) -> Dataset:
    """Generate a balanced labeled dataset deterministically from one seed.

    ``counts`` maps split name to per-case sample counts in CaseLabel order.
    Every sample uses seed derive_seed(seed, split_index, case, index), so a
    parallel builder that partitions the same enumeration reproduces this
    output byte-for-byte.
    """
    for split, triple in counts.items():
        if split not in SPLIT_NAMES:
            raise ValueError(f"unknown split name {split!r}")
        if any(n < 0 for n in triple):
            raise ValueError("sample counts must be nonnegative")

    dataset = Dataset(splits={}, params=params)
    for split_index, split in enumerate(SPLIT_NAMES):
        triple = counts.get(split, (0, 0, 0))
        samples: list[Spectrogram] = []
        for case, n_case in zip(CaseLabel, triple):
            for i in range(n_case):
                frame = generate_frame(
                    config,
                    channel,
                    case,
                    duty_cycle=duty_cycle,
                    seed=derive_seed(seed, split_index, int(case), i),
                    num_samples=params.samples_per_spectrogram,
                    jammer_noise=jammer_noise,
                )
                samples.append(make_spectrogram(frame, params))
        dataset.splits[split] = samples
    return dataset


def save_spectrograms(path: str | Path, specs: list[Spectrogram], params: SpectrogramParams) -> None:
    """Write one split to an SSBSPEC1 container."""
    with open(path, "wb") as fh:
        c.write_magic(fh, DATASET_MAGIC)
        c.write_u32(fh, len(specs))
        c.write_u32(fh, params.stack_depth)
        c.write_u32(fh, params.window_size)
        for spec in specs:
            if spec.shape != (params.stack_depth, params.window_size):
                raise ValueError("spectrogram shape does not match dataset params")
            c.write_u8(fh, int(spec.case))
            c.write_u8(fh, spec.label)
            c.write_array(fh, spec.values, "<f4")


def load_spectrograms(path: str | Path) -> tuple[list[Spectrogram], SpectrogramParams]:
    with open(path, "rb") as fh:
        c.expect_magic(fh, DATASET_MAGIC)
        n_samples = c.read_u32(fh)
        stack_depth = c.read_u32(fh)
        window_size = c.read_u32(fh)
        params = SpectrogramParams(window_size=window_size, stack_depth=stack_depth)
        specs = []
        for _ in range(n_samples):
            case = CaseLabel(c.read_u8(fh))
            label = c.read_u8(fh)
            values = c.read_array(fh, (stack_depth, window_size), "<f4")
            if label != case.binary_label:
                raise c.ContainerError("stored label contradicts the stored case")
            specs.append(Spectrogram(values=values, case=case))
    return specs, params


def save_dataset(dataset: Dataset, stem: str | Path) -> list[Path]:
    """Write a dataset as one SSBSPEC1 file plus one labels CSV per split.

    For stem ``data/run`` this produces data/run.train.spec,
    data/run.train.labels.csv, and likewise for validation and test.
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    written = []
    for split in SPLIT_NAMES:
        specs = dataset.splits.get(split, [])
        spec_path = stem.parent / f"{stem.name}.{split}.spec"
        save_spectrograms(spec_path, specs, dataset.params)
        csv_path = stem.parent / f"{stem.name}.{split}.labels.csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "case", "label"])
            for i, spec in enumerate(specs):
                writer.writerow([i, spec.case.name, spec.label])
        written += [spec_path, csv_path]
    return written


def load_dataset(stem: str | Path) -> Dataset:
    stem = Path(stem)
    splits = {}
    params = None
    for split in SPLIT_NAMES:
        specs, split_params = load_spectrograms(stem.parent / f"{stem.name}.{split}.spec")
        if params is None:
            params = split_params
        elif split_params != params:
            raise c.ContainerError("splits disagree on spectrogram parameters")
        splits[split] = specs
    return Dataset(splits=splits, params=params if params is not None else SpectrogramParams())
