"""The jammer-detection network and its serialization.

Fixed architecture on 100 x 1024 x 1 spectrogram input:

    Conv(32, 3x3, stride 2) -> BatchNorm -> AvgPool(2)
    Conv(64, 3x3)           -> BatchNorm -> AvgPool(2)
    Conv(128, 3x3)          -> AvgPool(2) -> BatchNorm
    Flatten -> Dense 64 -> Dense 32 -> Dense 16 -> Dense 1 -> sigmoid

Convolutions and hidden dense layers carry ReLU; the final unit is a
sigmoid so the output is a jamming score in (0, 1). Note the third block
normalizes after pooling, unlike the first two; the layer order is part of
the architecture contract and the summary reproduces it row for row.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .. import containers as c
from .layers import AvgPool2D, BatchNorm2D, Conv2D, Dense, Flatten, Layer, Sigmoid

CNN_MAGIC = b"SSBCNN01"

DETECTOR_INPUT_SHAPE = (100, 1024, 1)


class CnnModel:
    """A feed-forward stack of layers ending in a sigmoid score."""

    def __init__(self, layers: list[Layer], input_shape: tuple[int, int, int], seed: int = 0):
        self.layers = layers
        self.input_shape = tuple(input_shape)
        self.seed = seed

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Scores for a batch shaped (B,) from input (B, H, W, 1)."""
        if x.ndim != 4 or x.shape[1:] != self.input_shape:
            raise ValueError(f"expected input (B, {self.input_shape}), got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x, training=training)
        return x.reshape(-1)

    def predict(self, x: np.ndarray, batch_size: int = 32) -> np.ndarray:
        """Inference-mode scores computed in batches."""
        out = np.empty(len(x), dtype=np.float64)
        for lo in range(0, len(x), batch_size):
            out[lo:lo + batch_size] = self.forward(x[lo:lo + batch_size], training=False)
        return out

    def summary(self) -> list[tuple[str, tuple[int, ...], int]]:
        """(layer name, output shape, parameter count) rows, input included."""
        rows = [("input", self.input_shape, 0)]
        shape = self.input_shape
        conv_i = bn_i = pool_i = dense_i = 0
        for layer in self.layers:
            if isinstance(layer, Sigmoid):
                continue  # folded into the last dense row
            shape = layer.output_shape(shape)
            if isinstance(layer, Conv2D):
                conv_i += 1
                name = f"conv{conv_i}"
            elif isinstance(layer, BatchNorm2D):
                bn_i += 1
                name = f"batchnorm{bn_i}"
            elif isinstance(layer, AvgPool2D):
                pool_i += 1
                name = f"avgpool{pool_i}"
            elif isinstance(layer, Flatten):
                name = "flatten"
            elif isinstance(layer, Dense):
                dense_i += 1
                name = f"dense{dense_i}"
            else:
                name = type(layer).__name__.lower()
            rows.append((name, shape, layer.param_count))
        return rows

    @property
    def param_count(self) -> int:
        return sum(layer.param_count for layer in self.layers)

    def get_state(self) -> list[dict[str, np.ndarray]]:
        return [{k: v.copy() for k, v in layer.state().items()} for layer in self.layers]

    def set_state(self, state: list[dict[str, np.ndarray]]) -> None:
        if len(state) != len(self.layers):
            raise ValueError("state does not match the layer stack")
        for layer, entry in zip(self.layers, state):
            layer.load_state(entry)


def build_detector(seed: int = 0, input_shape: tuple[int, int, int] = DETECTOR_INPUT_SHAPE,
                   dtype=np.float32) -> CnnModel:
    """Construct the detector with seeded He/Glorot-uniform initialization."""
    rng = np.random.default_rng(seed)
    flat = _flattened_size(input_shape)
    layers: list[Layer] = [
        Conv2D(input_shape[2], 32, 3, stride=2, activation="relu", rng=rng, dtype=dtype),
        BatchNorm2D(32, dtype=dtype),
        AvgPool2D(2),
        Conv2D(32, 64, 3, stride=1, activation="relu", rng=rng, dtype=dtype),
        BatchNorm2D(64, dtype=dtype),
        AvgPool2D(2),
        Conv2D(64, 128, 3, stride=1, activation="relu", rng=rng, dtype=dtype),
        AvgPool2D(2),
        BatchNorm2D(128, dtype=dtype),
        Flatten(),
        Dense(flat, 64, activation="relu", init="he", rng=rng, dtype=dtype),
        Dense(64, 32, activation="relu", init="he", rng=rng, dtype=dtype),
        Dense(32, 16, activation="relu", init="he", rng=rng, dtype=dtype),
        Dense(16, 1, activation=None, init="glorot", rng=rng, dtype=dtype),
        Sigmoid(),
    ]
    return CnnModel(layers, input_shape, seed=seed)


def _flattened_size(input_shape) -> int:
    shape = input_shape
    probe = [
        Conv2D(input_shape[2], 32, 3, stride=2), BatchNorm2D(32), AvgPool2D(2),
        Conv2D(32, 64, 3), BatchNorm2D(64), AvgPool2D(2),
        Conv2D(64, 128, 3), AvgPool2D(2), BatchNorm2D(128),
    ]
    for layer in probe:
        shape = layer.output_shape(shape)
        if min(shape) < 1:
            raise ValueError(
                f"input {input_shape} is too small for the detector architecture "
                f"(a layer output collapses to {shape})"
            )
    return int(np.prod(shape))


def save_cnn(model: CnnModel, path: str | Path) -> None:
    """Write the model as a manifest plus float32 blobs (running stats included)."""
    manifest = {
        "input_shape": list(model.input_shape),
        "seed": model.seed,
        "layers": [type(layer).__name__ for layer in model.layers],
    }
    blob = json.dumps(manifest).encode()
    with open(path, "wb") as fh:
        c.write_magic(fh, CNN_MAGIC)
        c.write_u32(fh, len(blob))
        fh.write(blob)
        state = model.get_state()
        c.write_u32(fh, sum(len(entry) for entry in state))
        for layer_index, entry in enumerate(state):
            for name in sorted(entry):
                arr = entry[name]
                tag = f"{layer_index}:{name}".encode()
                c.write_u8(fh, len(tag))
                fh.write(tag)
                c.write_u8(fh, arr.ndim)
                for dim in arr.shape:
                    c.write_u32(fh, dim)
                c.write_array(fh, arr, "<f4")


def load_cnn(path: str | Path) -> CnnModel:
    with open(path, "rb") as fh:
        c.expect_magic(fh, CNN_MAGIC)
        manifest = json.loads(fh.read(c.read_u32(fh)).decode())
        model = build_detector(seed=manifest.get("seed", 0),
                               input_shape=tuple(manifest["input_shape"]))
        if manifest["layers"] != [type(layer).__name__ for layer in model.layers]:
            raise c.ContainerError("layer manifest does not match the detector architecture")
        state = model.get_state()
        for _ in range(c.read_u32(fh)):
            tag = fh.read(c.read_u8(fh)).decode()
            layer_index, name = tag.split(":", 1)
            ndim = c.read_u8(fh)
            shape = tuple(c.read_u32(fh) for _ in range(ndim))
            arr = c.read_array(fh, shape, "<f4")
            state[int(layer_index)][name] = arr
        model.set_state(state)
    return model
