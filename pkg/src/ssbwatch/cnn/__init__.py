"""From-scratch convolutional detector: layers, architecture, training."""

from .layers import AvgPool2D, BatchNorm2D, Conv2D, Dense, Flatten, Layer, Sigmoid
from .network import CNN_MAGIC, CnnModel, build_detector, load_cnn, save_cnn
from .training import (
    Adam,
    EarlyStopper,
    TrainConfig,
    TrainHistory,
    bce_loss,
    bce_sigmoid_grad,
    classify,
    save_history_csv,
    train,
)

__all__ = [
    "AvgPool2D", "BatchNorm2D", "Conv2D", "Dense", "Flatten", "Layer", "Sigmoid",
    "CNN_MAGIC", "CnnModel", "build_detector", "load_cnn", "save_cnn",
    "Adam", "EarlyStopper", "TrainConfig", "TrainHistory",
    "bce_loss", "bce_sigmoid_grad", "classify", "save_history_csv", "train",
]
