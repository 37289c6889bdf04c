"""From-scratch encoder-decoder LSTM: cell math, BPTT, Adam, early stopping."""
from .lstm import LSTMCellParams, LSTMCellState, lstm_cell_step
from .model import (
    DEFAULT_DENSE,
    REFERENCE_CONFIGS,
    EncoderDecoderConfig,
    EncoderDecoderModel,
    backward,
    forward,
)
from .optim import Adam
from .train import TrainConfig, TrainReport, predict_rul, predict_sequences, train

__all__ = [
    "DEFAULT_DENSE",
    "REFERENCE_CONFIGS",
    "Adam",
    "EncoderDecoderConfig",
    "EncoderDecoderModel",
    "LSTMCellParams",
    "LSTMCellState",
    "TrainConfig",
    "TrainReport",
    "backward",
    "forward",
    "lstm_cell_step",
    "predict_rul",
    "predict_sequences",
    "train",
]
