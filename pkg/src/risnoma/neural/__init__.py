from .layers import (
    ContractViolation,
    Dense,
    MLP,
    NonFiniteError,
    dense_forward,
)
from .lstm import LSTMLayer, LSTMRegressor, lstm_cell_forward
from .optim import Adam, RMSprop, optimizer_step, soft_update
from .checkpoint import CheckpointError, load_arrays, save_arrays

__all__ = [
    "Adam",
    "CheckpointError",
    "ContractViolation",
    "Dense",
    "LSTMLayer",
    "LSTMRegressor",
    "MLP",
    "NonFiniteError",
    "RMSprop",
    "dense_forward",
    "load_arrays",
    "lstm_cell_forward",
    "optimizer_step",
    "save_arrays",
    "soft_update",
]
