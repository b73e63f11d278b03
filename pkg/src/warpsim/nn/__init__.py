from .gradcheck import finite_diff_check
from .layers import (
    batchnorm_backward,
    batchnorm_forward,
    bilstm_backward,
    bilstm_forward,
    bilstm_init,
    conv1d_backward,
    conv1d_forward,
    conv1d_out_length,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    glorot_uniform,
)
from .optim import DivergenceError, adam_step, clip_gradients
from .store import ParamStore, load_checkpoint, save_checkpoint

__all__ = [
    "DivergenceError",
    "ParamStore",
    "adam_step",
    "batchnorm_backward",
    "batchnorm_forward",
    "bilstm_backward",
    "bilstm_forward",
    "bilstm_init",
    "clip_gradients",
    "conv1d_backward",
    "conv1d_forward",
    "conv1d_out_length",
    "dense_backward",
    "dense_forward",
    "dropout_backward",
    "dropout_forward",
    "finite_diff_check",
    "glorot_uniform",
    "load_checkpoint",
    "save_checkpoint",
]
