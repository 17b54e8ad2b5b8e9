from . import autograd
from .autograd import Tensor, cross_entropy, log_softmax, parameter
from .layers import (Conv1dParams, LstmCellParams, LstmStack, RnnCellParams,
                     conv1d_maxpool, dropout, lstm_step, rnn_step, softmax_xent)
from .optim import (CLIP_GLOBAL_NORM, OptimizerState, clip_global_norm,
                    init_normal, init_params, init_uniform, optimizer_update)

__all__ = [
    "Tensor", "autograd", "parameter", "cross_entropy", "log_softmax",
    "RnnCellParams", "LstmCellParams", "LstmStack", "Conv1dParams",
    "rnn_step", "lstm_step", "conv1d_maxpool", "dropout", "softmax_xent",
    "OptimizerState", "optimizer_update", "init_params", "init_uniform",
    "init_normal", "clip_global_norm", "CLIP_GLOBAL_NORM",
]
