"""Minimal numpy neural-network engine with hand-written backward passes."""

from .functional import (
    bce_loss,
    conv2d,
    conv2d_backward,
    conv3d,
    conv3d_backward,
    linear,
    linear_backward,
    lstm_backward,
    lstm_forward,
    lstm_param_count,
    maxpool,
    maxpool_backward,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
    tanh,
    tanh_backward,
)
from .gradcheck import GradCheckReport, grad_check
from .layers import (
    LSTM,
    Concat,
    Conv,
    Flatten,
    GlobalAvgPool,
    LastStep,
    Layer,
    Linear,
    MaxPool,
    ReLU,
    ResidualBlock,
    Sequential,
    Sigmoid,
    Tanh,
)
from .optim import Param, adam_step
