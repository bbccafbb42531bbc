"""Minimal reverse-mode autodiff over numpy arrays."""
from .tensor import (
    Tensor,
    as_tensor,
    backward,
    grad_enabled,
    no_grad,
    add,
    sub,
    mul,
    div,
    neg,
    power,
    exp,
    log,
    sqrt,
    sin,
    cos,
    tanh,
    sigmoid,
    tabs,
    atan2,
    mod,
    clamp,
    where,
    maximum,
    minimum,
    tsum,
    mean,
    amax,
    reshape,
    transpose,
    getitem,
    concat,
    stack,
    matmul,
)
from .nn import (
    ConvSpec,
    avg_pool2,
    conv2d,
    conv2d_spec,
    depthwise_conv2d,
    grouped_conv2d,
    pad2d,
    reflect_pad,
    softmax,
    upsample_nearest,
)
from .optim import Adam, adam_step, cosine_anneal_lr
from .gradcheck import gradcheck
from .serialize import WeightFileError, dumps_tensors, load_tensors, loads_tensors, save_tensors
