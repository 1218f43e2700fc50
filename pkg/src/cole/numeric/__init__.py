"""Minimal dense-tensor engine: reverse-mode gradients, encoder blocks,
optimizer/scheduler, and checkpoint IO."""

from .tensor import (
    EPS_LOG, Tensor, add, add_at_positions, backprop, concat, cross_entropy,
    div, dropout, gather_rows, gelu, kl_divergence, layer_norm, matmul, mul,
    ones, reshape, segment_sum, softmax, stack, sub, take_along_last,
    take_positions, tmean, transpose, trunc_normal, tsum, zeros,
)
from .encoder import EncoderParams, encode_sequence
from .optim import AdamW, LrSchedule, lr_at
from .checkpoint import load_checkpoint, save_checkpoint
from . import kernels

__all__ = [
    "EPS_LOG", "Tensor", "add", "add_at_positions", "backprop", "concat",
    "cross_entropy", "div", "dropout", "gather_rows", "gelu", "kl_divergence",
    "layer_norm", "matmul", "mul", "ones", "reshape", "segment_sum", "softmax",
    "stack", "sub", "take_along_last", "take_positions", "tmean", "transpose",
    "trunc_normal", "tsum", "zeros", "EncoderParams", "encode_sequence",
    "AdamW", "LrSchedule", "lr_at", "load_checkpoint", "save_checkpoint",
    "kernels",
]
