"""Shared prediction container for both models and the evaluation harness."""

from typing import NamedTuple, Optional

import numpy as np

from .numeric import Tensor


class PredictionDistribution(NamedTuple):
    """Per-query logits and probabilities over all entities, plus targets.

    Batched: logits/probs are (B, n_entities) tensors; targets is a (B,) int
    array (None at inference when no label exists).
    """
    logits: Tensor
    probs: Tensor
    targets: Optional[np.ndarray]
