"""Text-side model: prompt-based masked-entity prediction over a small
Transformer trained from scratch (vocabulary, prompt templates, model, and
the per-epoch training step)."""

from typing import NamedTuple, Optional, Tuple

import numpy as np

from ..errors import DivergenceError
from .model import TextModel
from .prompts import Prompt, PromptBuilder
from .vocab import TokenVocabulary, tokenize

__all__ = [
    "Prompt", "PromptBuilder", "TextModel", "TextQuery", "TokenVocabulary",
    "make_text_batch", "text_train_epoch", "tokenize",
]


class TextQuery(NamedTuple):
    seen: int
    relation: int  # original relation id; the text side never sees reverses
    target: Optional[int]
    side: str  # "tail" | "head"
    neighbors: Tuple[list, list]  # sampled (in_pairs, out_pairs) of `seen`


def make_text_batch(graph, triplets, n_in, n_out, rng):
    """Both directed queries per triplet, with sampled original-relation
    neighborhoods of the seen entity; the query's own edge is excluded."""
    queries = []
    for h, r, t in triplets:
        h_in = graph.sample_neighbors(h, n_in, rng, direction="in",
                                      original_only=True)
        h_out = graph.sample_neighbors(h, n_out, rng, direction="out",
                                       exclude=(t, r), original_only=True)
        queries.append(TextQuery(h, r, t, "tail", (h_in, h_out)))
        t_in = graph.sample_neighbors(t, n_in, rng, direction="in",
                                      exclude=(h, r), original_only=True)
        t_out = graph.sample_neighbors(t, n_out, rng, direction="out",
                                       original_only=True)
        queries.append(TextQuery(t, r, h, "head", (t_in, t_out)))
    return queries


def text_train_epoch(model, builder, graph, optimizer, batch_size, n_in, n_out,
                     rng_batches, rng_samples, rng_dropout,
                     dropout_training=True):
    """One masked-entity fine-tuning pass over shuffled original triplets."""
    triplets = graph.train
    order = rng_batches.permutation(len(triplets))
    losses = []
    steps = 0
    for start in range(0, len(order), batch_size):
        chunk = [triplets[i] for i in order[start:start + batch_size]]
        queries = make_text_batch(graph, chunk, n_in, n_out, rng_samples)
        loss = model.text_loss(builder, queries, training=dropout_training,
                               rng=rng_dropout)
        val = loss.item()
        if not np.isfinite(val):
            raise DivergenceError(f"text: non-finite loss {val} at step {steps}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        losses.append(val)
        steps += 1
    return float(np.mean(losses)), steps
