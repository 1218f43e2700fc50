"""Structure-side model: reconstruct the masked entity of an incomplete
triplet with a Transformer encoder, optionally enriching the seen entity with
a representation summed from its relational neighborhood.

A query is always tail prediction: head queries are rewritten under the
reverse relation by the data layer, so one code path serves both sides.
"""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from . import numeric as nm
from .errors import DivergenceError
from .predict import PredictionDistribution

INIT_STD = 0.02


@dataclass
class StructureBatch:
    """Directed queries plus their sampled neighborhoods.

    neighbors holds one (entity, relation) list per query, drawn from the
    train-set index only, with the query's own edge excluded.
    """
    sources: np.ndarray
    relations: np.ndarray
    targets: np.ndarray  # -1 where unlabeled (inference)
    neighbors: List[List[Tuple[int, int]]] = field(default_factory=list)

    def __len__(self):
        return len(self.sources)


def make_structure_batch(graph, triplets, n_neighbors, rng):
    """Expand original triplets into both directed queries and sample an
    anti-leak neighborhood for each."""
    src, rel, tgt, nbrs = [], [], [], []
    for h, r, t in triplets:
        r_rev = graph.reverse_of(r)
        for s, q_rel, target, excl in ((h, r, t, (t, r_rev)), (t, r_rev, h, (h, r))):
            src.append(s)
            rel.append(q_rel)
            tgt.append(target)
            nbrs.append(graph.sample_neighbors(s, n_neighbors, rng, exclude=excl))
    return StructureBatch(np.array(src), np.array(rel), np.array(tgt), nbrs)


class NFormer:
    def __init__(self, n_entities, n_relations, dim, layers, heads, rng,
                 dropout=0.1, ln_eps=1e-5, average_neighbors=False,
                 dtype=np.float64):
        self.n_entities = n_entities
        self.n_relations = n_relations
        self.dim = dim
        self.average_neighbors = average_neighbors
        self.entity_emb = nm.trunc_normal((n_entities, dim), INIT_STD, rng, dtype)
        self.relation_emb = nm.trunc_normal((n_relations, dim), INIT_STD, rng, dtype)
        self.mask_emb = nm.trunc_normal((1, dim), INIT_STD, rng, dtype)
        self.pos_emb = nm.trunc_normal((3, dim), INIT_STD, rng, dtype)
        self.encoder = nm.EncoderParams(dim, layers, heads, rng, ln_eps=ln_eps,
                                        dropout_rate=dropout, dtype=dtype)
        self.in_ln_g = nm.ones((dim,), dtype)
        self.in_ln_b = nm.zeros((dim,), dtype)
        self.head_w = nm.trunc_normal((dim, dim), INIT_STD, rng, dtype)
        self.head_b = nm.zeros((dim,), dtype)
        self.head_ln_g = nm.ones((dim,), dtype)
        self.head_ln_b = nm.zeros((dim,), dtype)
        self.out_bias = nm.zeros((n_entities,), dtype)
        self.ln_eps = ln_eps
        self.dropout = dropout

    def named_params(self):
        params = {
            "entity_emb": self.entity_emb,
            "relation_emb": self.relation_emb,
            "mask_emb": self.mask_emb,
            "pos_emb": self.pos_emb,
            "in_ln_g": self.in_ln_g,
            "in_ln_b": self.in_ln_b,
            "head_w": self.head_w,
            "head_b": self.head_b,
            "head_ln_g": self.head_ln_g,
            "head_ln_b": self.head_ln_b,
            "out_bias": self.out_bias,
        }
        params.update(dict(self.encoder.named_params()))
        return params

    # forward pieces ---------------------------------------------------------

    def _encode_triplet_slots(self, slot0, relations, training, rng):
        """Encode <slot0, relation, [MASK]> rows and return the [MASK] output.

        The assembled sequence goes through an embedding layer-norm first so
        the raw-embedding and neighborhood-sum variants of slot0 reach the
        encoder at a common scale.
        """
        B = slot0.shape[0]
        rel = nm.gather_rows(self.relation_emb, relations)
        mask = nm.gather_rows(self.mask_emb, np.zeros(B, dtype=np.int64))
        seq = nm.stack([slot0, rel, mask], axis=1) + self.pos_emb
        seq = nm.layer_norm(seq, self.in_ln_g, self.in_ln_b, self.ln_eps)
        seq = nm.dropout(seq, self.dropout, rng, training)
        out = nm.encode_sequence(seq, self.encoder, training=training, rng=rng)
        return nm.take_positions(out, np.full(B, 2))

    def reconstruct_from_triplet(self, sources, relations, training=False, rng=None):
        """Eq-1 style reconstruction: the [MASK]-slot encoder output for the
        3-token sequence built from the seen entity and relation."""
        slot0 = nm.gather_rows(self.entity_emb, np.asarray(sources))
        return self._encode_triplet_slots(slot0, np.asarray(relations), training, rng)

    def neighborhood_embedding(self, neighbors, n_queries, training=False, rng=None):
        """Sum of per-neighbor reconstructions, one row per query; zero rows
        for queries with no neighbors. Uses the same encoder weights as
        reconstruct_from_triplet."""
        flat_src, flat_rel, segs = [], [], []
        for qi, pairs in enumerate(neighbors):
            for ent, rel in pairs:
                flat_src.append(ent)
                flat_rel.append(rel)
                segs.append(qi)
        if not flat_src:
            return nm.Tensor(np.zeros((n_queries, self.dim),
                                      dtype=self.entity_emb.dtype))
        recon = self.reconstruct_from_triplet(np.array(flat_src), np.array(flat_rel),
                                              training=training, rng=rng)
        return nm.segment_sum(recon, np.array(segs), n_queries)

    def reconstruct_with_neighborhood(self, sources, relations, neighbors,
                                      training=False, rng=None):
        """Neighborhood-aware reconstruction: the first slot is the mean of
        the entity embedding and the summed neighborhood representation; for
        a query with no neighbors it is the entity embedding alone."""
        sources = np.asarray(sources)
        B = len(sources)
        ent = nm.gather_rows(self.entity_emb, sources)
        nbr = self.neighborhood_embedding(neighbors, B, training=training, rng=rng)
        counts = np.array([len(p) for p in neighbors], dtype=np.float64)
        has = counts > 0
        w_ent = np.where(has, 0.5, 1.0)[:, None].astype(ent.dtype)
        if self.average_neighbors:
            w_nbr = np.where(has, 0.5 / np.maximum(counts, 1.0), 0.0)
        else:
            w_nbr = np.where(has, 0.5, 0.0)
        w_nbr = w_nbr[:, None].astype(ent.dtype)
        slot0 = ent * nm.Tensor(w_ent) + nbr * nm.Tensor(w_nbr)
        return self._encode_triplet_slots(slot0, np.asarray(relations), training, rng)

    def predict_logits(self, reconstruction, targets=None):
        """Score all entities for a batch of reconstructions: masked-LM style
        head then inner product with the entity embedding table."""
        h = nm.gelu(nm.matmul(reconstruction, self.head_w) + self.head_b)
        h = nm.layer_norm(h, self.head_ln_g, self.head_ln_b, self.ln_eps)
        logits = nm.matmul(h, nm.transpose(self.entity_emb, (1, 0))) + self.out_bias
        return PredictionDistribution(logits, nm.softmax(logits), targets)

    def predict(self, batch, training=False, rng=None, use_neighbors=True):
        """The model's canonical prediction distribution for a batch: the
        neighborhood-aware path (plain path when use_neighbors is False)."""
        if use_neighbors:
            recon = self.reconstruct_with_neighborhood(
                batch.sources, batch.relations, batch.neighbors, training, rng)
        else:
            recon = self.reconstruct_from_triplet(
                batch.sources, batch.relations, training, rng)
        return self.predict_logits(recon, batch.targets)

    # loss --------------------------------------------------------------------

    def onehot(self, targets):
        lab = np.zeros((len(targets), self.n_entities), dtype=self.entity_emb.dtype)
        lab[np.arange(len(targets)), targets] = 1.0
        return lab

    def structure_loss(self, batch, training=False, rng=None,
                       return_predictions=False):
        """Mean over the batch of the two cross-entropies: plain-triplet path
        plus neighborhood path, both against the same target label."""
        if np.any(batch.targets < 0):
            raise ValueError("structure_loss requires labeled queries")
        labels = self.onehot(batch.targets)
        plain = self.predict(batch, training, rng, use_neighbors=False)
        nbr = self.predict(batch, training, rng, use_neighbors=True)
        ce_plain = nm.cross_entropy(plain.probs, labels).mean()
        ce_nbr = nm.cross_entropy(nbr.probs, labels).mean()
        loss = ce_plain + ce_nbr
        if return_predictions:
            return loss, ce_plain, nbr
        return loss

    # persistence ---------------------------------------------------------------

    def state_arrays(self):
        return {name: p.data for name, p in self.named_params().items()}

    def load_state_arrays(self, arrays):
        for name, p in self.named_params().items():
            if arrays[name].shape != p.data.shape:
                raise ValueError(f"checkpoint shape mismatch for {name}: "
                                 f"{arrays[name].shape} vs {p.data.shape}")
            p.data = arrays[name].astype(p.data.dtype)

    def meta(self):
        return {"kind": "nformer", "n_entities": self.n_entities,
                "n_relations": self.n_relations, "dim": self.dim,
                "layers": self.encoder.n_layers, "heads": self.encoder.n_heads}


def train_epoch(model, graph, optimizer, batch_size, n_neighbors,
                rng_batches, rng_samples, rng_dropout, dropout_training=True):
    """One pass over shuffled original train triplets; each yields both
    directed queries. Returns (mean loss, step count)."""
    triplets = graph.train
    order = rng_batches.permutation(len(triplets))
    losses = []
    steps = 0
    for start in range(0, len(order), batch_size):
        chunk = [triplets[i] for i in order[start:start + batch_size]]
        batch = make_structure_batch(graph, chunk, n_neighbors, rng_samples)
        loss = model.structure_loss(batch, training=dropout_training, rng=rng_dropout)
        val = loss.item()
        if not np.isfinite(val):
            raise DivergenceError(f"nformer: non-finite loss {val} at step {steps}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        losses.append(val)
        steps += 1
    return float(np.mean(losses)), steps
