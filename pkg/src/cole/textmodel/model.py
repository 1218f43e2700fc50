"""From-scratch masked-sequence Transformer for text-side entity prediction.

Stands in for a pre-trained language model: a masked-word warm-up phase over
the name/description corpus substitutes for pre-training, then entity token
rows are initialized from description prompts, then the model fine-tunes on
masked-entity prediction with soft prompts and neighborhood vectors.

The entity-token block of the embedding matrix doubles as the output
projection (weight tying); predictions are always a distribution over the
entity block alone.
"""

import numpy as np

from .. import numeric as nm
from ..predict import PredictionDistribution
from .prompts import Prompt
from .vocab import MASK, PAD

INIT_STD = 0.02


class TextModel:
    def __init__(self, vocab, dim, layers, heads, rng, max_len=128,
                 dropout=0.1, ln_eps=1e-5, dtype=np.float64):
        self.vocab = vocab
        self.dim = dim
        self.max_len = max_len
        self.ln_eps = ln_eps
        self.dropout = dropout
        self.token_emb = nm.trunc_normal((len(vocab), dim), INIT_STD, rng, dtype)
        self.pos_emb = nm.trunc_normal((max_len, dim), INIT_STD, rng, dtype)
        self.in_ln_g = nm.ones((dim,), dtype)
        self.in_ln_b = nm.zeros((dim,), dtype)
        self.encoder = nm.EncoderParams(dim, layers, heads, rng, ln_eps=ln_eps,
                                        dropout_rate=dropout, dtype=dtype)
        self.head_w = nm.trunc_normal((dim, dim), INIT_STD, rng, dtype)
        self.head_b = nm.zeros((dim,), dtype)
        self.head_ln_g = nm.ones((dim,), dtype)
        self.head_ln_b = nm.zeros((dim,), dtype)
        self.ent_bias = nm.zeros((vocab.n_entities,), dtype)
        self.word_bias = nm.zeros((vocab.n_words,), dtype)

    def named_params(self):
        params = {
            "token_emb": self.token_emb,
            "pos_emb": self.pos_emb,
            "in_ln_g": self.in_ln_g,
            "in_ln_b": self.in_ln_b,
            "head_w": self.head_w,
            "head_b": self.head_b,
            "head_ln_g": self.head_ln_g,
            "head_ln_b": self.head_ln_b,
            "ent_bias": self.ent_bias,
            "word_bias": self.word_bias,
        }
        params.update(dict(self.encoder.named_params()))
        return params

    # encoding ------------------------------------------------------------------

    def _pad_batch(self, prompts):
        pad = self.vocab.special(PAD)
        L = max(len(p.token_ids) for p in prompts)
        if L > self.max_len:
            raise ValueError(f"prompt length {L} exceeds max_len {self.max_len}")
        ids = np.full((len(prompts), L), pad, dtype=np.int64)
        valid = np.zeros((len(prompts), L), dtype=bool)
        for i, p in enumerate(prompts):
            ids[i, :len(p.token_ids)] = p.token_ids
            valid[i, :len(p.token_ids)] = True
        return ids, valid

    def encode_prompts(self, prompts, nbr_vectors=None, training=False, rng=None):
        """Encode a batch of prompts and return the [MASK]-position outputs.

        nbr_vectors, when given, is a (B, dim) tensor added on top of the
        [NBR] slot token of each prompt that has one (the slot token's own
        embedding acts as the learned marker).
        """
        for p in prompts:
            if p.token_ids.count(self.vocab.special(MASK)) != 1:
                raise ValueError("prompt must contain exactly one [MASK]")
        ids, valid = self._pad_batch(prompts)
        B, L = ids.shape
        x = nm.reshape(nm.gather_rows(self.token_emb, ids.reshape(-1)),
                       (B, L, self.dim))
        x = x + nm.gather_rows(self.pos_emb, np.arange(L))
        if nbr_vectors is not None:
            pos = np.array([p.nbr_pos if p.nbr_pos is not None else 0
                            for p in prompts])
            gate = np.array([[1.0 if p.nbr_pos is not None else 0.0]
                             for p in prompts])
            x = nm.add_at_positions(x, pos, nbr_vectors * nm.Tensor(gate.astype(nbr_vectors.dtype)))
        x = nm.layer_norm(x, self.in_ln_g, self.in_ln_b, self.ln_eps)
        x = nm.dropout(x, self.dropout, rng, training)
        out = nm.encode_sequence(x, self.encoder, pad_mask=valid,
                                 training=training, rng=rng)
        mask_pos = np.array([p.mask_pos for p in prompts])
        return nm.take_positions(out, mask_pos)

    def _head(self, hidden):
        h = nm.gelu(nm.matmul(hidden, self.head_w) + self.head_b)
        return nm.layer_norm(h, self.head_ln_g, self.head_ln_b, self.ln_eps)

    def _block_logits(self, hidden, start, size, bias):
        block = nm.gather_rows(self.token_emb, np.arange(start, start + size))
        return nm.matmul(self._head(hidden), nm.transpose(block, (1, 0))) + bias

    def predict_masked_entity(self, prompts, nbr_vectors=None, training=False,
                              rng=None, targets=None):
        """Distribution over the entity block for each prompt's [MASK]; word
        and soft-prompt tokens never receive probability."""
        hidden = self.encode_prompts(prompts, nbr_vectors, training, rng)
        logits = self._block_logits(hidden, self.vocab.entity_start,
                                    self.vocab.n_entities, self.ent_bias)
        return PredictionDistribution(logits, nm.softmax(logits), targets)

    def predict_masked_word(self, prompts, training=False, rng=None):
        hidden = self.encode_prompts(prompts, None, training, rng)
        logits = self._block_logits(hidden, self.vocab.word_start,
                                    self.vocab.n_words, self.word_bias)
        return logits

    # neighborhood ---------------------------------------------------------------

    def neighbor_prompt_embedding(self, builder, neighbor_groups, training=False,
                                  rng=None):
        """Sum of encoded neighbor-context prompts per query: one (in_pairs,
        out_pairs) group per query; zero rows for queries without neighbors."""
        flat, segs = [], []
        for qi, (in_pairs, out_pairs) in enumerate(neighbor_groups):
            for pair in in_pairs:
                flat.append(builder.neighbor_context_prompt(pair, "in", None))
                segs.append(qi)
            for pair in out_pairs:
                flat.append(builder.neighbor_context_prompt(pair, "out", None))
                segs.append(qi)
        n = len(neighbor_groups)
        if not flat:
            return nm.Tensor(np.zeros((n, self.dim), dtype=self.token_emb.dtype))
        hidden = self.encode_prompts(flat, None, training, rng)
        return nm.segment_sum(hidden, np.array(segs), n)

    # losses -----------------------------------------------------------------------

    def onehot_entities(self, targets):
        lab = np.zeros((len(targets), self.vocab.n_entities),
                       dtype=self.token_emb.dtype)
        lab[np.arange(len(targets)), targets] = 1.0
        return lab

    def query_predictions(self, builder, queries, training=False, rng=None):
        """Score directed text queries (entity, relation, target, side): build
        neighbor-context vectors, then neighbor prompts (degrading to
        relational prompts when a query has no neighbors)."""
        nbr_vec = self.neighbor_prompt_embedding(
            builder, [q.neighbors for q in queries], training, rng)
        prompts = []
        for q in queries:
            has_nbr = bool(q.neighbors[0]) or bool(q.neighbors[1])
            kind = "neighbor" if has_nbr else "relational"
            side = "tail-missing" if q.side == "tail" else "head-missing"
            prompts.append(builder.make_prompt(kind, side, q.seen, q.relation,
                                               target=q.target))
        targets = np.array([q.target if q.target is not None else -1
                            for q in queries])
        return self.predict_masked_entity(prompts, nbr_vec, training, rng,
                                          targets=targets)

    def text_loss(self, builder, queries, training=False, rng=None,
                  return_predictions=False):
        """Mean over queries of the masked-entity cross-entropy; a triplet
        contributes its head-missing and tail-missing queries."""
        dist = self.query_predictions(builder, queries, training, rng)
        if np.any(dist.targets < 0):
            raise ValueError("text_loss requires labeled queries")
        labels = self.onehot_entities(dist.targets)
        loss = nm.cross_entropy(dist.probs, labels).mean()
        if return_predictions:
            return loss, dist
        return loss

    # description initialization ------------------------------------------------

    def description_init(self, builder, entity):
        """Encode 'the description of [MASK] is D_e' and return the [MASK]
        output; pure function of the description text and parameters."""
        prompt = builder.description_prompt(entity)
        return self.encode_prompts([prompt]).data[0]

    def init_entities_from_descriptions(self, builder, store):
        """One-shot overwrite of every entity token row (and therefore of the
        tied output projection) with its description encoding."""
        n_empty = 0
        batch = 64
        for start in range(0, self.vocab.n_entities, batch):
            ents = range(start, min(start + batch, self.vocab.n_entities))
            prompts = [builder.description_prompt(e) for e in ents]
            vecs = self.encode_prompts(prompts).data
            for e, vec in zip(ents, vecs):
                self.token_emb.data[self.vocab.entity_token(e)] = vec
                if not store.description(e).strip():
                    n_empty += 1
        return {"entities": self.vocab.n_entities, "empty_descriptions": n_empty}

    # masked-word warm-up ----------------------------------------------------------

    def warmup_sentences(self, store):
        """One word-token sentence per entity (name + description) and per
        relation name, used by the masked-word warm-up."""
        v = self.vocab
        cls_, sep = v.special("[CLS]"), v.special("[SEP]")
        sentences = []
        for e in range(v.n_entities):
            words = (v.encode_words(store.entity_name(e))
                     + [sep] + v.encode_words(store.description(e)))
            sentences.append([cls_] + words[:self.max_len - 2] + [sep])
        for r in range(v.n_relations):
            sentences.append([cls_] + v.encode_words(store.relation_name(r)) + [sep])
        return sentences

    def masked_word_loss(self, sentences, rng_mask, mask_prob=0.15,
                         training=True, rng=None):
        """Mask one random word position per sentence (plus extra positions at
        mask_prob) and predict the original words over the word block."""
        v = self.vocab
        mask_id = v.special(MASK)
        prompts, labels = [], []
        for sent in sentences:
            word_pos = [i for i, t in enumerate(sent)
                        if v.word_start <= t < v.entity_start]
            if not word_pos:
                continue
            chosen = {word_pos[rng_mask.integers(len(word_pos))]}
            chosen.update(p for p in word_pos if rng_mask.random() < mask_prob)
            for pos in sorted(chosen):
                ids = list(sent)
                original = ids[pos]
                ids[pos] = mask_id
                prompts.append(Prompt(tuple(ids), pos, None, None))
                labels.append(original - v.word_start)
        logits = self.predict_masked_word(prompts, training, rng)
        lab = np.zeros((len(labels), v.n_words), dtype=self.token_emb.dtype)
        lab[np.arange(len(labels)), labels] = 1.0
        return nm.cross_entropy(nm.softmax(logits), lab).mean()

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
        return {"kind": "text", "vocab_size": len(self.vocab),
                "n_entities": self.vocab.n_entities, "dim": self.dim,
                "layers": self.encoder.n_layers, "heads": self.encoder.n_heads,
                "max_len": self.max_len}
