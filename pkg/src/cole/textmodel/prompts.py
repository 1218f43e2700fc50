"""Prompt construction for masked-entity prediction.

Three template kinds per prediction side. Tail-missing prompts see the head
entity; head-missing prompts put [MASK] first and never use reverse relations
(reverse relations have no names). The relational/neighbor kinds replace the
inner separators with the relation's four soft-prompt tokens; the neighbor
kind additionally carries a [NBR] slot, where a summed neighborhood vector is
injected on top of the slot token's own (marker) embedding.
"""

from typing import NamedTuple, Optional

from ..errors import DataError
from .vocab import CLS, MASK, NBR, SEP

KINDS = ("triplet", "relational", "neighbor")
SIDES = ("tail-missing", "head-missing")


class Prompt(NamedTuple):
    token_ids: tuple
    mask_pos: int
    nbr_pos: Optional[int]
    target: Optional[int]  # EntityId, training only


class PromptBuilder:
    def __init__(self, vocab, store, max_len=128, neighbor_descriptions=False):
        self.vocab = vocab
        self.store = store
        self.max_len = max_len
        self.neighbor_descriptions = neighbor_descriptions

    def _name(self, e):
        return self.vocab.encode_words(self.store.entity_name(e))

    def _rel_name(self, r):
        return self.vocab.encode_words(self.store.relation_name(r))

    def _desc(self, e, with_description=True):
        if not with_description:
            return []
        return self.vocab.encode_words(self.store.description(e))

    def make_prompt(self, kind, side, entity, relation, target=None,
                    with_description=True):
        """Build the template for (kind, side). `entity` is the seen entity
        (head for tail-missing, tail for head-missing); its description fills
        the trailing slot, truncated to the length budget."""
        if kind not in KINDS:
            raise ValueError(f"unknown prompt kind {kind!r}")
        if side not in SIDES:
            raise ValueError(f"unknown prompt side {side!r}")
        if not 0 <= relation < self.vocab.n_relations:
            raise DataError(
                f"prompt for relation {relation}: reverse relations have no text")
        v = self.vocab
        cls_, sep, mask = v.special(CLS), v.special(SEP), v.special(MASK)
        name = self._name(entity)
        rel = self._rel_name(relation)
        if kind == "triplet":
            seps = [sep] * 4
        else:
            seps = [v.soft_prompt_token(relation, i) for i in range(1, 5)]

        if side == "tail-missing":
            body = [seps[0]] + name
            if kind == "neighbor":
                body += [v.special(NBR)]
            body += [seps[1]] + rel + [seps[2], mask, seps[3]]
        else:
            body = [seps[0], mask, seps[1]] + rel + [seps[2]] + name
            if kind == "neighbor":
                body += [v.special(NBR)]
            body += [seps[3]]
        if kind == "triplet":
            body = body[1:]  # Table-style triplet prompts have no leading [SEP]

        base = [cls_] + body
        budget = self.max_len - len(base) - 1  # final [SEP]
        if budget < 0:
            raise DataError(
                f"prompt template length {len(base) + 1} exceeds max_len "
                f"{self.max_len} even with an empty description")
        desc = self._desc(entity, with_description)[:budget]
        ids = base + desc + [v.special(SEP)]
        mask_pos = ids.index(mask)
        nbr_pos = ids.index(v.special(NBR)) if kind == "neighbor" else None
        return Prompt(tuple(ids), mask_pos, nbr_pos, target)

    def neighbor_context_prompt(self, pair, direction, target):
        """Relational prompt of a neighbor edge with [MASK] at the position of
        the query entity itself: in-neighbors give tail-missing prompts, out
        neighbors head-missing ones."""
        entity, relation = pair
        side = "tail-missing" if direction == "in" else "head-missing"
        return self.make_prompt("relational", side, entity, relation,
                                target=target,
                                with_description=self.neighbor_descriptions)

    def description_prompt(self, entity):
        """'the description of [MASK] is D_e' prompt used to initialize the
        entity's token embedding from its description text."""
        v = self.vocab
        base = ([v.special(CLS)] + [v.word_id(w) for w in
                                    ("the", "description", "of")]
                + [v.special(MASK), v.word_id("is")])
        budget = self.max_len - len(base) - 1
        desc = self.vocab.encode_words(self.store.description(entity))[:budget]
        ids = base + desc + [v.special(SEP)]
        return Prompt(tuple(ids), base.index(v.special(MASK)), None, entity)
