"""Token vocabulary for the text model.

Word tokens come from entity/relation names and entity descriptions
(lowercased, punctuation-split, with a minimum-frequency cutoff that never
drops name words). One surrogate token per entity and four soft-prompt tokens
per original relation are appended as contiguous blocks so entity logits can
be taken as a slice.
"""

import re
from collections import Counter

from ..errors import DataError

PAD, CLS, SEP, MASK, UNK, NBR = "[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]", "[NBR]"
SPECIALS = [PAD, CLS, SEP, MASK, UNK, NBR]
N_SOFT_PROMPTS = 4

# words of the description-init template, always present
TEMPLATE_WORDS = ("the", "description", "of", "is")

_WORD_RE = re.compile(r"[a-z0-9]+")


def tokenize(text):
    return _WORD_RE.findall(text.lower())


class TokenVocabulary:
    def __init__(self, tokens, n_words, n_entities, n_relations):
        self.tokens = list(tokens)
        self.ids = {t: i for i, t in enumerate(self.tokens)}
        if len(self.ids) != len(self.tokens):
            raise DataError("vocabulary contains duplicate tokens")
        self.n_words = n_words
        self.n_entities = n_entities
        self.n_relations = n_relations
        self.word_start = len(SPECIALS)
        self.entity_start = self.word_start + n_words
        self.sp_start = self.entity_start + n_entities
        expected = self.sp_start + N_SOFT_PROMPTS * n_relations
        if expected != len(self.tokens):
            raise DataError("vocabulary block layout is inconsistent")

    def __len__(self):
        return len(self.tokens)

    @classmethod
    def build(cls, store, graph, min_freq=1):
        """Assemble the vocabulary from the text store. Name words are always
        kept; description-only words are subject to the frequency cutoff."""
        n_entities = graph.n_entities
        n_relations = graph.n_original_relations
        name_words = set(TEMPLATE_WORDS)
        counts = Counter()
        for e in range(n_entities):
            name_words.update(tokenize(store.entity_name(e)))
            counts.update(tokenize(store.description(e)))
        for r in range(n_relations):
            name_words.update(tokenize(store.relation_name(r)))
        words = sorted(name_words | {w for w, c in counts.items()
                                     if c >= min_freq})
        if not words:
            raise DataError("empty text corpus: no word tokens")
        tokens = list(SPECIALS) + words
        tokens += [f"[ENT:{graph.entities.symbols[e]}]" for e in range(n_entities)]
        for r in range(n_relations):
            sym = graph.relations.symbols[r]
            tokens += [f"[SP{i}:{sym}]" for i in range(1, N_SOFT_PROMPTS + 1)]
        return cls(tokens, len(words), n_entities, n_relations)

    # lookups -----------------------------------------------------------------

    def word_id(self, word):
        wid = self.ids.get(word)
        if wid is None or not (self.word_start <= wid < self.entity_start):
            return self.ids[UNK]
        return wid

    def encode_words(self, text):
        return [self.word_id(w) for w in tokenize(text)]

    def entity_token(self, e):
        return self.entity_start + e

    def entity_of_token(self, token_id):
        return token_id - self.entity_start

    def soft_prompt_token(self, relation, i):
        """i in 1..4; relation must be an original (non-reverse) relation."""
        if not 1 <= i <= N_SOFT_PROMPTS:
            raise ValueError(f"soft prompt index {i} out of range")
        if not 0 <= relation < self.n_relations:
            raise ValueError(f"relation {relation} has no soft prompts "
                             "(reverse relations have no text side)")
        return self.sp_start + relation * N_SOFT_PROMPTS + (i - 1)

    def decode(self, token_ids):
        return " ".join(self.tokens[i] for i in token_ids)

    def special(self, token):
        return self.ids[token]

    # serialization --------------------------------------------------------------

    HEADER = "# cole-vocab v1"

    def save_tsv(self, path):
        def block_of(i):
            if i < self.word_start:
                return "special"
            if i < self.entity_start:
                return "word"
            if i < self.sp_start:
                return "entity"
            return "softprompt"
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.HEADER + "\n")
            f.write(f"# words={self.n_words} entities={self.n_entities} "
                    f"relations={self.n_relations}\n")
            for i, tok in enumerate(self.tokens):
                f.write(f"{tok}\t{i}\t{block_of(i)}\n")

    @classmethod
    def load_tsv(cls, path):
        with open(path, encoding="utf-8") as f:
            header = f.readline().rstrip("\n")
            if header != cls.HEADER:
                raise DataError(f"{path}: unsupported vocabulary header {header!r}")
            sizes = dict(kv.split("=") for kv in f.readline()[1:].split())
            tokens = []
            for line in f:
                tok, idx, _block = line.rstrip("\n").split("\t")
                if int(idx) != len(tokens):
                    raise DataError(f"{path}: non-contiguous token ids")
                tokens.append(tok)
        return cls(tokens, int(sizes["words"]), int(sizes["entities"]),
                   int(sizes["relations"]))
