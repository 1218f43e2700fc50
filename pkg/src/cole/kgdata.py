"""Knowledge-graph loading and indexing.

Reads the standard three-TSV layout (train.txt/valid.txt/test.txt plus
entity2text/relation2text/entity2textlong name and description files), assigns
dense ids in first-appearance order, generates reverse relations for the
structure view, and builds neighbor indices and filtered-evaluation candidate
sets. Everything is immutable after construction and safe to share across
evaluation workers.
"""

import hashlib
import io
import json
import struct
from typing import NamedTuple

import numpy as np

from .errors import DataError


class Triplet(NamedTuple):
    head: int
    relation: int
    tail: int


class SymbolTable:
    """Dense ids assigned in first-appearance order; freezable."""

    def __init__(self):
        self._ids = {}
        self.symbols = []
        self.frozen = False

    def __len__(self):
        return len(self.symbols)

    def add_or_get(self, symbol):
        sid = self._ids.get(symbol)
        if sid is None:
            if self.frozen:
                raise DataError(f"unknown symbol {symbol!r} (table is frozen)")
            sid = len(self.symbols)
            self._ids[symbol] = sid
            self.symbols.append(symbol)
        return sid

    def id_of(self, symbol):
        sid = self._ids.get(symbol)
        if sid is None:
            raise DataError(f"unknown symbol {symbol!r}")
        return sid

    def __contains__(self, symbol):
        return symbol in self._ids


def load_triplets(path, entities, relations):
    """Parse a head<TAB>relation<TAB>tail file into id triplets.

    Ids are assigned in first-appearance order while the tables are unfrozen;
    on frozen tables an unknown symbol raises naming it.
    """
    triplets = []
    try:
        f = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read triplet file {path}: {e}") from e
    with f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DataError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
            h, r, t = fields
            triplets.append(Triplet(entities.add_or_get(h),
                                    relations.add_or_get(r),
                                    entities.add_or_get(t)))
    return triplets


class TextStore:
    """Per-entity/per-relation names and per-entity descriptions.

    Names are required for every original entity and relation; descriptions
    may be empty. Reverse relations have no text side at all.
    """

    def __init__(self, entity_names, relation_names, entity_descriptions):
        self.entity_names = entity_names
        self.relation_names = relation_names
        self.entity_descriptions = entity_descriptions

    @classmethod
    def load(cls, data_dir, entities, relations):
        ent_names = _read_text_map(data_dir / "entity2text.txt", entities, "entity name")
        rel_names = _read_text_map(data_dir / "relation2text.txt", relations, "relation name")
        desc_path = data_dir / "entity2textlong.txt"
        if desc_path.exists():
            descs = _read_text_map(desc_path, entities, "entity description",
                                   required=False)
        else:
            descs = [""] * len(entities)
        return cls(ent_names, rel_names, descs)

    def entity_name(self, e):
        return self.entity_names[e]

    def relation_name(self, r):
        if r >= len(self.relation_names):
            raise DataError(f"relation id {r} is a reverse relation; it has no name")
        return self.relation_names[r]

    def description(self, e):
        return self.entity_descriptions[e]


def _read_text_map(path, table, what, required=True):
    out = [None] * len(table)
    try:
        f = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {what} file {path}: {e}") from e
    with f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t", 1)
            if len(fields) != 2:
                raise DataError(f"{path}:{lineno}: expected symbol<TAB>text")
            symbol, text = fields
            if symbol in table:
                out[table.id_of(symbol)] = text
    if required:
        for i, text in enumerate(out):
            if not text:
                raise DataError(
                    f"{path}: missing {what} for symbol {table.symbols[i]!r}")
    else:
        out = [t or "" for t in out]
    return out


class KnowledgeGraph:
    """Entities, relations (reverses appended after augmentation), triplet
    splits, neighbor indices over the augmented train set, and the
    (source, relation) -> true-tails filter map over all splits."""

    def __init__(self, entities, relations, train, valid, test):
        self.entities = entities
        self.relations = relations
        self.n_original_relations = len(relations)
        self.train = train
        self.valid = valid
        self.test = test
        self.augmented = False
        self.train_augmented = None
        self._in_index = None
        self._out_index = None
        self._filter = None
        self._degree = None

    # construction ---------------------------------------------------------

    @classmethod
    def load(cls, data_dir):
        entities = SymbolTable()
        relations = SymbolTable()
        train = load_triplets(data_dir / "train.txt", entities, relations)
        valid = load_triplets(data_dir / "valid.txt", entities, relations)
        test = load_triplets(data_dir / "test.txt", entities, relations)
        entities.frozen = True
        relations.frozen = True
        return cls(entities, relations, train, valid, test)

    @property
    def n_entities(self):
        return len(self.entities)

    @property
    def n_relations(self):
        return 2 * self.n_original_relations if self.augmented else self.n_original_relations

    def reverse_of(self, r):
        if not self.augmented:
            raise DataError("reverse_of() before add_reverse_relations()")
        n = self.n_original_relations
        return r + n if r < n else r - n

    def add_reverse_relations(self):
        """Double the relation table and add (t, r-, h) for every train
        triplet; build the neighbor and filter indices."""
        if self.augmented:
            raise DataError("add_reverse_relations() called twice")
        self.augmented = True
        n = self.n_original_relations
        self.train_augmented = self.train + [
            Triplet(t, r + n, h) for h, r, t in self.train]
        self._build_indices()
        return self

    def _build_indices(self):
        n_ent = self.n_entities
        in_sets = [set() for _ in range(n_ent)]
        out_sets = [set() for _ in range(n_ent)]
        for h, r, t in self.train_augmented:
            in_sets[t].add((h, r))
            out_sets[h].add((t, r))
        # canonical order: (relation, entity)
        key = lambda pair: (pair[1], pair[0])
        self._in_index = [sorted(s, key=key) for s in in_sets]
        self._out_index = [sorted(s, key=key) for s in out_sets]

        filt = {}
        rev = self.reverse_of
        for split in (self.train, self.valid, self.test):
            for h, r, t in split:
                filt.setdefault((h, r), set()).add(t)
                filt.setdefault((t, rev(r)), set()).add(h)
        self._filter = filt

        deg = np.zeros(n_ent, dtype=np.int64)
        for h, r, t in self.train:
            deg[h] += 1
            deg[t] += 1
        self._degree = deg

    # queries ----------------------------------------------------------------

    def neighbors(self, e, direction="in", original_only=False):
        """(entity, relation) pairs incident to e in the augmented train set,
        sorted by (relation, entity). `original_only` drops reverse-relation
        edges (the text view of the graph)."""
        if self._in_index is None:
            raise DataError("neighbor index not built; call add_reverse_relations()")
        if direction == "in":
            pairs = self._in_index[e]
        elif direction == "out":
            pairs = self._out_index[e]
        else:
            raise ValueError(f"direction must be 'in' or 'out', got {direction!r}")
        if original_only:
            n = self.n_original_relations
            pairs = [p for p in pairs if p[1] < n]
        return pairs

    def sample_neighbors(self, e, k, rng, direction="in", exclude=None,
                         original_only=False):
        """Uniform sample without replacement from neighbors(e); all of them
        if fewer than k exist. `exclude` drops one (entity, relation) pair,
        the query's own edge, to avoid label leakage."""
        if k < 0:
            raise ValueError("k must be >= 0")
        pool = self.neighbors(e, direction, original_only)
        if exclude is not None:
            pool = [p for p in pool if p != tuple(exclude)]
        if len(pool) <= k:
            return list(pool)
        picks = rng.choice(len(pool), size=k, replace=False)
        return [pool[i] for i in sorted(picks)]

    def filter_set(self, source, relation):
        """All entities t with (source, relation, t) true in any split."""
        if self._filter is None:
            raise DataError("filter sets not built; call add_reverse_relations()")
        return self._filter.get((source, relation), set())

    def degree(self, e):
        """Number of original train edges incident to e."""
        return int(self._degree[e])

    def eval_queries(self, split):
        """Directed queries for a split: each (h, r, t) yields a tail query
        (h, r -> t) and a head query (t, r- -> h) under the reverse relation."""
        triplets = {"train": self.train, "valid": self.valid, "test": self.test}[split]
        queries = []
        for h, r, t in triplets:
            queries.append((h, r, t, "tail"))
            queries.append((t, self.reverse_of(r), h, "head"))
        return queries

    # serialization ------------------------------------------------------------

    def to_bytes(self):
        header = {
            "n_entities": self.n_entities,
            "n_original_relations": self.n_original_relations,
            "augmented": self.augmented,
            "splits": {k: len(getattr(self, k)) for k in ("train", "valid", "test")},
        }
        buf = io.BytesIO()
        buf.write(b"COLEKG01")
        hdr = json.dumps(header, sort_keys=True).encode("utf-8")
        buf.write(struct.pack("<Q", len(hdr)))
        buf.write(hdr)
        for table in (self.entities, self.relations):
            blob = "\n".join(table.symbols).encode("utf-8")
            buf.write(struct.pack("<Q", len(blob)))
            buf.write(blob)
        for split in ("train", "valid", "test"):
            arr = np.asarray(getattr(self, split), dtype=np.int64)
            buf.write(arr.tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, raw):
        buf = io.BytesIO(raw)
        if buf.read(8) != b"COLEKG01":
            raise DataError("graph cache: bad magic")
        (hlen,) = struct.unpack("<Q", buf.read(8))
        header = json.loads(buf.read(hlen).decode("utf-8"))
        tables = []
        for _ in range(2):
            (blen,) = struct.unpack("<Q", buf.read(8))
            table = SymbolTable()
            blob = buf.read(blen).decode("utf-8")
            for sym in (blob.split("\n") if blob else []):
                table.add_or_get(sym)
            table.frozen = True
            tables.append(table)
        splits = []
        for name in ("train", "valid", "test"):
            count = header["splits"][name]
            arr = np.frombuffer(buf.read(count * 3 * 8), dtype=np.int64).reshape(count, 3)
            splits.append([Triplet(*map(int, row)) for row in arr])
        graph = cls(tables[0], tables[1], *splits)
        if header["augmented"]:
            graph.add_reverse_relations()
        return graph

    def content_hash(self):
        return hashlib.sha256(self.to_bytes()).hexdigest()
