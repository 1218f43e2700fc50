"""Deterministic toy knowledge graph for tests and demos.

50 entities arranged in 10 groups of 5, with 5 relations whose targets are
functions of group membership: same-group peers, the group leader, the mirror
entity 25 positions away, a shared color entity (one of the last group), and
the next group's leader. Entity names are distinct single words; descriptions
mention the leader and color words, so part of the pattern is recoverable from
text alone while the mirror relation stays structure-only.
"""

import numpy as np

WORDS = [
    "agate", "amber", "basalt", "beryl", "calcite", "citrine", "coral",
    "quartz", "datolite", "diamond", "dolomite", "emerald", "feldspar",
    "flint", "galena", "garnet", "gneiss", "granite", "gypsum", "halite",
    "hematite", "jade", "jasper", "kyanite", "lazurite", "magnetite",
    "malachite", "marble", "mica", "obsidian", "olivine", "onyx", "opal",
    "peridot", "pumice", "pyrite", "rhyolite", "ruby", "sapphire", "schist",
    "selenite", "serpentine", "slate", "sodalite", "spinel", "sunstone",
    "topaz", "tourmaline", "turquoise", "zircon",
]

RELATIONS = [
    ("rel.peer", "peer of"),
    ("rel.leader", "leader is"),
    ("rel.mirror", "mirror of"),
    ("rel.color", "color is"),
    ("rel.nextleader", "next leader is"),
]

N_ENTITIES = 50
GROUP = 5


def toy_triplets():
    """All (head, relation_index, tail) id triplets of the fixed pattern."""
    triplets = []
    leader = lambda i: GROUP * (i // GROUP)
    for i in range(N_ENTITIES):
        g0 = leader(i)
        for j in range(g0, g0 + GROUP):
            if j > i:
                triplets.append((i, 0, j))
        if i % GROUP != 0:
            triplets.append((i, 1, g0))
        triplets.append((i, 2, (i + 25) % N_ENTITIES))
        if i < 45:
            triplets.append((i, 3, 45 + (i % GROUP)))
        triplets.append((i, 4, (g0 + GROUP) % N_ENTITIES))
    return triplets


def toy_splits(seed=13, n_valid=28, n_test=28):
    """Shuffle the pattern into train/valid/test so that every entity and
    relation keeps at least one train occurrence."""
    triplets = toy_triplets()
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(triplets))

    ecount = np.zeros(N_ENTITIES, dtype=int)
    rcount = np.zeros(len(RELATIONS), dtype=int)
    for h, r, t in triplets:
        ecount[h] += 1
        ecount[t] += 1
        rcount[r] += 1

    train, valid, test = [], [], []
    for idx in order:
        h, r, t = triplets[idx]
        removable = ecount[h] > 1 and ecount[t] > 1 and rcount[r] > 1
        if removable and len(valid) < n_valid:
            valid.append((h, r, t))
        elif removable and len(test) < n_test:
            test.append((h, r, t))
        else:
            train.append((h, r, t))
            continue
        ecount[h] -= 1
        ecount[t] -= 1
        rcount[r] -= 1
    return train, valid, test


def entity_symbol(i):
    return f"e{i:02d}"


def entity_name(i):
    return WORDS[i]


def entity_description(i):
    lead = WORDS[GROUP * (i // GROUP)]
    color = WORDS[45 + (i % GROUP)]
    return (f"the {WORDS[i]} specimen belongs to the circle of {lead} "
            f"and its color is {color}")


def write_toy_dataset(data_dir, seed=13):
    """Write the toy KG in the standard TSV layout under data_dir."""
    data_dir.mkdir(parents=True, exist_ok=True)
    train, valid, test = toy_splits(seed=seed)
    rel_syms = [sym for sym, _ in RELATIONS]
    for name, rows in (("train", train), ("valid", valid), ("test", test)):
        with open(data_dir / f"{name}.txt", "w", encoding="utf-8") as f:
            for h, r, t in rows:
                f.write(f"{entity_symbol(h)}\t{rel_syms[r]}\t{entity_symbol(t)}\n")
    with open(data_dir / "entity2text.txt", "w", encoding="utf-8") as f:
        for i in range(N_ENTITIES):
            f.write(f"{entity_symbol(i)}\t{entity_name(i)}\n")
    with open(data_dir / "relation2text.txt", "w", encoding="utf-8") as f:
        for sym, name in RELATIONS:
            f.write(f"{sym}\t{name}\n")
    with open(data_dir / "entity2textlong.txt", "w", encoding="utf-8") as f:
        for i in range(N_ENTITIES):
            f.write(f"{entity_symbol(i)}\t{entity_description(i)}\n")
    return data_dir
