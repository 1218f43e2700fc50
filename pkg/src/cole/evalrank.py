"""Filtered link-prediction evaluation: ranks, Hits@k/MRR aggregation,
two-model ensembling, and the degree-bin / prediction-overlap reports."""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

HITS_KS = (1, 3, 10)


class QueryResult(NamedTuple):
    source: int
    relation: int
    target: int
    side: str  # "head" | "tail"
    rank: int
    tag: str


class MetricsReport(NamedTuple):
    overall: dict
    head: dict
    tail: dict
    query_count: int

    def as_dict(self):
        return {"overall": self.overall, "head": self.head, "tail": self.tail,
                "query_count": self.query_count}


def filtered_rank(probs, target, filter_others):
    """1-based rank of the target after masking every other known-true
    candidate to -inf. Ties are pessimistic: equal-scored competitors precede
    the target. `filter_others` must not contain the target."""
    if target in filter_others:
        raise ValueError("filter set must exclude the target before masking")
    scores = np.asarray(probs, dtype=np.float64)
    target_score = scores[target]
    if filter_others:
        scores = scores.copy()
        scores[list(filter_others)] = -np.inf
    greater = int(np.sum(scores > target_score))
    equal = int(np.sum(scores == target_score)) - 1  # minus the target itself
    return 1 + greater + equal


def _side_metrics(ranks):
    ranks = np.asarray(ranks, dtype=np.float64)
    out = {f"hits@{k}": float(np.mean(ranks <= k)) for k in HITS_KS}
    out["mrr"] = float(np.mean(1.0 / ranks))
    return out


def aggregate(results):
    """Hits@k and MRR per side; overall metrics are the unweighted mean of
    the head-side and tail-side values."""
    if not results:
        raise ValueError("aggregate: empty result list")
    sides = {}
    for side in ("head", "tail"):
        ranks = [r.rank for r in results if r.side == side]
        if ranks:
            sides[side] = _side_metrics(ranks)
    if len(sides) == 2:
        overall = {k: 0.5 * (sides["head"][k] + sides["tail"][k])
                   for k in sides["head"]}
    else:
        overall = dict(next(iter(sides.values())))
    empty = {k: float("nan") for k in overall}
    return MetricsReport(overall, sides.get("head", empty),
                         sides.get("tail", empty), len(results))


def ensemble(probs_s, probs_t, mode="avg", weight=0.5):
    """Combine two models' probability rows: 'avg' is the weighted average
    w*P_s + (1-w)*P_t (a distribution); 'max' is the elementwise maximum,
    which is a ranking score vector, not a distribution."""
    probs_s = np.asarray(probs_s)
    probs_t = np.asarray(probs_t)
    if probs_s.shape != probs_t.shape:
        raise ValueError(f"ensemble: shape mismatch {probs_s.shape} vs {probs_t.shape}")
    if mode == "avg":
        return weight * probs_s + (1.0 - weight) * probs_t
    if mode == "max":
        return np.maximum(probs_s, probs_t)
    raise ValueError(f"ensemble mode must be 'avg' or 'max', got {mode!r}")


def evaluate(score_fn, graph, split, tag, batch_size=128, workers=None):
    """Rank every directed query of a split under the filtered protocol.

    score_fn maps (sources, relations) index arrays to a (B, n_entities)
    probability matrix over frozen parameters; batches may be scored from
    worker threads (COLE_THREADS caps the pool).
    """
    queries = graph.eval_queries(split)
    batches = [queries[i:i + batch_size] for i in range(0, len(queries), batch_size)]

    def run_batch(batch):
        src = np.array([q[0] for q in batch])
        rel = np.array([q[1] for q in batch])
        probs = score_fn(src, rel)
        out = []
        for row, (s, r, t, side) in zip(probs, batch):
            others = graph.filter_set(s, r) - {t}
            out.append(QueryResult(s, r, t, side, filtered_rank(row, t, others), tag))
        return out

    if workers is None:
        workers = int(os.environ.get("COLE_THREADS", "1"))
    results = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(run_batch, batches):
                results.extend(part)
    else:
        for batch in batches:
            results.extend(run_batch(batch))
    return results


def degree_bin_report(results, graph, bin_edges=(1, 6, 11, 21, 51)):
    """Hits@1 of each model tag binned by the seen entity's train degree.

    bin_edges are left edges; the last bin is open-ended. Degrees below the
    first edge (entities unseen in train) are clamped into the first bin.
    Returns rows (bin_label, tag, hits@1, count).
    """
    edges = list(bin_edges)
    labels = [f"[{a},{b})" for a, b in zip(edges, edges[1:])] + [f"[{edges[-1]},inf)"]

    def bin_of(degree):
        idx = 0
        for i, edge in enumerate(edges):
            if degree >= edge:
                idx = i
        return idx

    cells = {}
    for r in results:
        key = (bin_of(graph.degree(r.source)), r.tag)
        hits, count = cells.get(key, (0, 0))
        cells[key] = (hits + (1 if r.rank == 1 else 0), count + 1)
    rows = []
    for (b, tag), (hits, count) in sorted(cells.items()):
        rows.append((labels[b], tag, hits / count, count))
    return rows


def overlap_report(results_a, results_b):
    """Partition rank-1 correct predictions of two runs over the same query
    set into (only A, both, only B) counts."""
    key = lambda r: (r.source, r.relation, r.target, r.side)
    qa = {key(r) for r in results_a}
    qb = {key(r) for r in results_b}
    if qa != qb:
        raise ValueError("overlap_report: result sets cover different queries")
    hit_a = {key(r) for r in results_a if r.rank == 1}
    hit_b = {key(r) for r in results_b if r.rank == 1}
    both = len(hit_a & hit_b)
    return len(hit_a) - both, both, len(hit_b) - both


def random_baseline_mrr(graph, split, n_shuffles=5, seed=0):
    """Shuffled-score oracle: expected filtered MRR of random rankings."""
    rng = np.random.default_rng(seed)
    total = []
    for _ in range(n_shuffles):
        score_fn = lambda src, rel: rng.random((len(src), graph.n_entities))
        results = evaluate(score_fn, graph, split, tag="random")
        total.append(aggregate(results).overall["mrr"])
    return float(np.mean(total))
