"""Document-level stratified partitioning for cross-validation.

Pipeline: one feature vector per document (its normalized category
histogram over the 8 entity types plus O), K-means clustering of the
documents under an L1 or L2 metric, then round-robin sampling without
replacement that draws one random document per non-empty cluster and
deals the draws across the K final subsets with a rotating
cluster-to-subset mapping, so every cluster's documents spread over every
subset. Finally, duplicated sentences inside one subset (boilerplate like
court headers) are removed.

Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import random
import unicodedata
from dataclasses import dataclass

import numpy as np

from .corpus import CATEGORY_NAMES, Corpus, Document, ENTITY_ORDER
from .seeds import derive_seed

#: Feature dimension: 8 entity categories plus O.
N_CATEGORIES = len(CATEGORY_NAMES)

_ENTITY_INDEX = {e: i for i, e in enumerate(ENTITY_ORDER)}


def category_counts(document: Document) -> np.ndarray:
    """Integer category histogram of one document.

    Entity components count span appearances; the O component counts
    whitespace-delimited words lying entirely outside all spans.
    """
    counts = np.zeros(N_CATEGORIES, dtype=np.int64)
    for sent in document.sentences:
        for span in sent.spans:
            counts[_ENTITY_INDEX[span.entity]] += 1
        pos = 0
        for word in sent.text.split():
            start = sent.text.index(word, pos)
            end = start + len(word)
            pos = end
            if not any(sp.start < end and start < sp.end for sp in sent.spans):
                counts[-1] += 1
    return counts


def feature_vector(document: Document) -> np.ndarray:
    """L1-normalized category histogram (components sum to 1)."""
    counts = category_counts(document)
    total = int(counts.sum())
    if total == 0:
        raise ValueError(f"empty document {document.doc_id!r}: no words and no spans")
    return counts.astype(np.float64) / total


@dataclass(frozen=True)
class KMeansResult:
    assignments: np.ndarray          # shape (n,), cluster index per point
    centroids: np.ndarray            # shape (k, d)
    objective: float                 # sum of ||x - mu||_p^p at convergence
    objective_history: tuple[float, ...]
    iterations: int


def _distances(x: np.ndarray, centroids: np.ndarray, p: int) -> np.ndarray:
    diff = x[:, None, :] - centroids[None, :, :]
    if p == 1:
        return np.abs(diff).sum(axis=2)
    return (diff * diff).sum(axis=2)


def kmeans_lp(
    features: np.ndarray,
    k: int,
    p: int = 1,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 0.0,
) -> KMeansResult:
    """Lloyd-style K-means under the L_p^p objective, p in {1, 2}.

    Centroid updates use the coordinate-wise median for p=1 and the mean
    for p=2, both of which minimize the within-cluster objective, so the
    objective is non-increasing across iterations (asserted). Empty
    clusters are re-seeded with the point farthest from its own centroid.
    Initialization is greedy farthest-point from a seeded random start.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("features must be a 2-d array (points x dimensions)")
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if p not in (1, 2):
        raise ValueError(f"p must be 1 or 2, got {p}")

    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    while len(chosen) < k:
        dist = _distances(x, x[chosen], p).min(axis=1)
        dist[chosen] = -1.0  # never re-pick a centroid
        chosen.append(int(np.argmax(dist)))
    centroids = x[chosen].copy()

    assignments = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    iterations = 0
    for iterations in range(1, max_iters + 1):
        dist = _distances(x, centroids, p)
        new_assignments = dist.argmin(axis=1)

        # Re-seed empty clusters with the globally worst-fitting point.
        for cluster in range(k):
            if not (new_assignments == cluster).any():
                own = dist[np.arange(n), new_assignments].copy()
                # Do not steal the only point of another cluster.
                for other in range(k):
                    members = np.flatnonzero(new_assignments == other)
                    if len(members) == 1:
                        own[members] = -1.0
                worst = int(np.argmax(own))
                new_assignments[worst] = cluster

        for cluster in range(k):
            members = x[new_assignments == cluster]
            centroids[cluster] = (
                np.median(members, axis=0) if p == 1 else members.mean(axis=0)
            )

        objective = float(
            _distances(x, centroids, p)[np.arange(n), new_assignments].sum()
        )
        assert not history or objective <= history[-1] + 1e-9, (
            f"objective increased: {history[-1]} -> {objective}"
        )
        converged = bool((new_assignments == assignments).all())
        small_step = tol > 0 and history and history[-1] - objective <= tol
        assignments = new_assignments
        history.append(objective)
        if converged or small_step:
            break

    return KMeansResult(assignments, centroids, history[-1], tuple(history), iterations)


@dataclass(frozen=True)
class Partition:
    """K pairwise-disjoint ordered subsets of document ids, covering the corpus."""

    k: int
    seed: int
    subsets: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        if self.k != len(self.subsets):
            raise ValueError(f"k={self.k} but {len(self.subsets)} subsets given")
        flat = [doc_id for subset in self.subsets for doc_id in subset]
        if len(flat) != len(set(flat)):
            raise ValueError("subsets are not pairwise disjoint")

    def to_json(self) -> str:
        return json.dumps(
            {"K": self.k, "seed": self.seed, "subsets": [list(s) for s in self.subsets]},
            ensure_ascii=False,
            indent=2,
        )

    @classmethod
    def from_json(cls, data: str | bytes) -> "Partition":
        payload = json.loads(data)
        return cls(
            int(payload["K"]),
            int(payload["seed"]),
            tuple(tuple(s) for s in payload["subsets"]),
        )


def stratified_partition(corpus: Corpus, k: int = 5, p: int = 1, seed: int = 0) -> Partition:
    """Cluster documents by category histogram, then deal them into K subsets.

    Round r draws one random document from every non-empty cluster c and
    assigns it to subset (c + r) mod K; draws are without replacement, so
    the subsets are a disjoint cover of the corpus.
    """
    docs = corpus.documents
    if len(docs) < k:
        raise ValueError(f"need at least k={k} documents, got {len(docs)}")
    features = np.stack([feature_vector(d) for d in docs])
    result = kmeans_lp(features, k, p=p, seed=derive_seed(seed, "kmeans"))

    clusters: list[list[int]] = [[] for _ in range(k)]
    for idx, cluster in enumerate(result.assignments):
        clusters[int(cluster)].append(idx)

    rng = random.Random(derive_seed(seed, "draw"))
    subsets: list[list[str]] = [[] for _ in range(k)]
    rounds = 0
    while any(clusters):
        for c in range(k):
            if clusters[c]:
                pick = clusters[c].pop(rng.randrange(len(clusters[c])))
                subsets[(c + rounds) % k].append(docs[pick].doc_id)
        rounds += 1
    return Partition(k, seed, tuple(tuple(s) for s in subsets))


def deduplicate_subsets(partition: Partition, corpus: Corpus) -> list[Corpus]:
    """Per-subset corpus views with duplicated sentences removed.

    Within one subset, sentences whose NFC-normalized text is identical
    keep only the first occurrence (document order, then sentence order).
    The same sentence in two different subsets is untouched.
    """
    by_id = {d.doc_id: d for d in corpus.documents}
    views: list[Corpus] = []
    for subset in partition.subsets:
        seen: set[str] = set()
        documents = []
        for doc_id in subset:
            if doc_id not in by_id:
                raise ValueError(f"partition references unknown document {doc_id!r}")
            doc = by_id[doc_id]
            kept = []
            for sent in doc.sentences:
                key = unicodedata.normalize("NFC", sent.text)
                if key not in seen:
                    seen.add(key)
                    kept.append(sent)
            documents.append(Document(doc.doc_id, tuple(kept)))
        views.append(Corpus(tuple(documents), corpus.script))
    return views


def balance_report(partition: Partition, corpus: Corpus) -> np.ndarray:
    """K x 9 table of per-subset category counts (rows follow subset order)."""
    by_id = {d.doc_id: d for d in corpus.documents}
    table = np.zeros((partition.k, N_CATEGORIES), dtype=np.int64)
    for row, subset in enumerate(partition.subsets):
        for doc_id in subset:
            table[row] += category_counts(by_id[doc_id])
    return table


def balance_csv(table: np.ndarray) -> str:
    """CSV rendering of a balance table, header = category names."""
    lines = [",".join(CATEGORY_NAMES)]
    lines.extend(",".join(str(int(v)) for v in row) for row in table)
    return "\n".join(lines) + "\n"
