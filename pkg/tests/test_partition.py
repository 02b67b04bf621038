import random

import numpy as np
import pytest

from legalner.corpus import (
    CATEGORY_NAMES,
    CharSpan,
    Corpus,
    Document,
    EntityType,
    Sentence,
)
from legalner.partition import (
    Partition,
    balance_csv,
    balance_report,
    category_counts,
    deduplicate_subsets,
    feature_vector,
    kmeans_lp,
    stratified_partition,
)

from corpusgen import make_paper_like


def _doc(doc_id, *sentences):
    return Document(doc_id, tuple(sentences))


def test_feature_vector_arithmetic():
    # 2 Person + 1 Court spans and 7 words outside spans -> 0.2 / 0.1 / 0.7
    sent1 = Sentence(
        "Ana Anic i Ivo Ivic pred sudom",
        (CharSpan(0, 8, EntityType.PERSON), CharSpan(11, 19, EntityType.PERSON)),
    )  # outside words: i, pred, sudom
    sent2 = Sentence(
        "sud resava brzo i jasno",
        (CharSpan(0, 3, EntityType.COURT),),
    )  # outside words: resava, brzo, i, jasno
    vec = feature_vector(_doc("d", sent1, sent2))
    expected = {"Person": 0.2, "Court": 0.1, "O": 0.7}
    for name, value in zip(CATEGORY_NAMES, vec):
        assert value == pytest.approx(expected.get(name, 0.0))
    assert vec.sum() == pytest.approx(1.0)


def test_feature_vector_all_outside():
    vec = feature_vector(_doc("d", Sentence("samo obicne reci ovde")))
    assert vec[-1] == 1.0 and vec[:-1].sum() == 0.0


def test_feature_vector_empty_document_is_an_error():
    with pytest.raises(ValueError, match="empty document"):
        feature_vector(_doc("d", Sentence("")))


def test_partial_word_overlap_not_counted_outside():
    # span covers "sud" inside word "sudom": that word is not outside
    sent = Sentence("sudom upravlja", (CharSpan(0, 3, EntityType.COURT),))
    counts = category_counts(_doc("d", sent))
    assert counts[-1] == 1  # only "upravlja"


def test_kmeans_l1_median_centroid():
    pts = np.array([[0.0, 1.0], [0.0, 3.0], [0.0, 100.0]])
    result = kmeans_lp(pts, k=1, p=1, seed=0)
    assert np.allclose(result.centroids[0], [0.0, 3.0])


def test_kmeans_planted_two_clusters_recovered():
    rng = np.random.default_rng(0)
    a = np.array([1.0, 0, 0, 0]) + rng.normal(0, 0.02, size=(20, 4))
    b = np.array([0, 1.0, 0, 0]) + rng.normal(0, 0.02, size=(20, 4))
    pts = np.vstack([a, b])
    result = kmeans_lp(pts, k=2, p=1, seed=1)
    first, second = result.assignments[:20], result.assignments[20:]
    assert len(set(first.tolist())) == 1
    assert len(set(second.tolist())) == 1
    assert first[0] != second[0]


def test_kmeans_k_equals_n_zero_objective():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    result = kmeans_lp(pts, k=3, p=2, seed=3)
    assert result.objective == pytest.approx(0.0)
    assert sorted(result.assignments.tolist()) == [0, 1, 2]


def test_kmeans_objective_non_increasing():
    rng = np.random.default_rng(5)
    pts = rng.random((60, 9))
    for p in (1, 2):
        result = kmeans_lp(pts, k=4, p=p, seed=11)
        history = result.objective_history
        assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))


def test_kmeans_parameter_errors():
    pts = np.zeros((3, 2))
    with pytest.raises(ValueError):
        kmeans_lp(pts, k=0)
    with pytest.raises(ValueError):
        kmeans_lp(pts, k=4)
    with pytest.raises(ValueError):
        kmeans_lp(pts, k=2, p=3)


def test_stratified_partition_disjoint_cover_and_determinism():
    corpus = make_paper_like(seed=7)
    part_a = stratified_partition(corpus, k=5, p=1, seed=42)
    part_b = stratified_partition(corpus, k=5, p=1, seed=42)
    assert part_a == part_b
    all_ids = [i for subset in part_a.subsets for i in subset]
    assert sorted(all_ids) == sorted(d.doc_id for d in corpus.documents)
    assert len(all_ids) == len(set(all_ids)) == 75
    assert all(subset for subset in part_a.subsets)
    assert stratified_partition(corpus, k=5, p=1, seed=43) != part_a


def test_stratified_partition_sizes_for_balanced_clusters():
    corpus = make_paper_like(seed=7)
    part = stratified_partition(corpus, k=5, p=1, seed=42)
    assert sum(len(s) for s in part.subsets) == 75
    # rotation spreads the remainders: sizes may differ by at most the
    # number of clusters that empty mid-round
    sizes = sorted(len(s) for s in part.subsets)
    assert sizes[-1] - sizes[0] <= 5


def test_k_equals_document_count():
    corpus = Corpus(
        tuple(
            _doc(f"d{i}", Sentence("sud radi", (CharSpan(0, 3, EntityType.COURT),)))
            for i in range(5)
        ),
        "lat",
    )
    part = stratified_partition(corpus, k=5, seed=0)
    assert all(len(s) == 1 for s in part.subsets)


def test_partition_json_roundtrip():
    part = Partition(2, 42, (("a", "b"), ("c",)))
    assert Partition.from_json(part.to_json()) == part


def test_partition_rejects_duplicates():
    with pytest.raises(ValueError, match="disjoint"):
        Partition(2, 0, (("a",), ("a",)))


def test_dedup_keeps_first_occurrence_within_subset():
    header = Sentence("Apelacioni sud u Novom Sadu resava", (CharSpan(0, 27, EntityType.COURT),))
    body_a = Sentence("spor Ana Anic", (CharSpan(5, 13, EntityType.PERSON),))
    body_b = Sentence("spor Ivo Ivic", (CharSpan(5, 13, EntityType.PERSON),))
    corpus = Corpus((_doc("a", header, body_a), _doc("b", header, body_b)), "lat")
    views = deduplicate_subsets(Partition(1, 0, (("a", "b"),)), corpus)
    assert len(views) == 1
    texts = [s.text for _, _, s in views[0].sentences()]
    assert texts == [header.text, body_a.text, body_b.text]


def test_dedup_idempotent_and_cross_subset_untouched():
    header = Sentence("Isti red teksta ovde", (CharSpan(0, 4, EntityType.DECISION),))
    corpus = Corpus((_doc("a", header), _doc("b", header)), "lat")
    part = Partition(2, 0, (("a",), ("b",)))
    views = deduplicate_subsets(part, corpus)
    assert [len(list(v.sentences())) for v in views] == [1, 1]
    again = [
        deduplicate_subsets(Partition(1, 0, ((d.doc_id,),)), view)[0]
        for view in views
        for d in view.documents
    ]
    assert [len(list(v.sentences())) for v in again] == [1, 1]


def test_dedup_no_duplicates_is_identity():
    corpus = make_paper_like(seed=2, n_docs=6)
    part = stratified_partition(corpus, k=2, seed=1)
    views = deduplicate_subsets(part, corpus)
    total = sum(len(list(v.sentences())) for v in views)
    assert total == sum(len(d.sentences) for d in corpus.documents)


def test_balance_report_single_subset_equals_totals():
    corpus = make_paper_like(seed=4, n_docs=8)
    part = Partition(1, 0, (tuple(d.doc_id for d in corpus.documents),))
    table = balance_report(part, corpus)
    expected = sum(category_counts(d) for d in corpus.documents)
    assert (table[0] == expected).all()


def test_balance_report_matches_recount_and_csv_shape():
    corpus = make_paper_like(seed=7)
    part = stratified_partition(corpus, k=5, seed=42)
    table = balance_report(part, corpus)
    by_id = {d.doc_id: d for d in corpus.documents}
    for row, subset in zip(table, part.subsets):
        recount = sum(category_counts(by_id[i]) for i in subset)
        assert (row == recount).all()
    csv_text = balance_csv(table)
    lines = csv_text.strip().splitlines()
    assert lines[0] == ",".join(CATEGORY_NAMES)
    assert len(lines) == 6


def dispersion(table: np.ndarray) -> np.ndarray:
    """Per-category max/min ratio across folds (inf when a fold has zero)."""
    high = table.max(axis=0).astype(float)
    low = table.min(axis=0).astype(float)
    with np.errstate(divide="ignore"):
        return np.where(low > 0, high / np.maximum(low, 1e-300), np.inf)


def test_stratified_beats_random_split_dispersion():
    corpus = make_paper_like(seed=7)
    part = stratified_partition(corpus, k=5, p=1, seed=42)
    ours = dispersion(balance_report(part, corpus))

    sizes = [len(s) for s in part.subsets]
    ids = [d.doc_id for d in corpus.documents]
    rng = random.Random(2024)
    samples = []
    for _ in range(100):
        shuffled = ids[:]
        rng.shuffle(shuffled)
        subsets, pos = [], 0
        for size in sizes:
            subsets.append(tuple(shuffled[pos : pos + size]))
            pos += size
        samples.append(dispersion(balance_report(Partition(5, 0, tuple(subsets)), corpus)))
    med = np.median(np.vstack(samples), axis=0)
    assert (ours <= med).all(), f"dispersion {ours} vs random median {med}"
