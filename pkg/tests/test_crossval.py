import json
import sys
from pathlib import Path

import pytest

from legalner.crossval import (
    TaggerSpec,
    confusion_csv,
    cross_validate,
    metrics_table_csv,
    report_to_dict,
)
from legalner.metrics import ConfusionMatrix
from legalner.partition import Partition, stratified_partition
from legalner.schemes import TagScheme, gold_labels

from corpusgen import make_memorizable, make_paper_like

STUB = str(Path(__file__).parent / "gold_adapter_stub.py")


@pytest.fixture(scope="module")
def memorizable():
    corpus = make_memorizable(n_docs=20)
    partition = stratified_partition(corpus, k=5, seed=42)
    return corpus, partition


def test_each_document_tested_exactly_once(memorizable):
    corpus, partition = memorizable
    report = cross_validate(corpus, partition, TaggerSpec("dictionary"), seed=1)
    assert len(report.folds) == 5
    tested = [doc for fold in report.folds for doc in fold.test_documents]
    assert sorted(tested) == sorted(d.doc_id for d in corpus.documents)


def test_dictionary_on_memorizable_corpus_is_perfect(memorizable):
    corpus, partition = memorizable
    report = cross_validate(corpus, partition, TaggerSpec("dictionary"), seed=1)
    assert report.pooled_entity.overall.f1 == 1.0
    assert not report.failed_folds


def test_oracle_pooled_f1_is_one(memorizable):
    corpus, partition = memorizable
    report = cross_validate(corpus, partition, TaggerSpec("oracle"), seed=1)
    assert report.pooled_entity.overall.f1 == 1.0
    assert report.pooled_macro.f1 == 1.0


def test_external_echo_adapter_through_full_harness(tmp_path, memorizable):
    corpus, partition = memorizable
    gold = {
        s.text: [str(lab) for lab in gold_labels(s.text, s.spans, TagScheme.BIO)]
        for _, _, s in corpus.sentences()
    }
    gold_path = tmp_path / "gold.json"
    gold_path.write_text(json.dumps(gold), encoding="utf-8")
    spec = TaggerSpec("external", {"command": [sys.executable, STUB, str(gold_path)]})
    report = cross_validate(corpus, partition, spec, seed=1)
    assert not report.failed_folds
    assert report.pooled_entity.overall.f1 == 1.0


def test_fold_confusions_sum_to_pooled(memorizable):
    corpus, partition = memorizable
    report = cross_validate(corpus, partition, TaggerSpec("dictionary"), seed=1)
    total = ConfusionMatrix.empty(list(report.classes))
    for fold in report.folds:
        total = total + fold.confusion
    assert total == report.pooled_confusion


def test_failed_fold_is_isolated(memorizable):
    corpus, partition = memorizable
    spec = TaggerSpec("external", {"command": [sys.executable, "-c", "raise SystemExit(3)"],
                                   "timeout": 2.0})
    report = cross_validate(corpus, partition, spec, seed=1)
    assert report.failed_folds == (0, 1, 2, 3, 4)
    assert all("Adapter" in (fold.error or "") for fold in report.folds)


def test_jobs_parallel_matches_serial(memorizable):
    corpus, partition = memorizable
    serial = cross_validate(corpus, partition, TaggerSpec("dictionary"), seed=9)
    parallel = cross_validate(corpus, partition, TaggerSpec("dictionary"), seed=9, jobs=4)
    assert report_to_dict(serial) == report_to_dict(parallel)


def test_linear_with_checkpoint_selection_runs_clean():
    corpus = make_paper_like(seed=3, n_docs=10)
    partition = stratified_partition(corpus, k=2, seed=5)
    report = cross_validate(
        corpus, partition, TaggerSpec("linear", {"epochs": 2}), seed=5
    )
    assert not report.failed_folds
    assert report.pooled_confusion.total > 0


def test_report_serialization_and_csv_shapes(memorizable):
    corpus, partition = memorizable
    report = cross_validate(corpus, partition, TaggerSpec("dictionary"), seed=1)
    payload = report_to_dict(report)
    assert set(payload) == {"classes", "folds", "pooled"}
    assert len(payload["folds"]) == 5
    for fold in payload["folds"]:
        assert set(fold) >= {"confusion", "per_class", "macro"}
    text = json.dumps(payload)
    assert json.loads(text) == payload

    table = metrics_table_csv(report.pooled_per_class, report.pooled_macro)
    lines = table.strip().splitlines()
    assert lines[0] == "Class,Recall,Precision,Accuracy,F1"
    assert lines[-1].startswith("Average,")
    assert len(lines) == 2 + len(report.classes)

    conf = confusion_csv(report.pooled_confusion).strip().splitlines()
    assert conf[0].split(",")[0] == "gold\\predicted"
    assert len(conf) == 1 + len(report.classes)


def test_overlapping_partition_cannot_be_built(memorizable):
    corpus, _ = memorizable
    ids = [d.doc_id for d in corpus.documents]
    with pytest.raises(ValueError, match="disjoint"):
        Partition(2, 0, ((ids[0],), tuple(ids)))


def test_unknown_tagger_kind_fails_folds(memorizable):
    corpus, partition = memorizable
    report = cross_validate(corpus, partition, TaggerSpec("nonsense"), seed=1)
    assert report.failed_folds == (0, 1, 2, 3, 4)
    assert all("unknown tagger kind" in (fold.error or "") for fold in report.folds)


def test_validation_split_ratio(memorizable):
    corpus, partition = memorizable
    # 20 docs, 8 sentences each; fold trains on 16 docs = 128 sentences,
    # so the seeded validation part is 12 sentences (one tenth, floored).
    calls = []
    import legalner.crossval as cv

    original = cv.make_tagger

    def spy(spec, train_sents, val_sents, scheme, seed, classes):
        calls.append((len(train_sents), len(val_sents)))
        return original(spec, train_sents, val_sents, scheme, seed, classes)

    cv.make_tagger, _saved = spy, original
    try:
        cross_validate(corpus, partition, TaggerSpec("dictionary"), seed=1)
    finally:
        cv.make_tagger = _saved
    for n_train, n_val in calls:
        total = n_train + n_val
        assert n_val == total // 10
