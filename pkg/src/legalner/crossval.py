"""K-fold cross-validation driver and report serialization.

Each fold tests on one partition subset and trains on the others; the
training sentences are split 9:1 into a training and a validation part
(seeded, sentence-level). Taggers that support checkpoint selection (the
perceptron) keep the epoch with the best mean validation F1. There is
never document overlap between a fold's training and test sides, which is
asserted, not assumed.

Pooled metrics come from the summed confusion matrices of all folds, not
from averaging per-fold metrics; per-fold reports are kept alongside.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .corpus import Corpus, Sentence
from .metrics import (
    Averages,
    ClassMetrics,
    ConfusionMatrix,
    EntityMatchReport,
    MicroAverages,
    entity_exact_match,
    macro_average,
    micro_average,
    per_class_metrics,
)
from .partition import Partition
from .schemes import TagScheme, gold_labels, label_inventory
from .seeds import derive_seed
from .taggers import (
    ExternalTagger,
    OracleTagger,
    train_dictionary,
    train_linear,
)

import random


@dataclass(frozen=True)
class TaggerSpec:
    """Names a registered tagger kind plus its options.

    kinds: "dictionary", "linear" (options: epochs), "oracle",
    "external" (options: command, timeout).
    """

    kind: str
    options: dict = field(default_factory=dict)


def make_tagger(
    spec: TaggerSpec,
    train_sents: list[Sentence],
    val_sents: list[Sentence],
    scheme: TagScheme,
    seed: int,
    classes: list[str],
):
    if spec.kind == "dictionary":
        return train_dictionary(train_sents, scheme)
    if spec.kind == "linear":
        scorer = None
        if val_sents:
            def scorer(tagger) -> float:
                cm = _confusion_for(tagger, val_sents, scheme, classes)
                return macro_average(per_class_metrics(cm)).f1
        return train_linear(
            train_sents,
            scheme,
            epochs=int(spec.options.get("epochs", 5)),
            seed=seed,
            validation=val_sents if val_sents else None,
            score_validation=scorer,
        )
    if spec.kind == "oracle":
        return OracleTagger(scheme)
    if spec.kind == "external":
        return ExternalTagger(
            spec.options["command"], scheme, timeout=float(spec.options.get("timeout", 30.0))
        )
    raise ValueError(f"unknown tagger kind {spec.kind!r}")


def _confusion_for(
    tagger, sentences: list[Sentence], scheme: TagScheme, classes: list[str]
) -> ConfusionMatrix:
    cm = ConfusionMatrix.empty(classes)
    for sent in sentences:
        gold = [str(lab) for lab in gold_labels(sent.text, sent.spans, scheme)]
        pred = [str(lab) for lab in tagger.predict(sent)[0]]
        cm = cm + ConfusionMatrix.from_labels(gold, pred, classes)
    return cm


@dataclass(frozen=True)
class FoldReport:
    fold: int
    test_documents: tuple[str, ...]
    confusion: ConfusionMatrix | None = None
    per_class: dict[str, ClassMetrics] | None = None
    macro: Averages | None = None
    micro: MicroAverages | None = None
    entity: EntityMatchReport | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class CVReport:
    classes: tuple[str, ...]
    folds: tuple[FoldReport, ...]
    pooled_confusion: ConfusionMatrix
    pooled_per_class: dict[str, ClassMetrics]
    pooled_macro: Averages
    pooled_micro: MicroAverages
    pooled_entity: EntityMatchReport

    @property
    def failed_folds(self) -> tuple[int, ...]:
        return tuple(f.fold for f in self.folds if f.failed)


def cross_validate(
    corpus: Corpus,
    partition: Partition,
    spec: TaggerSpec,
    seed: int = 0,
    scheme: TagScheme = TagScheme.BIO,
    jobs: int = 1,
) -> CVReport:
    """Run one experiment per partition subset; pool by matrix addition.

    A fold whose tagger raises is reported with its error and excluded
    from the pooled numbers; the remaining folds still run.
    """
    by_id = {d.doc_id: d for d in corpus.documents}
    classes = [str(lab) for lab in label_inventory(corpus, scheme)]

    def run_fold(k: int) -> FoldReport:
        test_ids = partition.subsets[k]
        train_ids = [
            doc_id
            for j, subset in enumerate(partition.subsets)
            if j != k
            for doc_id in subset
        ]
        overlap = set(test_ids) & set(train_ids)
        assert not overlap, f"fold {k}: train/test leakage on documents {sorted(overlap)}"

        train_pool = [s for i in train_ids for s in by_id[i].sentences]
        rng = random.Random(derive_seed(seed, f"fold{k}/valsplit"))
        order = list(range(len(train_pool)))
        rng.shuffle(order)
        n_val = len(train_pool) // 10  # 9:1 training/validation ratio
        val_sents = [train_pool[i] for i in order[:n_val]]
        train_sents = [train_pool[i] for i in order[n_val:]]

        try:
            tagger = make_tagger(
                spec, train_sents, val_sents, scheme, derive_seed(seed, f"fold{k}/train"), classes
            )
            cm = ConfusionMatrix.empty(classes)
            gold_span_lists, pred_span_lists = [], []
            for doc_id in test_ids:
                for sent in by_id[doc_id].sentences:
                    gold = [str(lab) for lab in gold_labels(sent.text, sent.spans, scheme)]
                    pred_labels, pred_spans = tagger.predict(sent)
                    cm = cm + ConfusionMatrix.from_labels(
                        gold, [str(lab) for lab in pred_labels], classes
                    )
                    gold_span_lists.append(list(sent.spans))
                    pred_span_lists.append(pred_spans)
            if hasattr(tagger, "close"):
                tagger.close()
        except Exception as exc:  # noqa: BLE001  (fold isolation is the contract)
            return FoldReport(k, tuple(test_ids), error=f"{type(exc).__name__}: {exc}")

        per_class = per_class_metrics(cm)
        return FoldReport(
            fold=k,
            test_documents=tuple(test_ids),
            confusion=cm,
            per_class=per_class,
            macro=macro_average(per_class),
            micro=micro_average(cm),
            entity=entity_exact_match(gold_span_lists, pred_span_lists),
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            folds = tuple(pool.map(run_fold, range(partition.k)))
    else:
        folds = tuple(run_fold(k) for k in range(partition.k))

    pooled_cm = ConfusionMatrix.empty(classes)
    pooled_entity = EntityMatchReport()
    for fold in folds:
        if not fold.failed:
            assert fold.confusion is not None and fold.entity is not None
            pooled_cm = pooled_cm + fold.confusion
            pooled_entity = pooled_entity + fold.entity
    pooled_per_class = per_class_metrics(pooled_cm) if pooled_cm.total else {}
    pooled_macro = macro_average(pooled_per_class) if pooled_per_class else Averages(0, 0, 0, 0)
    return CVReport(
        classes=tuple(classes),
        folds=folds,
        pooled_confusion=pooled_cm,
        pooled_per_class=pooled_per_class,
        pooled_macro=pooled_macro,
        pooled_micro=micro_average(pooled_cm),
        pooled_entity=pooled_entity,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _per_class_dict(per_class: dict[str, ClassMetrics]) -> dict:
    return {
        name: {
            "precision": m.precision,
            "recall": m.recall,
            "f1": m.f1,
            "accuracy": m.accuracy,
            "tp": m.tp,
            "fp": m.fp,
            "fn": m.fn,
            "tn": m.tn,
            "undefined": list(m.undefined),
        }
        for name, m in per_class.items()
    }


def _entity_dict(report: EntityMatchReport) -> dict:
    return {
        "per_type": {
            etype.value: {
                "tp": c.tp, "fp": c.fp, "fn": c.fn,
                "precision": c.precision, "recall": c.recall, "f1": c.f1,
            }
            for etype, c in report.per_type.items()
        },
        "overall": {
            "tp": report.overall.tp, "fp": report.overall.fp, "fn": report.overall.fn,
            "precision": report.overall.precision,
            "recall": report.overall.recall,
            "f1": report.overall.f1,
        },
    }


def report_to_dict(report: CVReport) -> dict:
    """Machine-readable report, full float precision."""
    folds = []
    for fold in report.folds:
        if fold.failed:
            folds.append({"fold": fold.fold, "error": fold.error,
                          "test_documents": list(fold.test_documents)})
            continue
        assert fold.confusion and fold.per_class and fold.macro and fold.micro and fold.entity
        folds.append(
            {
                "fold": fold.fold,
                "test_documents": list(fold.test_documents),
                "confusion": [list(row) for row in fold.confusion.counts],
                "per_class": _per_class_dict(fold.per_class),
                "macro": vars(fold.macro).copy(),
                "micro": {"precision": fold.micro.precision, "recall": fold.micro.recall,
                          "f1": fold.micro.f1},
                "entity": _entity_dict(fold.entity),
            }
        )
    return {
        "classes": list(report.classes),
        "folds": folds,
        "pooled": {
            "confusion": [list(row) for row in report.pooled_confusion.counts],
            "per_class": _per_class_dict(report.pooled_per_class),
            "macro": vars(report.pooled_macro).copy(),
            "micro": {
                "precision": report.pooled_micro.precision,
                "recall": report.pooled_micro.recall,
                "f1": report.pooled_micro.f1,
            },
            "entity": _entity_dict(report.pooled_entity),
        },
    }


def metrics_table_csv(per_class: dict[str, ClassMetrics], macro: Averages) -> str:
    """Per-class table plus Average row, two decimals."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["Class", "Recall", "Precision", "Accuracy", "F1"])
    for name, m in per_class.items():
        writer.writerow(
            [name, f"{m.recall:.2f}", f"{m.precision:.2f}", f"{m.accuracy:.2f}", f"{m.f1:.2f}"]
        )
    writer.writerow(
        [
            "Average",
            f"{macro.recall:.2f}",
            f"{macro.precision:.2f}",
            f"{macro.accuracy:.2f}",
            f"{macro.f1:.2f}",
        ]
    )
    return buf.getvalue()


def confusion_csv(cm: ConfusionMatrix) -> str:
    """Gold rows by predicted columns, integer counts."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["gold\\predicted", *cm.classes])
    for name, row in zip(cm.classes, cm.counts):
        writer.writerow([name, *row])
    return buf.getvalue()
