"""Token-level confusion matrix, per-class and averaged metrics,
entity-level exact-match scoring.

Per-class metrics are one-vs-rest over the confusion matrix:

    Prec_i = TP_i / (TP_i + FP_i)
    Rec_i  = TP_i / (TP_i + FN_i)
    F1_i   = 2 * Prec_i * Rec_i / (Prec_i + Rec_i)
    Acc_i  = (TP_i + TN_i) / (TP_i + TN_i + FP_i + FN_i)

A zero denominator yields 0.0 and the metric name is recorded in the
``undefined`` field of the class row. Macro averages are unweighted
arithmetic means over all classes, the O class included. Micro averaging
pools counts first; with the O class dominating token counts by orders of
magnitude it paints a rosier picture than the macro numbers, which is why
macro is the primary report and micro is offered only as a side channel.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import CharSpan, EntityType


@dataclass(frozen=True)
class ConfusionMatrix:
    """Gold-by-predicted token counts over a fixed class order."""

    classes: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.classes)
        if len(self.counts) != n or any(len(row) != n for row in self.counts):
            raise ValueError("counts must be a square matrix over the class order")
        if any(c < 0 for row in self.counts for c in row):
            raise ValueError("counts must be non-negative")

    @classmethod
    def empty(cls, classes: Sequence[str]) -> "ConfusionMatrix":
        n = len(classes)
        return cls(tuple(classes), tuple((0,) * n for _ in range(n)))

    @classmethod
    def from_labels(
        cls,
        gold: Sequence[str],
        predicted: Sequence[str],
        classes: Sequence[str],
    ) -> "ConfusionMatrix":
        if len(gold) != len(predicted):
            raise ValueError(f"{len(gold)} gold labels vs {len(predicted)} predicted")
        index = {c: i for i, c in enumerate(classes)}
        n = len(classes)
        counts = [[0] * n for _ in range(n)]
        for g, p in zip(gold, predicted):
            if g not in index:
                raise ValueError(f"unknown gold label {g!r}")
            if p not in index:
                raise ValueError(f"unknown predicted label {p!r}")
            counts[index[g]][index[p]] += 1
        return cls(tuple(classes), tuple(tuple(row) for row in counts))

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.classes != other.classes:
            raise ValueError("cannot add confusion matrices with different class orders")
        counts = tuple(
            tuple(a + b for a, b in zip(ra, rb)) for ra, rb in zip(self.counts, other.counts)
        )
        return ConfusionMatrix(self.classes, counts)

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    tp: int
    fp: int
    fn: int
    tn: int
    undefined: tuple[str, ...] = ()


@dataclass(frozen=True)
class Averages:
    recall: float
    precision: float
    accuracy: float
    f1: float


def _ratio(num: int | float, den: int | float, name: str, undefined: list[str]) -> float:
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def per_class_metrics(cm: ConfusionMatrix) -> dict[str, ClassMetrics]:
    """One-vs-rest metrics for every class, in class order."""
    total = cm.total
    if total == 0:
        raise ValueError("empty confusion matrix")
    out: dict[str, ClassMetrics] = {}
    for i, name in enumerate(cm.classes):
        tp = cm.counts[i][i]
        fp = sum(cm.counts[g][i] for g in range(len(cm.classes))) - tp
        fn = sum(cm.counts[i]) - tp
        tn = total - tp - fp - fn
        undefined: list[str] = []
        precision = _ratio(tp, tp + fp, "precision", undefined)
        recall = _ratio(tp, tp + fn, "recall", undefined)
        f1 = _ratio(2 * precision * recall, precision + recall, "f1", undefined)
        accuracy = _ratio(tp + tn, total, "accuracy", undefined)
        out[name] = ClassMetrics(
            precision, recall, f1, accuracy, tp, fp, fn, tn, tuple(undefined)
        )
    return out


def macro_average(per_class: Mapping[str, ClassMetrics]) -> Averages:
    """Unweighted arithmetic mean over all classes, O included."""
    if not per_class:
        raise ValueError("no classes to average")
    n = len(per_class)
    rows = per_class.values()
    return Averages(
        recall=sum(m.recall for m in rows) / n,
        precision=sum(m.precision for m in rows) / n,
        accuracy=sum(m.accuracy for m in rows) / n,
        f1=sum(m.f1 for m in rows) / n,
    )


@dataclass(frozen=True)
class MicroAverages:
    precision: float
    recall: float
    f1: float
    note: str = "pooled over classes; dominated by the O class, read with care"


def micro_average(cm: ConfusionMatrix) -> MicroAverages:
    """Pooled TP/FP/FN across classes, then a single P/R/F1."""
    tp = sum(cm.counts[i][i] for i in range(len(cm.classes)))
    fp = cm.total - tp  # every off-diagonal token is a FP for some class
    fn = cm.total - tp  # ... and a FN for another
    undefined: list[str] = []
    precision = _ratio(tp, tp + fp, "precision", undefined)
    recall = _ratio(tp, tp + fn, "recall", undefined)
    f1 = _ratio(2 * precision * recall, precision + recall, "f1", undefined)
    return MicroAverages(precision, recall, f1)


# ---------------------------------------------------------------------------
# Entity-level exact match
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatchCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class EntityMatchReport:
    per_type: dict[EntityType, MatchCounts] = field(default_factory=dict)
    overall: MatchCounts = MatchCounts()

    def __add__(self, other: "EntityMatchReport") -> "EntityMatchReport":
        per_type = dict(self.per_type)
        for etype, counts in other.per_type.items():
            per_type[etype] = per_type.get(etype, MatchCounts()) + counts
        return EntityMatchReport(per_type, self.overall + other.overall)


def entity_exact_match(
    gold: Iterable[Sequence[CharSpan]], predicted: Iterable[Sequence[CharSpan]]
) -> EntityMatchReport:
    """Exact-match entity scoring over parallel per-sentence span lists.

    A predicted span is a true positive iff its (start, end, type) triple
    equals a gold span of the same sentence; every gold span can be matched
    at most once.
    """
    per_type: dict[EntityType, MatchCounts] = {}
    overall = MatchCounts()
    gold = list(gold)
    predicted = list(predicted)
    if len(gold) != len(predicted):
        raise ValueError(f"{len(gold)} gold sentences vs {len(predicted)} predicted")
    for g_spans, p_spans in zip(gold, predicted):
        g_multi = Counter((s.start, s.end, s.entity) for s in g_spans)
        p_multi = Counter((s.start, s.end, s.entity) for s in p_spans)
        for key in set(g_multi) | set(p_multi):
            etype = key[2]
            tp = min(g_multi[key], p_multi[key])
            fp = p_multi[key] - tp
            fn = g_multi[key] - tp
            delta = MatchCounts(tp, fp, fn)
            per_type[etype] = per_type.get(etype, MatchCounts()) + delta
            overall = overall + delta
    ordered = {e: per_type[e] for e in sorted(per_type, key=lambda e: e.value)}
    return EntityMatchReport(ordered, overall)
