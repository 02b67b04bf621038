"""Seeded character-level noise injection and clean-vs-noisy evaluation.

Every character of a sentence is independently perturbed with the
configured probability; the possible operations are substitution,
deletion, insertion (after the character) and swapping with the following
character. Span offsets are recomputed so each span covers the perturbed
image of its original text, span ends are re-trimmed, and spans whose
content disappears are dropped with a logged warning.

Noise is deterministic: the random stream is derived from the spec seed
and the sentence text, so equal (sentence, spec) pairs give equal output
and sentences may be perturbed in parallel.
"""

from __future__ import annotations

import csv
import io
import logging
import random
from dataclasses import dataclass

from .corpus import CharSpan, Corpus, Document, Sentence, trim_span, validate_spans
from .metrics import entity_exact_match
from .seeds import derive_seed

log = logging.getLogger(__name__)

OPERATIONS = ("substitute", "delete", "insert", "swap")

#: Lowercase Serbian Latin alphabet, the default typo character pool.
SERBIAN_LOWER = "abcčćdđefghijklmnoprsštuvzž"


@dataclass(frozen=True)
class NoiseSpec:
    operations: tuple[str, ...] = OPERATIONS
    rate: float = 0.0
    charset: str = SERBIAN_LOWER
    seed: int = 0
    protect_entities: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"rate must be within [0, 1], got {self.rate}")
        unknown = set(self.operations) - set(OPERATIONS)
        if unknown:
            raise ValueError(f"unknown operations {sorted(unknown)}")
        if self.rate > 0 and not self.operations:
            raise ValueError("need at least one operation when rate > 0")
        if self.rate > 0 and not self.charset:
            raise ValueError("need a non-empty charset when rate > 0")

    @property
    def ops_label(self) -> str:
        return "+".join(self.operations)


def inject_noise(sentence: Sentence, spec: NoiseSpec) -> Sentence:
    """Perturb one sentence, keeping its spans consistent with the new text."""
    if spec.rate == 0.0:
        return sentence
    text = sentence.text
    n = len(text)
    rng = random.Random(derive_seed(spec.seed, text))

    protected = [False] * n
    if spec.protect_entities:
        for span in sentence.spans:
            for i in range(span.start, span.end):
                protected[i] = True

    out: list[str] = []
    # images[i] = [start, end) range the original character i occupies in the
    # output; deleted characters get an empty range.
    images: list[tuple[int, int]] = [(0, 0)] * n
    pos = 0
    i = 0
    while i < n:
        op = rng.choice(spec.operations) if rng.random() < spec.rate and not protected[i] else None
        if op == "delete":
            images[i] = (pos, pos)
            i += 1
        elif op == "substitute":
            out.append(rng.choice(spec.charset))
            images[i] = (pos, pos + 1)
            pos += 1
            i += 1
        elif op == "insert":
            out.append(text[i])
            out.append(rng.choice(spec.charset))
            images[i] = (pos, pos + 1)  # the inserted char belongs to no original char
            pos += 2
            i += 1
        elif op == "swap" and i + 1 < n and not protected[i + 1]:
            out.append(text[i + 1])
            out.append(text[i])
            images[i + 1] = (pos, pos + 1)
            images[i] = (pos + 1, pos + 2)
            pos += 2
            i += 2
        else:  # no-op (including swap at the last character)
            out.append(text[i])
            images[i] = (pos, pos + 1)
            pos += 1
            i += 1

    noisy_text = "".join(out)
    spans: list[CharSpan] = []
    last_end = 0
    for span in sentence.spans:
        surviving = [images[j] for j in range(span.start, span.end) if images[j][0] < images[j][1]]
        if not surviving:
            log.warning("noise removed span %r entirely; dropping it", span.text_in(text))
            continue
        start = min(a for a, _ in surviving)
        end = max(b for _, b in surviving)
        start, end = trim_span(noisy_text, start, end)
        if start >= end:
            log.warning("noise reduced span %r to nothing; dropping it", span.text_in(text))
            continue
        if start < last_end:
            log.warning("noise made span %r overlap its predecessor; dropping it",
                        span.text_in(text))
            continue
        spans.append(CharSpan(start, end, span.entity))
        last_end = end
    return Sentence(noisy_text, tuple(spans))


def inject_noise_corpus(corpus: Corpus, spec: NoiseSpec) -> Corpus:
    documents = tuple(
        Document(doc.doc_id, tuple(inject_noise(s, spec) for s in doc.sentences))
        for doc in corpus.documents
    )
    return Corpus(documents, corpus.script)


@dataclass(frozen=True)
class RobustnessRow:
    operations: str
    rate: float
    seed: int
    clean_f1: float
    noisy_f1: float

    @property
    def delta_f1(self) -> float:
        return self.noisy_f1 - self.clean_f1


def _overall_f1(tagger, corpus: Corpus) -> float:
    gold, pred = [], []
    for _, _, sent in corpus.sentences():
        gold.append(list(sent.spans))
        pred.append(tagger.predict(sent)[1])
    return entity_exact_match(gold, pred).overall.f1


def robustness_eval(tagger, corpus: Corpus, grid: list[NoiseSpec]) -> list[RobustnessRow]:
    """Entity exact-match F1 on the clean corpus and each noisy variant.

    The noisy gold standard is the perturbed annotation, so the score
    isolates the tagger's sensitivity to the perturbation itself.
    """
    clean_f1 = _overall_f1(tagger, corpus)
    rows = []
    for spec in grid:
        noisy = inject_noise_corpus(corpus, spec)
        for _, _, sent in noisy.sentences():
            bad = validate_spans(sent)
            assert not bad, f"noise produced an invalid span: {bad[0].message}"
        rows.append(
            RobustnessRow(spec.ops_label, spec.rate, spec.seed, clean_f1,
                          _overall_f1(tagger, noisy))
        )
    return rows


def robustness_csv(rows: list[RobustnessRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["operations", "rate", "seed", "clean_f1", "noisy_f1", "delta_f1"])
    for row in rows:
        writer.writerow(
            [row.operations, row.rate, row.seed,
             repr(row.clean_f1), repr(row.noisy_f1), repr(row.delta_f1)]
        )
    return buf.getvalue()
