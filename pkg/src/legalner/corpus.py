"""Annotated corpus model: entity types, character spans, sentences, documents.

All offsets are indices of Unicode code points into the owning sentence
text, end-exclusive. This holds for both Cyrillic and Latin script, which
is the reason offsets are never byte- or UTF-16-based.

A valid span starts and ends on a "solid" character: the first and last
characters may be neither whitespace nor punctuation. Whitespace and
punctuation are defined by Unicode general categories Z* and P* plus the
ASCII control whitespace (tab, form feed, ...), so the rule is
locale-independent and testable.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

from .errors import ParseError, ValidationError

SCRIPT_CYRILLIC = "cyr"
SCRIPT_LATIN = "lat"
_SCRIPTS = (SCRIPT_CYRILLIC, SCRIPT_LATIN)

_LINE_BREAKS = "\n\r\v\f  "


class EntityType(Enum):
    """The eight entity categories, in canonical (alphabetical) order.

    The member name doubles as the wire name in the annotation JSON format;
    the value is the human-readable form used in tag strings ("B-Court").
    """

    COURT = "Court"
    DATE = "Date"
    DECISION = "Decision"
    LAW = "Law"
    MONEY = "Money"
    OFFICIAL_GAZETTE = "OfficialGazette"
    PERSON = "Person"
    REFERENCE = "Reference"


#: Canonical ordering used everywhere counts are serialized.
ENTITY_ORDER: tuple[EntityType, ...] = tuple(EntityType)

#: Category names for count tables: the eight entity types plus the
#: outside class, dimension 9.
CATEGORY_NAMES: tuple[str, ...] = tuple(e.value for e in ENTITY_ORDER) + ("O",)


def is_trim_char(ch: str) -> bool:
    """True for characters a span may not start or end on."""
    cat = unicodedata.category(ch)
    return cat[0] in ("Z", "P") or ch.isspace()


@dataclass(frozen=True, order=True)
class CharSpan:
    """A half-open character range [start, end) carrying an entity type."""

    start: int
    end: int
    entity: EntityType = field(compare=False)

    def __post_init__(self) -> None:
        if self.start < 0:
            raise ValidationError(f"span start must be >= 0, got {self.start}")
        if self.end <= self.start:
            raise ValidationError(f"span end ({self.end}) must exceed start ({self.start})")

    def text_in(self, text: str) -> str:
        return text[self.start : self.end]


@dataclass(frozen=True)
class SpanViolation:
    """One broken span rule, diagnostic output of :func:`validate_spans`."""

    rule: str
    message: str


@dataclass(frozen=True)
class Sentence:
    """A single line of text with its (possibly invalid) entity spans.

    Construction only enforces what is cheap and text-independent; run
    :func:`validate_spans` for the full diagnostic.
    """

    text: str
    spans: tuple[CharSpan, ...] = ()

    def __post_init__(self) -> None:
        if any(ch in _LINE_BREAKS for ch in self.text):
            raise ValidationError("sentence text must not contain line breaks")
        if not isinstance(self.spans, tuple):
            object.__setattr__(self, "spans", tuple(self.spans))


@dataclass(frozen=True)
class Document:
    doc_id: str
    sentences: tuple[Sentence, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.sentences, tuple):
            object.__setattr__(self, "sentences", tuple(self.sentences))


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...] = ()
    script: str = SCRIPT_LATIN

    def __post_init__(self) -> None:
        if not isinstance(self.documents, tuple):
            object.__setattr__(self, "documents", tuple(self.documents))
        if self.script not in _SCRIPTS:
            raise ValidationError(f"unknown script {self.script!r}, expected one of {_SCRIPTS}")
        seen: set[str] = set()
        for doc in self.documents:
            if doc.doc_id in seen:
                raise ValidationError(f"duplicate document id {doc.doc_id!r}")
            seen.add(doc.doc_id)

    def sentences(self) -> Iterator[tuple[Document, int, Sentence]]:
        for doc in self.documents:
            for i, sent in enumerate(doc.sentences):
                yield doc, i, sent


def validate_spans(sentence: Sentence) -> list[SpanViolation]:
    """Check every span invariant against the sentence text.

    Returns an empty list iff all invariants hold; never raises. Each
    violation names the rule broken, so callers can report or filter.
    """
    violations: list[SpanViolation] = []
    text = sentence.text
    n = len(text)
    prev: CharSpan | None = None
    for span in sentence.spans:
        where = f"span ({span.start}, {span.end}, {span.entity.value})"
        if span.end > n:
            violations.append(
                SpanViolation("end exceeds length", f"{where}: end exceeds length {n}")
            )
            prev = span
            continue
        first, last = text[span.start], text[span.end - 1]
        if first.isspace():
            violations.append(SpanViolation("leading whitespace", f"{where} starts on whitespace"))
        elif is_trim_char(first):
            violations.append(SpanViolation("leading punctuation", f"{where} starts on punctuation"))
        if last.isspace():
            violations.append(SpanViolation("trailing whitespace", f"{where} ends on whitespace"))
        elif is_trim_char(last):
            violations.append(SpanViolation("trailing punctuation", f"{where} ends on punctuation"))
        if prev is not None:
            if span.start < prev.start:
                violations.append(SpanViolation("out of order", f"{where} precedes an earlier span"))
            elif span.start < prev.end:
                violations.append(
                    SpanViolation("overlap", f"{where} overlaps span ({prev.start}, {prev.end})")
                )
        prev = span
    return violations


def trim_span(text: str, start: int, end: int) -> tuple[int, int]:
    """Shrink [start, end) until it starts and ends on solid characters.

    May return an empty range (start >= end) when nothing solid remains.
    """
    while start < end and is_trim_char(text[start]):
        start += 1
    while end > start and is_trim_char(text[end - 1]):
        end -= 1
    return start, end


# ---------------------------------------------------------------------------
# Native annotation format (UTF-8 JSON)
# ---------------------------------------------------------------------------
#
# {"documents": [{"id": str, "script": "cyr"|"lat",
#                 "sentences": [{"text": str,
#                                "spans": [{"start": int, "end": int,
#                                           "type": "COURT"|...}]}]}]}
#
# Offsets are Unicode code point indices, end-exclusive. Span type names are
# the upper-snake EntityType member names. The ``script`` value must agree
# across all documents of one file.


def parse_annotations(data: bytes | str) -> Corpus:
    """Parse and fully validate a native-format annotation file.

    Malformed JSON raises :class:`ParseError` with line/column; a schema or
    invariant violation raises :class:`ValidationError` naming the document,
    sentence index and span concerned. Spans are sorted by offset on read.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc

    if not isinstance(payload, dict) or not isinstance(payload.get("documents"), list):
        raise ValidationError('top-level object must contain a "documents" list')

    documents: list[Document] = []
    script: str | None = None
    for d_idx, raw_doc in enumerate(payload["documents"]):
        doc_id = raw_doc.get("id")
        if not isinstance(doc_id, str) or not doc_id:
            raise ValidationError(f"document #{d_idx}: missing or empty id")
        doc_script = raw_doc.get("script")
        if doc_script not in _SCRIPTS:
            raise ValidationError(f"document {doc_id!r}: script must be one of {_SCRIPTS}")
        if script is None:
            script = doc_script
        elif script != doc_script:
            raise ValidationError(
                f"document {doc_id!r}: script {doc_script!r} disagrees with {script!r}"
            )
        sentences: list[Sentence] = []
        for s_idx, raw_sent in enumerate(raw_doc.get("sentences", [])):
            text = raw_sent.get("text")
            if not isinstance(text, str):
                raise ValidationError(f"document {doc_id!r} sentence {s_idx}: missing text")
            spans: list[CharSpan] = []
            for raw_span in raw_sent.get("spans", []):
                try:
                    entity = EntityType[raw_span["type"]]
                except KeyError as exc:
                    raise ValidationError(
                        f"document {doc_id!r} sentence {s_idx}: unknown span type "
                        f"{raw_span.get('type')!r}"
                    ) from exc
                try:
                    spans.append(CharSpan(int(raw_span["start"]), int(raw_span["end"]), entity))
                except (ValidationError, KeyError, TypeError, ValueError) as exc:
                    raise ValidationError(
                        f"document {doc_id!r} sentence {s_idx}: bad span {raw_span!r}: {exc}"
                    ) from exc
            spans.sort()
            try:
                sentence = Sentence(text, tuple(spans))
            except ValidationError as exc:
                raise ValidationError(f"document {doc_id!r} sentence {s_idx}: {exc}") from exc
            for violation in validate_spans(sentence):
                raise ValidationError(
                    f"document {doc_id!r} sentence {s_idx}: {violation.rule}: {violation.message}"
                )
            sentences.append(sentence)
        documents.append(Document(doc_id, tuple(sentences)))

    return Corpus(tuple(documents), script or SCRIPT_LATIN)


def serialize_annotations(corpus: Corpus) -> str:
    """Serialize a corpus back to the native format.

    ``parse_annotations(serialize_annotations(c)) == c`` for any valid corpus.
    """
    payload = {
        "documents": [
            {
                "id": doc.doc_id,
                "script": corpus.script,
                "sentences": [
                    {
                        "text": sent.text,
                        "spans": [
                            {"start": sp.start, "end": sp.end, "type": sp.entity.name}
                            for sp in sent.spans
                        ],
                    }
                    for sent in doc.sentences
                ],
            }
            for doc in corpus.documents
        ]
    }
    return json.dumps(payload, ensure_ascii=False, indent=2)


def filter_spanless(corpus: Corpus) -> Corpus:
    """Drop sentences without any span, then documents without any sentence."""
    documents = []
    for doc in corpus.documents:
        kept = tuple(s for s in doc.sentences if s.spans)
        if kept:
            documents.append(Document(doc.doc_id, kept))
    return Corpus(tuple(documents), corpus.script)


def corpus_to_text(corpus: Corpus) -> str:
    """Plain-text export, one sentence per line (annotation is dropped)."""
    return "\n".join(sent.text for _, _, sent in corpus.sentences())


def type_counts(corpus: Corpus) -> dict[EntityType, int]:
    """Number of span appearances per entity type, in canonical order."""
    counts = {e: 0 for e in ENTITY_ORDER}
    for _, _, sent in corpus.sentences():
        for span in sent.spans:
            counts[span.entity] += 1
    return counts
