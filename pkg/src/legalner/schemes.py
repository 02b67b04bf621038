"""Tagging scheme codec: character spans to per-token tags and back.

Six schemes are supported. All of them tag non-entity tokens O; they
differ in how entity-boundary information is written onto entity tokens:

=======  ==============================================================
IO       every entity token is I-X. No boundary marks, so adjacent
         same-type entities merge on decode.
BIO      first entity token B-X, the rest I-X (single-token entity: B-X).
IOE      last entity token E-X, the rest I-X (single-token entity: E-X).
IOBES    B-X ... I-X ... E-X; single-token entity S-X.
IE       like IO, but the last token of an entity is marked E-X when the
         very next token starts another entity of the same type; the mark
         exists exactly where IO would lose a boundary.
BIES     like IO, but both sides of such a junction are marked: the left
         entity ends E-X (or S-X when it is a single token that also has a
         junction on its left), the right one starts B-X (or S-X).
=======  ==============================================================

IE and BIES are the minimal-marking duals of IOE and IOBES: marks appear
only where needed to keep adjacent same-type entities separable, which is
what makes all schemes except IO lossless.

Decoding is strict or repairing. Repair follows the common convention:
an I-X that cannot continue an open entity simply opens a new one, and an
entity missing its closing mark is closed at the last possible token.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .corpus import CharSpan, Corpus, ENTITY_ORDER, EntityType
from .errors import AlignmentError, CodecError
from .tokens import Token, pretokenize


class TagScheme(Enum):
    IO = "IO"
    BIO = "BIO"
    IOE = "IOE"
    IOBES = "IOBES"
    IE = "IE"
    BIES = "BIES"


SCHEME_PREFIXES: dict[TagScheme, frozenset[str]] = {
    TagScheme.IO: frozenset("IO"),
    TagScheme.BIO: frozenset("BIO"),
    TagScheme.IOE: frozenset("IOE"),
    TagScheme.IOBES: frozenset("BIOES"),
    TagScheme.IE: frozenset("IEO"),
    TagScheme.BIES: frozenset("BIESO"),
}

_PREFIX_RANK = {"B": 0, "I": 1, "E": 2, "S": 3}
_ENTITY_RANK = {e: i for i, e in enumerate(ENTITY_ORDER)}
_ENTITY_BY_VALUE = {e.value: e for e in EntityType}


@dataclass(frozen=True)
class Label:
    """A scheme-qualified token tag: prefix O has no entity, all others must."""

    prefix: str
    entity: EntityType | None = None

    def __post_init__(self) -> None:
        if self.prefix not in "BIESO":
            raise CodecError(f"unknown tag prefix {self.prefix!r}")
        if (self.prefix == "O") != (self.entity is None):
            raise CodecError("prefix O if and only if no entity type")

    def __str__(self) -> str:
        if self.entity is None:
            return "O"
        return f"{self.prefix}-{self.entity.value}"


O = Label("O")


def parse_label(text: str) -> Label:
    if text == "O":
        return O
    prefix, _, value = text.partition("-")
    if value not in _ENTITY_BY_VALUE:
        raise CodecError(f"unknown entity type in label {text!r}")
    return Label(prefix, _ENTITY_BY_VALUE[value])


def label_sort_key(label: Label) -> tuple:
    """Canonical order: O first, then by prefix (B, I, E, S), then entity."""
    if label.entity is None:
        return (0,)
    return (1, _PREFIX_RANK[label.prefix], _ENTITY_RANK[label.entity])


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------


def _span_token_ranges(
    tokens: Sequence[Token], spans: Sequence[CharSpan]
) -> list[tuple[int, int, EntityType]]:
    """Map char spans to [first, last) token index ranges.

    Every span boundary must coincide with a token boundary, otherwise the
    span cannot be expressed as token tags and an AlignmentError is raised.
    """
    start_at = {t.start: i for i, t in enumerate(tokens)}
    end_at = {t.end: i for i, t in enumerate(tokens)}
    ranges: list[tuple[int, int, EntityType]] = []
    for span in spans:
        if span.start not in start_at or span.end not in end_at:
            inside = next(
                (t for t in tokens if t.start < span.start < t.end or t.start < span.end < t.end),
                None,
            )
            where = f" inside token {inside.text!r} ({inside.start}, {inside.end})" if inside else ""
            raise AlignmentError(
                f"span ({span.start}, {span.end}, {span.entity.value}) boundary "
                f"does not coincide with a token boundary{where}"
            )
        ranges.append((start_at[span.start], end_at[span.end] + 1, span.entity))
    ranges.sort()
    for (_, b, _), (a2, _, _) in zip(ranges, ranges[1:]):
        if a2 < b:
            raise CodecError("overlapping spans cannot be encoded as token tags")
    return ranges


def _ranges_to_labels(
    ranges: Sequence[tuple[int, int, EntityType]], n: int, scheme: TagScheme
) -> list[Label]:
    labels = [O] * n
    for k, (a, b, etype) in enumerate(ranges):
        left_adj = k > 0 and ranges[k - 1][1] == a and ranges[k - 1][2] == etype
        right_adj = k + 1 < len(ranges) and ranges[k + 1][0] == b and ranges[k + 1][2] == etype
        for i in range(a, b):
            labels[i] = Label("I", etype)
        if scheme is TagScheme.BIO:
            labels[a] = Label("B", etype)
        elif scheme is TagScheme.IOE:
            labels[b - 1] = Label("E", etype)
        elif scheme is TagScheme.IOBES:
            if b - a == 1:
                labels[a] = Label("S", etype)
            else:
                labels[a] = Label("B", etype)
                labels[b - 1] = Label("E", etype)
        elif scheme is TagScheme.IE:
            if right_adj:
                labels[b - 1] = Label("E", etype)
        elif scheme is TagScheme.BIES:
            if b - a == 1:
                if left_adj and right_adj:
                    labels[a] = Label("S", etype)
                elif left_adj:
                    labels[a] = Label("B", etype)
                elif right_adj:
                    labels[a] = Label("E", etype)
            else:
                if left_adj:
                    labels[a] = Label("B", etype)
                if right_adj:
                    labels[b - 1] = Label("E", etype)
        # IO: nothing beyond the I fill
    return labels


def encode_labels(
    tokens: Sequence[Token], spans: Sequence[CharSpan], scheme: TagScheme
) -> list[Label]:
    """One label per token; spans must align with token boundaries."""
    return _ranges_to_labels(_span_token_ranges(tokens, spans), len(tokens), scheme)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


def _segments(
    labels: Sequence[Label],
    scheme: TagScheme,
    strict: bool,
    adjacency: Sequence[bool] | None = None,
) -> list[tuple[int, int, EntityType]]:
    """Token-index entity segments of a label sequence.

    ``adjacency[i]`` says whether tokens i and i+1 are separated by
    whitespace only; it is consulted by IO, the only scheme whose decoding
    depends on it. ``None`` means all-adjacent.
    """
    allowed = SCHEME_PREFIXES[scheme]
    for i, lab in enumerate(labels):
        if lab.prefix not in allowed:
            raise CodecError(f"prefix {lab.prefix!r} not allowed in scheme {scheme.value} (token {i})")

    def fail(msg: str) -> None:
        if strict:
            raise CodecError(msg)

    segments: list[tuple[int, int, EntityType]] = []
    open_start: int | None = None
    open_type: EntityType | None = None

    def close(end: int) -> None:
        nonlocal open_start, open_type
        if open_start is not None:
            assert open_type is not None
            segments.append((open_start, end, open_type))
        open_start, open_type = None, None

    def is_open() -> bool:
        return open_start is not None

    n = len(labels)
    for i, lab in enumerate(labels):
        p, e = lab.prefix, lab.entity
        if p == "O":
            if is_open() and scheme in (TagScheme.IOE, TagScheme.IOBES):
                fail(f"entity not terminated by E- tag before token {i}")
            close(i)
            continue
        assert e is not None
        if scheme is TagScheme.IO:
            contiguous = is_open() and open_type is e and (adjacency is None or adjacency[i - 1])
            if not contiguous:
                close(i)
                open_start, open_type = i, e
        elif scheme is TagScheme.BIO:
            if p == "B":
                close(i)
                open_start, open_type = i, e
            else:  # I
                if not (is_open() and open_type is e):
                    fail(f"orphan I- tag at token {i}")
                    close(i)
                    open_start, open_type = i, e
        elif scheme is TagScheme.IOE:
            if is_open() and open_type is not e:
                fail(f"entity not terminated by E- tag before token {i}")
                close(i)
            if p == "I":
                if not is_open():
                    open_start, open_type = i, e
            else:  # E
                if not is_open():
                    open_start, open_type = i, e
                close(i + 1)
        elif scheme is TagScheme.IOBES:
            if p == "B":
                if is_open():
                    fail(f"unterminated entity before B- tag at token {i}")
                close(i)
                open_start, open_type = i, e
            elif p == "I":
                if not (is_open() and open_type is e):
                    fail(f"orphan I- tag at token {i}")
                    close(i)
                    open_start, open_type = i, e
            elif p == "E":
                if not (is_open() and open_type is e):
                    fail(f"orphan E- tag at token {i}")
                    close(i)
                    open_start, open_type = i, e
                close(i + 1)
            else:  # S
                if is_open():
                    fail(f"unterminated entity before S- tag at token {i}")
                close(i)
                open_start, open_type = i, e
                close(i + 1)
        elif scheme is TagScheme.IE:
            if is_open() and open_type is not e:
                close(i)
            if p == "E":
                nxt = labels[i + 1] if i + 1 < n else None
                if nxt is None or nxt.entity is not e:
                    fail(f"E- tag not followed by a same-type entity at token {i}")
                if not is_open():
                    open_start, open_type = i, e
                close(i + 1)
            else:  # I
                if not is_open():
                    open_start, open_type = i, e
        elif scheme is TagScheme.BIES:
            if is_open() and open_type is not e:
                close(i)
            prev = labels[i - 1] if i > 0 else None
            nxt = labels[i + 1] if i + 1 < n else None
            left_mark = prev is not None and prev.entity is e and prev.prefix in ("E", "S")
            right_entity = nxt is not None and nxt.entity is e
            if p == "B":
                if not left_mark:
                    fail(f"B- tag without a preceding same-type junction at token {i}")
                close(i)
                open_start, open_type = i, e
            elif p == "S":
                if not left_mark or not right_entity:
                    fail(f"S- tag without junctions on both sides at token {i}")
                close(i)
                open_start, open_type = i, e
                close(i + 1)
            elif p == "E":
                if not right_entity:
                    fail(f"E- tag not followed by a same-type entity at token {i}")
                if not is_open():
                    open_start, open_type = i, e
                close(i + 1)
            else:  # I
                if not is_open():
                    open_start, open_type = i, e
    if is_open():
        if scheme in (TagScheme.IOE, TagScheme.IOBES):
            fail("entity not terminated by E- tag at end of sequence")
        close(n)
    return segments


def decode_labels(
    labels: Sequence[Label],
    tokens: Sequence[Token],
    scheme: TagScheme,
    strict: bool = False,
    text: str | None = None,
) -> list[CharSpan]:
    """Maximal well-formed entity segments as character spans.

    Under IO, runs of same-type tokens merge into one span only while the
    tokens are separated by whitespace alone; pass ``text`` to let the
    decoder check the actual gap content (without it gaps are assumed
    whitespace, which is what :func:`legalner.tokens.pretokenize` produces).
    """
    if len(labels) != len(tokens):
        raise CodecError(f"{len(labels)} labels for {len(tokens)} tokens")
    adjacency = None
    if text is not None and scheme is TagScheme.IO:
        adjacency = [
            text[tokens[i].end : tokens[i + 1].start].strip() == ""
            for i in range(len(tokens) - 1)
        ]
    return [
        CharSpan(tokens[a].start, tokens[b - 1].end, etype)
        for a, b, etype in _segments(labels, scheme, strict, adjacency)
    ]


def convert_scheme(
    labels: Sequence[Label], source: TagScheme, target: TagScheme, strict: bool = True
) -> list[Label]:
    """Re-express a tag sequence in another scheme, via entity segments."""
    return _ranges_to_labels(_segments(labels, source, strict), len(labels), target)


def validate_labels(labels: Sequence[Label], scheme: TagScheme) -> list[str]:
    """Standalone grammar check; empty list iff the sequence is well-formed."""
    try:
        _segments(labels, scheme, strict=True)
    except CodecError as exc:
        return [str(exc)]
    return []


# ---------------------------------------------------------------------------
# Transition grammar, used by Viterbi decoding in the taggers
# ---------------------------------------------------------------------------


def allowed_start(label: Label, scheme: TagScheme) -> bool:
    p = label.prefix
    if p not in SCHEME_PREFIXES[scheme]:
        return False
    if scheme in (TagScheme.BIO, TagScheme.IOBES):
        return p in "OBS"
    if scheme is TagScheme.BIES:
        return p in "OIE"  # B/S need a junction on their left
    return True


def allowed_end(label: Label, scheme: TagScheme) -> bool:
    p = label.prefix
    if p not in SCHEME_PREFIXES[scheme]:
        return False
    if scheme in (TagScheme.IOE, TagScheme.IOBES):
        return p in "OES"
    if scheme is TagScheme.IE:
        return p in "OI"
    if scheme is TagScheme.BIES:
        return p in "OIB"  # E/S promise a same-type follower
    return True


def allowed_transition(prev: Label, cur: Label, scheme: TagScheme) -> bool:
    if cur.prefix not in SCHEME_PREFIXES[scheme] or prev.prefix not in SCHEME_PREFIXES[scheme]:
        return False
    p, c = prev, cur
    if scheme is TagScheme.IO:
        return True
    if scheme is TagScheme.BIO:
        if c.prefix == "I":
            return p.prefix in "BI" and p.entity is c.entity
        return True
    if scheme is TagScheme.IOE:
        if p.prefix == "I":
            return c.prefix in "IE" and c.entity is p.entity
        return True
    if scheme is TagScheme.IOBES:
        if p.prefix in "BI":
            return c.prefix in "IE" and c.entity is p.entity
        return c.prefix in "OBS"
    if scheme is TagScheme.IE:
        if p.prefix == "E":
            return c.prefix in "IE" and c.entity is p.entity
        return c.prefix in "OIE"
    if scheme is TagScheme.BIES:
        if p.prefix in "ES":
            return c.prefix in "BS" and c.entity is p.entity
        return c.prefix in "OIE"
    raise CodecError(f"unknown scheme {scheme!r}")


# ---------------------------------------------------------------------------
# Corpus helpers and CoNLL-style export
# ---------------------------------------------------------------------------


def label_inventory(corpus: Corpus, scheme: TagScheme) -> list[Label]:
    """Distinct labels the corpus produces under a scheme, canonically ordered.

    O is always part of the inventory.
    """
    seen: set[Label] = {O}
    for _, _, sent in corpus.sentences():
        seen.update(encode_labels(pretokenize(sent.text), sent.spans, scheme))
    return sorted(seen, key=label_sort_key)


def sentence_to_conll(
    tokens: Sequence[Token], labels: Sequence[Label]
) -> list[str]:
    """TSV lines: surface form, char start, char end, label."""
    if len(tokens) != len(labels):
        raise CodecError(f"{len(labels)} labels for {len(tokens)} tokens")
    return [f"{t.text}\t{t.start}\t{t.end}\t{lab}" for t, lab in zip(tokens, labels)]


def corpus_to_conll(corpus: Corpus, scheme: TagScheme) -> str:
    """CoNLL-style export of the whole corpus, blank line between sentences."""
    blocks: list[str] = []
    for _, _, sent in corpus.sentences():
        tokens = pretokenize(sent.text)
        labels = encode_labels(tokens, sent.spans, scheme)
        blocks.append("\n".join(sentence_to_conll(tokens, labels)))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def gold_labels(sentence_text: str, spans: Iterable[CharSpan], scheme: TagScheme) -> list[Label]:
    """Convenience: pretokenize and encode in one step."""
    return encode_labels(pretokenize(sentence_text), tuple(spans), scheme)
