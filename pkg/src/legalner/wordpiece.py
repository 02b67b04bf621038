"""WordPiece subword tokenization with character-offset tracking.

Words come from :func:`legalner.tokens.pretokenize`. Each word is matched
greedily, longest prefix first; the remainder must match pieces carrying
the continuation prefix ("##suda"). A word that cannot be fully covered
becomes one unknown token spanning the whole word, so tokenization never
fails.

Sequences longer than the vocabulary's maximum length are cut by
:func:`chunk_sequences`; a cut never lands inside an entity.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import CharSpan
from .errors import AlignmentError, CodecError, ValidationError
from .schemes import Label, TagScheme, _ranges_to_labels
from .tokens import pretokenize


@dataclass(frozen=True)
class Vocab:
    pieces: tuple[str, ...]
    continuation: str = "##"
    unk: str = "[UNK]"
    max_len: int = 512
    _index: frozenset[str] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.continuation:
            raise ValidationError("continuation prefix must be non-empty")
        if self.max_len < 2:
            raise ValidationError("max sequence length must be >= 2")
        if self.unk not in self.pieces:
            raise ValidationError(f"unknown token {self.unk!r} missing from vocabulary")
        object.__setattr__(self, "_index", frozenset(self.pieces))

    def __contains__(self, piece: str) -> bool:
        return piece in self._index

    def __len__(self) -> int:
        return len(self.pieces)

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "Vocab":
        """Load a plain-text vocabulary, one piece per line, line number = id."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(tuple(line for line in lines if line), **kwargs)

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.pieces) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class TokenizedSentence:
    """Subword pieces with source offsets and, optionally, aligned labels."""

    text: str
    pieces: tuple[str, ...]
    offsets: tuple[tuple[int, int], ...]
    labels: tuple[Label, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.pieces) != len(self.offsets):
            raise ValidationError("pieces and offsets must have equal length")
        if self.labels is not None and len(self.labels) != len(self.pieces):
            raise ValidationError("labels must be as long as pieces")

    def __len__(self) -> int:
        return len(self.pieces)


def wordpiece_tokenize(text: str, vocab: Vocab) -> TokenizedSentence:
    """Greedy longest-match-first tokenization, labels absent."""
    pieces: list[str] = []
    offsets: list[tuple[int, int]] = []
    for word in pretokenize(text):
        sub: list[tuple[str, int, int]] = []
        start = 0
        n = len(word.text)
        while start < n:
            end = n
            match = None
            while start < end:
                candidate = word.text[start:end]
                if start > 0:
                    candidate = vocab.continuation + candidate
                if candidate in vocab:
                    match = candidate
                    break
                end -= 1
            if match is None:
                sub = []
                break
            sub.append((match, word.start + start, word.start + end))
            start = end
        if sub:
            for piece, a, b in sub:
                pieces.append(piece)
                offsets.append((a, b))
        else:
            pieces.append(vocab.unk)
            offsets.append((word.start, word.end))
    return TokenizedSentence(text, tuple(pieces), tuple(offsets))


def align_labels(
    tokenized: TokenizedSentence, spans: Sequence[CharSpan], scheme: TagScheme
) -> TokenizedSentence:
    """Attach one label per piece, labeling every subword of an entity.

    Scheme tags are assigned over the entity's subword extent (an
    entity-initial word split in three gets B-X, I-X, I-X under BIO). A span
    boundary that falls strictly inside a piece cannot be expressed and
    raises AlignmentError; this covers unknown tokens, which span whole
    words.
    """
    ranges = []
    for span in sorted(spans):
        first = last = None
        for i, (a, b) in enumerate(tokenized.offsets):
            if a < span.end and span.start < b:  # piece intersects span
                if a < span.start or b > span.end:
                    raise AlignmentError(
                        f"span ({span.start}, {span.end}, {span.entity.value}) boundary "
                        f"falls inside piece {tokenized.pieces[i]!r} ({a}, {b})"
                    )
                if first is None:
                    first = i
                last = i
        if first is None:
            continue  # span covers no piece (nothing but whitespace); nothing to label
        ranges.append((first, last + 1, span.entity))
    labels = _ranges_to_labels(ranges, len(tokenized), scheme)
    return TokenizedSentence(tokenized.text, tokenized.pieces, tokenized.offsets, tuple(labels))


def chunk_sequences(tokenized: TokenizedSentence, vocab: Vocab) -> list[TokenizedSentence]:
    """Cut a sequence into pieces of at most ``vocab.max_len`` tokens.

    Cuts are only placed between entities (runs of same-type non-O labels
    are kept whole); with no labels, any position may be cut. Chunk
    concatenation reproduces the input.
    """
    n = len(tokenized)
    max_len = vocab.max_len
    if n <= max_len:
        return [tokenized]
    labels = tokenized.labels

    # run[i] identifies the entity run covering piece i (None outside
    # entities). A run breaks on O, on a type change, and on explicit
    # boundary marks (B/S opening, E/S closing), so the check works for
    # every scheme without knowing which one produced the labels.
    run: list[int | None] = [None] * n
    if labels is not None:
        current = -1
        for i, lab in enumerate(labels):
            if lab.entity is None:
                continue
            starts_new = (
                i == 0
                or labels[i - 1].entity is not lab.entity
                or lab.prefix in ("B", "S")
                or labels[i - 1].prefix in ("E", "S")
            )
            if starts_new:
                current = i
            run[i] = current

    def legal_cut(pos: int) -> bool:
        # A cut between pos-1 and pos must not bisect an entity run.
        return run[pos - 1] is None or run[pos] is None or run[pos - 1] != run[pos]

    chunks: list[TokenizedSentence] = []
    start = 0
    while start < n:
        if n - start <= max_len:
            cut = n
        else:
            cut = start + max_len
            while cut > start and not legal_cut(cut):
                cut -= 1
            if cut == start:
                raise CodecError(
                    f"entity spanning piece {start} is longer than the maximum "
                    f"sequence length {max_len} and cannot be split"
                )
        chunks.append(
            TokenizedSentence(
                tokenized.text,
                tokenized.pieces[start:cut],
                tokenized.offsets[start:cut],
                None if labels is None else labels[start:cut],
            )
        )
        start = cut
    return chunks


def build_vocab(
    texts: Iterable[str],
    max_words: int = 200,
    continuation: str = "##",
    unk: str = "[UNK]",
    max_len: int = 512,
) -> Vocab:
    """Frequency-based vocabulary for synthetic tests and demos.

    All single characters (and their continuation forms) are always
    included, so every word tokenizes without falling back to the unknown
    token; the ``max_words`` most frequent full words are added on top.
    """
    counts: Counter[str] = Counter()
    chars: set[str] = set()
    for text in texts:
        for word in pretokenize(text):
            counts[word.text] += 1
            chars.update(word.text)
    pieces: list[str] = [unk]
    pieces.extend(sorted(chars))
    pieces.extend(continuation + c for c in sorted(chars))
    for word, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:max_words]:
        if word not in chars:
            pieces.append(word)
    return Vocab(tuple(dict.fromkeys(pieces)), continuation, unk, max_len)
