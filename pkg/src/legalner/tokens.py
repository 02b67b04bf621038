"""Word-level pre-tokenization shared by the codec, the taggers and WordPiece.

Words are split on whitespace, and every punctuation character (Unicode
category P*) becomes a token of its own: "čl. 200" → [čl] [.] [200].
Gaps between consecutive tokens therefore contain only whitespace, which
downstream code relies on when reconstructing or merging spans.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def pretokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif _is_punct(ch):
            tokens.append(Token(ch, i, i + 1))
            i += 1
        else:
            j = i + 1
            while j < n and not text[j].isspace() and not _is_punct(text[j]):
                j += 1
            tokens.append(Token(text[i:j], i, j))
            i = j
    return tokens
