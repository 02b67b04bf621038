"""Rule-based sentence segmentation for legal text.

A boundary is placed after a run of terminal punctuation (. ! ?) that is
followed by whitespace and then an uppercase letter or a digit, unless the
token ending in that punctuation is on the abbreviation guard list. Legal
Serbian is dense in abbreviations ("čl. 200 ZOO" must stay one sentence),
hence the guard list is part of the rule, and callers can extend it.

Line breaks in the input are always hard boundaries.
"""

from __future__ import annotations

import re
from typing import Iterable

DEFAULT_ABBREVIATIONS: tuple[str, ...] = ("čl.", "st.", "tač.", "br.", "god.")

_TERMINAL = re.compile(r"[.!?]+")
_LEADING_PUNCT = re.compile(r"^[^\w]+", re.UNICODE)


def split_sentences(
    text: str, abbreviations: Iterable[str] = DEFAULT_ABBREVIATIONS
) -> list[str]:
    """Split raw document text into sentence-candidate lines.

    Returns stripped, non-empty segments; empty input yields an empty list.
    """
    guards = {a.lower() for a in abbreviations}
    sentences: list[str] = []
    for block in re.split(r"[\n\r\v\f  ]+", text):
        sentences.extend(_split_block(block, guards))
    return sentences


def _split_block(block: str, guards: set[str]) -> list[str]:
    out: list[str] = []
    start = 0
    for m in _TERMINAL.finditer(block):
        end = m.end()
        if end >= len(block) or not block[end].isspace():
            continue
        j = end
        while j < len(block) and block[j].isspace():
            j += 1
        if j >= len(block) or not (block[j].isupper() or block[j].isdigit()):
            continue
        token = block[start:end].rsplit(None, 1)[-1] if block[start:end].strip() else ""
        token = _LEADING_PUNCT.sub("", token)
        if token.lower() in guards:
            continue
        segment = block[start:end].strip()
        if segment:
            out.append(segment)
        start = j
    tail = block[start:].strip()
    if tail:
        out.append(tail)
    return out
