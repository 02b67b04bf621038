"""Serbian Cyrillic to Latin transliteration.

The mapping is the standard digraph-aware table (Љ→Lj, Њ→Nj, Џ→Dž).
Characters outside the Serbian Cyrillic alphabet pass through unchanged,
so the function is total and idempotent on its own output.

Because Љ/Њ/Џ expand to two Latin letters, transliterating an annotated
sentence must remap its span offsets; :func:`transliterate_sentence` and
:func:`transliterate_corpus` do that bookkeeping.
"""

from __future__ import annotations

from .corpus import Corpus, CharSpan, Document, SCRIPT_LATIN, Sentence

_SIMPLE = {
    "А": "A", "Б": "B", "В": "V", "Г": "G", "Д": "D", "Ђ": "Đ", "Е": "E",
    "Ж": "Ž", "З": "Z", "И": "I", "Ј": "J", "К": "K", "Л": "L", "М": "M",
    "Н": "N", "О": "O", "П": "P", "Р": "R", "С": "S", "Т": "T", "Ћ": "Ć",
    "У": "U", "Ф": "F", "Х": "H", "Ц": "C", "Ч": "Č", "Ш": "Š",
    "а": "a", "б": "b", "в": "v", "г": "g", "д": "d", "ђ": "đ", "е": "e",
    "ж": "ž", "з": "z", "и": "i", "ј": "j", "к": "k", "л": "l", "м": "m",
    "н": "n", "о": "o", "п": "p", "р": "r", "с": "s", "т": "t", "ћ": "ć",
    "у": "u", "ф": "f", "х": "h", "ц": "c", "ч": "č", "ш": "š",
}

_DIGRAPH_LOWER = {"љ": "lj", "њ": "nj", "џ": "dž"}
# Uppercase digraphs are context dependent: "Lj" at word start within
# mixed-case text, "LJ" inside an all-caps word.
_DIGRAPH_TITLE = {"Љ": "Lj", "Њ": "Nj", "Џ": "Dž"}
_DIGRAPH_UPPER = {"Љ": "LJ", "Њ": "NJ", "Џ": "DŽ"}


def _upper_context(text: str, i: int) -> bool:
    """Decide the casing of an uppercase digraph at position ``i``.

    The following letter wins; with no following letter the preceding one
    decides, so a trailing digraph in an all-caps word stays all-caps.
    """
    for ch in text[i + 1 :]:
        if ch.isalpha():
            return ch.isupper()
    for ch in reversed(text[:i]):
        if ch.isalpha():
            return ch.isupper()
    return False


def _expand(text: str) -> list[str]:
    """Per-character transliteration images, in input order."""
    out: list[str] = []
    for i, ch in enumerate(text):
        if ch in _SIMPLE:
            out.append(_SIMPLE[ch])
        elif ch in _DIGRAPH_LOWER:
            out.append(_DIGRAPH_LOWER[ch])
        elif ch in _DIGRAPH_TITLE:
            table = _DIGRAPH_UPPER if _upper_context(text, i) else _DIGRAPH_TITLE
            out.append(table[ch])
        else:
            out.append(ch)
    return out


def transliterate(text: str) -> str:
    """Transliterate Serbian Cyrillic to Latin; other characters untouched."""
    return "".join(_expand(text))


def transliterate_sentence(sentence: Sentence) -> Sentence:
    """Transliterate the text and remap all span offsets through the expansion."""
    images = _expand(sentence.text)
    # starts[i] = output offset where the image of input char i begins
    starts = [0] * (len(images) + 1)
    for i, img in enumerate(images):
        starts[i + 1] = starts[i] + len(img)
    spans = tuple(
        CharSpan(starts[sp.start], starts[sp.end], sp.entity) for sp in sentence.spans
    )
    return Sentence("".join(images), spans)


def transliterate_corpus(corpus: Corpus) -> Corpus:
    documents = tuple(
        Document(doc.doc_id, tuple(transliterate_sentence(s) for s in doc.sentences))
        for doc in corpus.documents
    )
    return Corpus(documents, SCRIPT_LATIN)
