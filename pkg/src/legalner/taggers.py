"""Pluggable sequence taggers.

Two built-in baselines (a gazetteer with longest-match prediction and an
averaged structured perceptron with Viterbi decoding), a gold-echoing
oracle for harness checks, and an adapter that talks to an external
tagger process over newline-delimited JSON, so heavyweight models can
join the same evaluation loop without being a dependency.

All trained models are immutable; prediction is safe to run concurrently.
Ties are always broken by canonical label order, which keeps every tagger
deterministic.
"""

from __future__ import annotations

import json
import queue
import random
import subprocess
import threading
from pathlib import Path
from typing import Protocol, Sequence

from .corpus import CharSpan, EntityType, Sentence
from .errors import AdapterError, ModelIOError
from .schemes import (
    Label,
    O,
    TagScheme,
    _ranges_to_labels,
    allowed_end,
    allowed_start,
    allowed_transition,
    decode_labels,
    encode_labels,
    label_sort_key,
    parse_label,
)
from .tokens import Token, pretokenize

MODEL_FORMAT = "legalner-model"
MODEL_VERSION = 1


class Tagger(Protocol):
    kind: str
    scheme: TagScheme
    labels: tuple[Label, ...]

    def predict(self, sentence: Sentence) -> tuple[list[Label], list[CharSpan]]: ...

    def to_params(self) -> dict: ...


def _inventory_from_sentences(
    sentences: Sequence[Sentence], scheme: TagScheme
) -> tuple[Label, ...]:
    seen: set[Label] = {O}
    for sent in sentences:
        seen.update(encode_labels(pretokenize(sent.text), sent.spans, scheme))
    return tuple(sorted(seen, key=label_sort_key))


# ---------------------------------------------------------------------------
# Gazetteer
# ---------------------------------------------------------------------------


class DictionaryTagger:
    """Maps every memorized entity surface string to its majority type.

    Prediction scans left to right and takes the longest known surface
    starting at each position, provided the match does not cut into a
    word (the neighbouring characters must not be alphanumeric). Matches
    never overlap.
    """

    kind = "dictionary"

    def __init__(self, surfaces: dict[str, EntityType], scheme: TagScheme,
                 labels: tuple[Label, ...]):
        self.surfaces = dict(surfaces)
        self.scheme = scheme
        self.labels = labels
        self._by_first: dict[str, list[tuple[str, EntityType]]] = {}
        for surface, etype in self.surfaces.items():
            self._by_first.setdefault(surface[0], []).append((surface, etype))
        for bucket in self._by_first.values():
            bucket.sort(key=lambda item: (-len(item[0]), item[0]))

    def predict(self, sentence: Sentence) -> tuple[list[Label], list[CharSpan]]:
        text = sentence.text
        n = len(text)
        spans: list[CharSpan] = []
        i = 0
        while i < n:
            hit = None
            for surface, etype in self._by_first.get(text[i], ()):
                end = i + len(surface)
                if not text.startswith(surface, i):
                    continue
                if i > 0 and text[i - 1].isalnum():
                    continue
                if end < n and text[end].isalnum():
                    continue
                hit = CharSpan(i, end, etype)
                break
            if hit is not None:
                spans.append(hit)
                i = hit.end
            else:
                i += 1
        labels = encode_labels(pretokenize(text), spans, self.scheme)
        return labels, spans

    def to_params(self) -> dict:
        return {"surfaces": {s: e.name for s, e in sorted(self.surfaces.items())}}

    @classmethod
    def from_params(cls, params: dict, scheme: TagScheme,
                    labels: tuple[Label, ...]) -> "DictionaryTagger":
        surfaces = {s: EntityType[name] for s, name in params["surfaces"].items()}
        return cls(surfaces, scheme, labels)


def train_dictionary(
    sentences: Sequence[Sentence], scheme: TagScheme = TagScheme.BIO
) -> DictionaryTagger:
    """Collect gold entity surfaces; ambiguous surfaces get their majority type."""
    if not sentences:
        raise ValueError("empty training set")
    votes: dict[str, dict[EntityType, int]] = {}
    for sent in sentences:
        for span in sent.spans:
            surface = span.text_in(sent.text)
            votes.setdefault(surface, {}).setdefault(span.entity, 0)
            votes[surface][span.entity] += 1
    surfaces = {
        # ties break toward the canonical (alphabetical) entity order
        surface: min(counts, key=lambda e: (-counts[e], e.value))
        for surface, counts in votes.items()
    }
    return DictionaryTagger(surfaces, scheme, _inventory_from_sentences(sentences, scheme))


# ---------------------------------------------------------------------------
# Averaged structured perceptron
# ---------------------------------------------------------------------------


def word_shape(word: str) -> str:
    """Collapsed character-class sketch: "Apelacioni" -> "Xx", "123/45" -> "d/d"."""
    out: list[str] = []
    for ch in word:
        cls = "X" if ch.isupper() else "x" if ch.islower() else "d" if ch.isdigit() else ch
        if not out or out[-1] != cls:
            out.append(cls)
    return "".join(out)


def token_features(tokens: Sequence[Token], i: int) -> list[str]:
    word = tokens[i].text
    feats = [f"w={word.lower()}", f"shape={word_shape(word)}"]
    if len(word) >= 2:
        feats.append(f"p2={word[:2].lower()}")
        feats.append(f"s2={word[-2:].lower()}")
    if len(word) >= 3:
        feats.append(f"p3={word[:3].lower()}")
        feats.append(f"s3={word[-3:].lower()}")
    if word.isdigit():
        feats.append("isdigit")
    if word[0].isupper():
        feats.append("iscap")
    return feats


START = "<s>"

Weights = dict[str, dict[str, float]]  # feature -> label -> weight


def _emission_matrix(
    feats_per_token: Sequence[Sequence[str]],
    feature_weights: Weights,
    label_index: dict[str, int],
    n_labels: int,
) -> list[list[float]]:
    scores = [[0.0] * n_labels for _ in feats_per_token]
    for row, feats in zip(scores, feats_per_token):
        for feat in feats:
            per_label = feature_weights.get(feat)
            if per_label:
                for label, weight in per_label.items():
                    row[label_index[label]] += weight
    return scores


def _viterbi(
    label_strs: Sequence[str],
    start_ok: Sequence[bool],
    end_ok: Sequence[bool],
    trans_ok: Sequence[Sequence[bool]],
    emissions: Sequence[Sequence[float]],
    transition_weights: Weights,
) -> list[str]:
    """Best grammar-legal path; ties break toward the lowest label index."""
    n = len(emissions)
    if n == 0:
        return []
    k = len(label_strs)
    NEG = float("-inf")

    def trans(prev: str, label: str) -> float:
        per_label = transition_weights.get(prev)
        return per_label.get(label, 0.0) if per_label else 0.0

    score = [
        emissions[0][j] + trans(START, label_strs[j]) if start_ok[j] else NEG
        for j in range(k)
    ]
    back: list[list[int]] = []
    for t in range(1, n):
        nxt = [NEG] * k
        ptr = [0] * k
        for j in range(k):
            best, arg = NEG, 0
            for i in range(k):
                if score[i] == NEG or not trans_ok[i][j]:
                    continue
                cand = score[i] + trans(label_strs[i], label_strs[j])
                if cand > best:
                    best, arg = cand, i
            if best != NEG:
                nxt[j] = best + emissions[t][j]
                ptr[j] = arg
        score = nxt
        back.append(ptr)
    best, arg = NEG, 0
    for j in range(k):
        if score[j] != NEG and end_ok[j] and score[j] > best:
            best, arg = score[j], j
    path = [arg]
    for ptr in reversed(back):
        path.append(ptr[path[-1]])
    path.reverse()
    return [label_strs[j] for j in path]


class PerceptronTagger:
    """Averaged structured perceptron with grammar-constrained Viterbi decoding.

    Emission weights live in ``feature_weights[feature][label]``; the
    previous-label dependency is the transition table
    ``transition_weights[prev][label]`` with the pseudo-label "<s>" for the
    sequence start. Decoding never takes a transition the scheme grammar
    forbids, so predictions always validate.
    """

    kind = "linear"

    def __init__(
        self,
        feature_weights: Weights,
        transition_weights: Weights,
        scheme: TagScheme,
        labels: tuple[Label, ...],
    ):
        self.feature_weights = feature_weights
        self.transition_weights = transition_weights
        self.scheme = scheme
        self.labels = labels
        self._label_strs = [str(lab) for lab in labels]
        self._label_index = {s: i for i, s in enumerate(self._label_strs)}
        self._start_ok = [allowed_start(lab, scheme) for lab in labels]
        self._end_ok = [allowed_end(lab, scheme) for lab in labels]
        self._trans_ok = [
            [allowed_transition(a, b, scheme) for b in labels] for a in labels
        ]

    def tag(self, feats_per_token: Sequence[Sequence[str]]) -> list[str]:
        emissions = _emission_matrix(
            feats_per_token, self.feature_weights, self._label_index, len(self.labels)
        )
        return _viterbi(
            self._label_strs, self._start_ok, self._end_ok, self._trans_ok,
            emissions, self.transition_weights,
        )

    def predict(self, sentence: Sentence) -> tuple[list[Label], list[CharSpan]]:
        tokens = pretokenize(sentence.text)
        feats = [token_features(tokens, i) for i in range(len(tokens))]
        by_str = {s: lab for s, lab in zip(self._label_strs, self.labels)}
        labels = [by_str[s] for s in self.tag(feats)]
        return labels, decode_labels(labels, tokens, self.scheme)

    def to_params(self) -> dict:
        return {
            "feature_weights": self.feature_weights,
            "transition_weights": self.transition_weights,
        }

    @classmethod
    def from_params(cls, params: dict, scheme: TagScheme,
                    labels: tuple[Label, ...]) -> "PerceptronTagger":
        return cls(params["feature_weights"], params["transition_weights"], scheme, labels)


class _AveragedWeights:
    """Nested sparse weights plus the bookkeeping for exact averaging.

    ``average(t)`` is the mean of the weight vectors as they stood after
    each of the ``t`` training steps, maintained lazily per key.
    """

    def __init__(self) -> None:
        self.current: Weights = {}
        self._sums: dict[tuple[str, str], float] = {}
        self._stamp: dict[tuple[str, str], int] = {}

    def add(self, first: str, second: str, delta: float, step: int) -> None:
        # A value set at step t is part of snapshots t .. t'-1 when the next
        # update comes at t' (snapshots are taken after each step's updates).
        key = (first, second)
        row = self.current.setdefault(first, {})
        value = row.get(second, 0.0)
        self._sums[key] = self._sums.get(key, 0.0) + value * (step - self._stamp.get(key, 0))
        self._stamp[key] = step
        row[second] = value + delta

    def average(self, total_steps: int) -> Weights:
        nested: Weights = {}
        for first in sorted(self.current):
            for second in sorted(self.current[first]):
                key = (first, second)
                # the live value covers snapshots stamp .. total_steps inclusive
                acc = self._sums.get(key, 0.0) + self.current[first][second] * (
                    total_steps - self._stamp.get(key, 0) + 1
                )
                if acc != 0.0:
                    nested.setdefault(first, {})[second] = acc / total_steps
        return nested


def train_linear(
    sentences: Sequence[Sentence],
    scheme: TagScheme = TagScheme.BIO,
    epochs: int = 5,
    seed: int = 0,
    validation: Sequence[Sentence] | None = None,
    score_validation=None,
) -> PerceptronTagger:
    """Train the averaged perceptron; deterministic for fixed seed and epochs.

    One training step = one sentence visit; the returned weights are the
    exact mean of the weight snapshots after every step. With a validation
    set and a ``score_validation(tagger) -> float`` callback, the epoch
    whose averaged weights score best wins (ties toward the earlier epoch);
    otherwise the final epoch is returned.
    """
    if not sentences:
        raise ValueError("empty training set")
    inventory = _inventory_from_sentences(sentences, scheme)
    label_strs = [str(lab) for lab in inventory]
    label_index = {s: i for i, s in enumerate(label_strs)}
    start_ok = [allowed_start(lab, scheme) for lab in inventory]
    end_ok = [allowed_end(lab, scheme) for lab in inventory]
    trans_ok = [[allowed_transition(a, b, scheme) for b in inventory] for a in inventory]

    prepared = []
    for sent in sentences:
        tokens = pretokenize(sent.text)
        gold = [str(lab) for lab in encode_labels(tokens, sent.spans, scheme)]
        feats = [token_features(tokens, i) for i in range(len(tokens))]
        prepared.append((feats, gold))

    rng = random.Random(seed)
    emission = _AveragedWeights()
    transition = _AveragedWeights()
    step = 0
    best: tuple[float, Weights, Weights] | None = None

    def averaged() -> PerceptronTagger:
        if step == 0:
            return PerceptronTagger({}, {}, scheme, inventory)
        return PerceptronTagger(
            emission.average(step), transition.average(step), scheme, inventory
        )

    order = list(range(len(prepared)))
    for _ in range(epochs):
        rng.shuffle(order)
        for idx in order:
            feats, gold = prepared[idx]
            step += 1
            if not feats:
                continue
            emissions = _emission_matrix(feats, emission.current, label_index, len(inventory))
            pred = _viterbi(label_strs, start_ok, end_ok, trans_ok, emissions,
                            transition.current)
            if pred == gold:
                continue
            prev_g = prev_p = START
            for t, token_feats in enumerate(feats):
                g, p = gold[t], pred[t]
                if g != p:
                    for feat in token_feats:
                        emission.add(feat, g, 1.0, step)
                        emission.add(feat, p, -1.0, step)
                if (prev_g, g) != (prev_p, p):
                    transition.add(prev_g, g, 1.0, step)
                    transition.add(prev_p, p, -1.0, step)
                prev_g, prev_p = g, p
        if validation is not None and score_validation is not None:
            candidate = averaged()
            score = score_validation(candidate)
            if best is None or score > best[0]:
                best = (score, candidate.feature_weights, candidate.transition_weights)

    if best is not None:
        return PerceptronTagger(best[1], best[2], scheme, inventory)
    return averaged()


# ---------------------------------------------------------------------------
# Oracle and external adapter
# ---------------------------------------------------------------------------


class OracleTagger:
    """Echoes the gold annotation of whatever sentence it is given.

    Exists to verify harness plumbing: any evaluation driven through this
    tagger must come out at F1 = 1.0 exactly, noisy input included. The
    echoed spans are always exact; the token labels snap outward to whole
    tokens, because noise can fuse an entity with a neighbouring word and
    leave a span that no longer meets a token boundary.
    """

    kind = "oracle"

    def __init__(self, scheme: TagScheme, labels: tuple[Label, ...] = ()):
        self.scheme = scheme
        self.labels = labels

    def predict(self, sentence: Sentence) -> tuple[list[Label], list[CharSpan]]:
        tokens = pretokenize(sentence.text)
        ranges: list[tuple[int, int, EntityType]] = []
        taken = 0  # snapping may pull two spans onto one token; first wins
        for span in sorted(sentence.spans):
            first = next((i for i, t in enumerate(tokens) if t.end > span.start), None)
            if first is None:
                continue
            covering = [i for i, t in enumerate(tokens) if t.start < span.end]
            if not covering:
                continue
            first = max(first, taken)
            last = covering[-1] + 1
            if first >= last:
                continue
            ranges.append((first, last, span.entity))
            taken = last
        labels = _ranges_to_labels(ranges, len(tokens), self.scheme)
        return labels, list(sentence.spans)

    def to_params(self) -> dict:
        return {}

    @classmethod
    def from_params(cls, params: dict, scheme: TagScheme,
                    labels: tuple[Label, ...]) -> "OracleTagger":
        return cls(scheme, labels)


class ExternalTagger:
    """Child-process tagger speaking newline-delimited JSON.

    Request per sentence:  {"sentence": <text>}
    Response per request:  {"labels": [<tag string>, ...]}

    Labels must align one-to-one with the toolkit's word pre-tokenization
    of the sentence. Any protocol violation (timeout, malformed JSON,
    wrong label count, process death) raises AdapterError.
    """

    kind = "external"

    def __init__(
        self,
        command: Sequence[str],
        scheme: TagScheme,
        labels: tuple[Label, ...] = (),
        timeout: float = 30.0,
    ):
        self.command = list(command)
        self.scheme = scheme
        self.labels = labels
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._queue: queue.Queue[str | None] = queue.Queue()
        self._lock = threading.Lock()

    def _ensure_started(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            return
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._queue = queue.Queue()

        def _pump(proc: subprocess.Popen, q: queue.Queue) -> None:
            assert proc.stdout is not None
            for line in proc.stdout:
                q.put(line)
            q.put(None)

        threading.Thread(
            target=_pump, args=(self._proc, self._queue), daemon=True
        ).start()

    def predict(self, sentence: Sentence) -> tuple[list[Label], list[CharSpan]]:
        with self._lock:
            self._ensure_started()
            assert self._proc is not None and self._proc.stdin is not None
            try:
                self._proc.stdin.write(json.dumps({"sentence": sentence.text}) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise AdapterError(f"adapter process is gone: {exc}") from exc
            try:
                line = self._queue.get(timeout=self.timeout)
            except queue.Empty:
                self._proc.kill()
                raise AdapterError(f"adapter timed out after {self.timeout}s")
        if line is None:
            raise AdapterError("adapter closed its output stream")
        try:
            payload = json.loads(line)
            raw = payload["labels"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise AdapterError(f"bad adapter response {line!r}: {exc}") from exc
        tokens = pretokenize(sentence.text)
        if len(raw) != len(tokens):
            raise AdapterError(
                f"adapter returned {len(raw)} labels for {len(tokens)} tokens"
            )
        labels = [parse_label(s) for s in raw]
        return labels, decode_labels(labels, tokens, self.scheme)

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)

    def __enter__(self) -> "ExternalTagger":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def to_params(self) -> dict:
        return {"command": self.command, "timeout": self.timeout}

    @classmethod
    def from_params(cls, params: dict, scheme: TagScheme,
                    labels: tuple[Label, ...]) -> "ExternalTagger":
        return cls(params["command"], scheme, labels, params.get("timeout", 30.0))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

_KINDS = {
    "dictionary": DictionaryTagger,
    "linear": PerceptronTagger,
    "oracle": OracleTagger,
    "external": ExternalTagger,
}


def save_model(tagger, path) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": tagger.kind,
        "scheme": tagger.scheme.value,
        "labels": [str(lab) for lab in tagger.labels],
        "params": tagger.to_params(),
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8")


def load_model(path):
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelIOError(f"corrupt model file {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise ModelIOError(f"{path} is not a {MODEL_FORMAT} file")
    if payload.get("version") != MODEL_VERSION:
        raise ModelIOError(
            f"model version {payload.get('version')} unsupported (expected {MODEL_VERSION})"
        )
    kind = payload.get("kind")
    if kind not in _KINDS:
        raise ModelIOError(f"unknown model kind {kind!r}")
    try:
        scheme = TagScheme(payload["scheme"])
        labels = tuple(parse_label(s) for s in payload["labels"])
        return _KINDS[kind].from_params(payload["params"], scheme, labels)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelIOError(f"malformed model file {path}: {exc}") from exc
