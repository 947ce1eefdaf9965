"""Corpus ingestion, BIO/BIOES conversion, span extraction and span F1.

Sentences are pre-tokenized; a CoNLL file has one `token label` pair per
line (whitespace-separated) and a blank line between sentences. All corpus
functions are pure; repairs of noisy label transitions are logged as
warnings rather than rejected, since public corpora contain such noise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

SCHEMES = ("BIO", "BIOES")
_PREFIXES = {"BIO": {"B", "I", "O"}, "BIOES": {"B", "I", "O", "E", "S"}}


class CorpusFormatError(ValueError):
    """Malformed corpus file; message carries path and line number."""


@dataclass(frozen=True)
class Span:
    """A typed entity span with inclusive token boundaries."""

    entity_type: str
    start: int
    end: int


@dataclass(frozen=True)
class LabeledSequence:
    """One sentence with its label sequence in a declared tagging scheme."""

    tokens: tuple[str, ...]
    labels: tuple[str, ...]
    scheme: str = "BIOES"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if len(self.tokens) != len(self.labels) or not self.tokens:
            raise ValueError("tokens and labels must be equal-length and nonempty")
        for lab in self.labels:
            validate_label(lab, self.scheme)

    def __len__(self) -> int:
        return len(self.tokens)


def validate_label(label: str, scheme: str) -> tuple[str, str]:
    """Split a label into (prefix, entity_type); raises on invalid labels."""
    if label == "O":
        return "O", ""
    prefix, sep, etype = label.partition("-")
    if prefix not in _PREFIXES[scheme] or prefix == "O" or not sep or not etype:
        raise ValueError(f"label {label!r} invalid for scheme {scheme}")
    return prefix, etype


@dataclass
class Corpus:
    """An ordered list of labeled sentences sharing one tagging scheme."""

    examples: list[LabeledSequence]
    scheme: str = "BIOES"
    label_vocab: list[str] = field(default_factory=list)
    token_vocab: list[str] = field(default_factory=list)

    PAD = "<pad>"
    UNK = "<unk>"

    def __post_init__(self):
        for ex in self.examples:
            if ex.scheme != self.scheme:
                raise ValueError("all examples must share the corpus scheme")
        if not self.label_vocab:
            labels = sorted({lab for ex in self.examples for lab in ex.labels})
            if "O" not in labels:
                labels = sorted(labels + ["O"])
            self.label_vocab = labels
        if not self.token_vocab:
            toks = sorted({tok for ex in self.examples for tok in ex.tokens})
            self.token_vocab = [self.PAD, self.UNK] + toks

    def __len__(self) -> int:
        return len(self.examples)

    def convert(self, target: str) -> "Corpus":
        return Corpus([convert_scheme(ex, target) for ex in self.examples], scheme=target)


def read_conll(path: str | Path, scheme: str = "BIOES") -> Corpus:
    """Parse a two-column CoNLL file into a corpus in the declared scheme."""
    path = Path(path)
    examples: list[LabeledSequence] = []
    tokens: list[str] = []
    labels: list[str] = []

    def flush():
        if tokens:
            examples.append(
                LabeledSequence(tuple(tokens), tuple(labels), scheme=scheme)
            )
            tokens.clear()
            labels.clear()

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                flush()
                continue
            cols = line.split()
            if len(cols) != 2:
                raise CorpusFormatError(
                    f"{path}:{lineno}: expected 2 columns (token label), got {len(cols)}: {line!r}"
                )
            try:
                validate_label(cols[1], scheme)
            except ValueError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: {exc}") from exc
            tokens.append(cols[0])
            labels.append(cols[1])
    flush()
    return Corpus(examples, scheme=scheme)


def write_conll(corpus_or_examples: Corpus | Iterable[LabeledSequence], path: str | Path) -> None:
    """Write sentences in the same two-column format read_conll accepts."""
    examples = (
        corpus_or_examples.examples
        if isinstance(corpus_or_examples, Corpus)
        else list(corpus_or_examples)
    )
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            for tok, lab in zip(ex.tokens, ex.labels):
                fh.write(f"{tok} {lab}\n")
            fh.write("\n")


def _parse_spans(
    labels: Sequence[str], scheme: str, warn_context: str = "", warn: bool = True
) -> list[Span]:
    """Lenient span parse shared by extract_spans and convert_scheme.

    Repair policy: an I-/E- tag without a matching open span opens a new one
    (treated as B-); an open span is closed by any incompatible tag. Repairs
    warn by default; scoring paths silence them because model output is
    routinely invalid early in training.
    """
    spans: list[Span] = []
    open_type: str | None = None
    open_start = 0

    def close(end: int):
        nonlocal open_type
        if open_type is not None:
            spans.append(Span(open_type, open_start, end))
            open_type = None

    for i, label in enumerate(labels):
        prefix, etype = validate_label(label, scheme)
        if prefix == "O":
            close(i - 1)
        elif prefix == "B":
            close(i - 1)
            open_type, open_start = etype, i
        elif prefix == "S":
            close(i - 1)
            spans.append(Span(etype, i, i))
        elif prefix == "I":
            if open_type != etype:
                if warn:
                    logger.warning(
                        "repairing stray %s at position %d%s: treating as B-%s",
                        label, i, warn_context, etype,
                    )
                close(i - 1)
                open_type, open_start = etype, i
        else:  # "E"
            if open_type == etype:
                close(i)
            else:
                if warn:
                    logger.warning(
                        "repairing stray %s at position %d%s: treating as B-%s",
                        label, i, warn_context, etype,
                    )
                close(i - 1)
                spans.append(Span(etype, i, i))
    close(len(labels) - 1)
    return spans


def extract_spans(seq: LabeledSequence) -> set[Span]:
    """Maximal typed entity spans; O positions contribute nothing."""
    return set(_parse_spans(seq.labels, seq.scheme))


def _render_labels(length: int, spans: Iterable[Span], scheme: str) -> tuple[str, ...]:
    labels = ["O"] * length
    for span in spans:
        if span.start == span.end:
            labels[span.start] = (
                f"S-{span.entity_type}" if scheme == "BIOES" else f"B-{span.entity_type}"
            )
            continue
        labels[span.start] = f"B-{span.entity_type}"
        for i in range(span.start + 1, span.end + 1):
            labels[i] = f"I-{span.entity_type}"
        if scheme == "BIOES":
            labels[span.end] = f"E-{span.entity_type}"
    return tuple(labels)


def convert_scheme(
    seq: LabeledSequence, target: str, warn: bool = True
) -> LabeledSequence:
    """Re-express the labels in `target`; the entity span set is preserved."""
    if target not in SCHEMES:
        raise ValueError(f"unknown scheme {target!r}")
    spans = _parse_spans(seq.labels, seq.scheme, warn=warn)
    return LabeledSequence(
        seq.tokens, _render_labels(len(seq), spans, target), scheme=target
    )


def labels_to_spans(labels: Sequence[str], scheme: str, warn: bool = True) -> set[Span]:
    return set(_parse_spans(labels, scheme, warn=warn))


def span_f1(
    pred: Sequence[Sequence[str]],
    gold: Sequence[Sequence[str]],
    scheme: str = "BIOES",
) -> dict[str, float]:
    """Micro-averaged exact span match (type + boundaries).

    Precision and recall use the 0-when-undefined convention; F1 is 0 when
    P + R = 0. `support` counts gold spans.
    """
    if len(pred) != len(gold):
        raise ValueError(f"pred has {len(pred)} sentences, gold has {len(gold)}")
    tp = fp = fn = 0
    for p_labels, g_labels in zip(pred, gold):
        if len(p_labels) != len(g_labels):
            raise ValueError("sentence length mismatch between pred and gold")
        p_spans = labels_to_spans(p_labels, scheme, warn=False)
        g_spans = labels_to_spans(g_labels, scheme, warn=False)
        tp += len(p_spans & g_spans)
        fp += len(p_spans - g_spans)
        fn += len(g_spans - p_spans)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1, "support": tp + fn}


def subsample(corpus: Corpus, fraction: float, seed: int) -> Corpus:
    """Uniform sample without replacement of round(fraction * N) examples.

    Deterministic per seed; kept examples preserve their original order.
    Rounding is half-up so the sample size is exact and predictable.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    n = len(corpus)
    k = int(np.floor(fraction * n + 0.5))
    if k == 0:
        raise ValueError(f"subsample of {n} examples at fraction {fraction} is empty")
    if k == n:
        return Corpus(list(corpus.examples), scheme=corpus.scheme)
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(n, size=k, replace=False))
    return Corpus([corpus.examples[i] for i in keep], scheme=corpus.scheme)
