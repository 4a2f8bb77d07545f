"""SemEval-style ABSA XML ingestion, tokenization, IOB span codec, splits.

Offsets count Unicode scalar values, matching the ``from``/``to``
attributes of the XML. Tokenization is lossless: every token's surface is
exactly ``text[start:end]``.
"""

from __future__ import annotations

import json
import unicodedata
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import IO, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, ParseError, ValidationError

NULL_TARGET = "NULL"

B_ASPECT, I_ASPECT, OUTSIDE = "B-Aspect", "I-Aspect", "O"
IOB_LABELS = [B_ASPECT, I_ASPECT, OUTSIDE]


class Token(NamedTuple):
    surface: str
    start: int
    end: int


@dataclass
class OpinionTuple:
    target: str
    from_offset: int
    to_offset: int
    category: str
    polarity: str

    @property
    def implicit(self) -> bool:
        return self.target == NULL_TARGET

    @property
    def span(self) -> tuple[int, int]:
        return (self.from_offset, self.to_offset)


@dataclass
class AnnotatedSentence:
    sentence_id: str
    text: str
    tokens: list[Token] = field(default_factory=list)
    opinions: list[OpinionTuple] = field(default_factory=list)

    def explicit_spans(self) -> list[tuple[int, int]]:
        """Character spans of non-implicit targets, de-duplicated, in order."""
        seen: list[tuple[int, int]] = []
        for op in self.opinions:
            if not op.implicit and op.span not in seen:
                seen.append(op.span)
        return seen


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[Token]:
    """Split on whitespace, then peel leading/trailing punctuation characters
    into their own tokens."""
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        tokens.extend(_split_chunk(text, i, j))
        i = j
    return tokens


def _split_chunk(text: str, start: int, end: int) -> list[Token]:
    lead = start
    while lead < end and _is_punct(text[lead]):
        lead += 1
    trail = end
    while trail > lead and _is_punct(text[trail - 1]):
        trail -= 1
    out = [Token(text[k], k, k + 1) for k in range(start, lead)]
    if lead < trail:
        out.append(Token(text[lead:trail], lead, trail))
    out.extend(Token(text[k], k, k + 1) for k in range(trail, end))
    return out


def parse_semeval_xml(document: bytes | IO[bytes]) -> list[AnnotatedSentence]:
    """Parse Reviews/Review/sentences/sentence elements with their optional
    Opinions/Opinion children, in document order."""
    try:
        if isinstance(document, bytes):
            root = ET.fromstring(document)
        else:
            root = ET.parse(document).getroot()
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from None
    sentences: list[AnnotatedSentence] = []
    for sent_el in root.iter("sentence"):
        sid = sent_el.get("id", f"sentence-{len(sentences)}")
        text_el = sent_el.find("text")
        text = text_el.text if text_el is not None and text_el.text else ""
        opinions: list[OpinionTuple] = []
        ops_el = sent_el.find("Opinions")
        if ops_el is not None:
            for op_el in ops_el.findall("Opinion"):
                op = OpinionTuple(
                    target=op_el.get("target", NULL_TARGET),
                    from_offset=int(op_el.get("from", "0")),
                    to_offset=int(op_el.get("to", "0")),
                    category=op_el.get("category", ""),
                    polarity=op_el.get("polarity", ""),
                )
                _validate_opinion(sid, text, op)
                opinions.append(op)
        sentences.append(AnnotatedSentence(sid, text, tokenize(text), opinions))
    return sentences


def _validate_opinion(sid: str, text: str, op: OpinionTuple) -> None:
    if op.implicit:
        return
    if not 0 <= op.from_offset < op.to_offset <= len(text):
        raise ValidationError(
            f"sentence {sid}: bad offsets {op.from_offset}..{op.to_offset} "
            f"for text of length {len(text)}")
    if text[op.from_offset:op.to_offset] != op.target:
        raise ValidationError(
            f"sentence {sid}: target {op.target!r} does not match "
            f"text slice {text[op.from_offset:op.to_offset]!r}")


# ---------------------------------------------------------------------------
# IOB codec


def spans_to_tags(spans: Sequence[tuple[int, int]],
                  tokens: Sequence[Token]) -> list[str]:
    """Tag each token by overlap with the (non-overlapping) target spans."""
    ordered = sorted(set(spans))
    for (a1, b1), (a2, b2) in zip(ordered, ordered[1:]):
        if a2 < b1:
            raise ValidationError(
                f"overlapping target spans ({a1},{b1}) and ({a2},{b2})")
    tags = [OUTSIDE] * len(tokens)
    for a, b in ordered:
        first = True
        for i, tok in enumerate(tokens):
            if tok.start < b and tok.end > a:
                tags[i] = B_ASPECT if first else I_ASPECT
                first = False
    return tags


def encode_iob(sentence: AnnotatedSentence) -> list[str]:
    """Gold tags for a sentence; implicit (NULL) opinions carry no span and
    are ignored."""
    return spans_to_tags(sentence.explicit_spans(), sentence.tokens)


def tags_to_spans(tags: Sequence[str],
                  tokens: Sequence[Token]) -> list[tuple[int, int]]:
    """Character spans for maximal B/I runs. A stray I (after O or at the
    start) is repaired by treating it as B; model output is never rejected."""
    spans: list[tuple[int, int]] = []
    run_start: int | None = None
    last_end = 0
    for tag, tok in zip(tags, tokens):
        if tag == B_ASPECT or (tag == I_ASPECT and run_start is None):
            if run_start is not None:
                spans.append((run_start, last_end))
            run_start = tok.start
        elif tag == OUTSIDE and run_start is not None:
            spans.append((run_start, last_end))
            run_start = None
        last_end = tok.end
    if run_start is not None:
        spans.append((run_start, last_end))
    return spans


def decode_iob(tags: Sequence[str],
               tokens: Sequence[Token]) -> list[tuple[int, int]]:
    return tags_to_spans(tags, tokens)


# ---------------------------------------------------------------------------
# dataset split


def split_dataset(sentences: Sequence[AnnotatedSentence],
                  ratios: tuple[float, float, float] = (0.7, 0.1, 0.2),
                  seed: int = 0):
    """Deterministic shuffled (train, validation, test) partition.

    Validation and test sizes are floors of their ratios; the remainder goes
    to train.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios {ratios} do not sum to 1")
    n = len(sentences)
    order = np.random.default_rng(seed).permutation(n)
    n_val = int(n * ratios[1])
    n_test = int(n * ratios[2])
    n_train = n - n_val - n_test
    shuffled = [sentences[i] for i in order]
    return (shuffled[:n_train],
            shuffled[n_train:n_train + n_val],
            shuffled[n_train + n_val:])


# ---------------------------------------------------------------------------
# JSON-lines interchange


def sentence_to_json(s: AnnotatedSentence) -> str:
    record = {
        "id": s.sentence_id,
        "text": s.text,
        "tokens": [[t.surface, t.start, t.end] for t in s.tokens],
        "opinions": [{"target": o.target, "from": o.from_offset,
                      "to": o.to_offset, "category": o.category,
                      "polarity": o.polarity} for o in s.opinions],
    }
    return json.dumps(record, ensure_ascii=False, sort_keys=True,
                      separators=(",", ":"))


def sentence_from_json(line: str) -> AnnotatedSentence:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad JSON line: {exc}") from None
    return AnnotatedSentence(
        sentence_id=record["id"],
        text=record["text"],
        tokens=[Token(s, int(a), int(b)) for s, a, b in record["tokens"]],
        opinions=[OpinionTuple(o["target"], int(o["from"]), int(o["to"]),
                               o["category"], o["polarity"])
                  for o in record["opinions"]],
    )


def write_jsonl(sentences: Iterable[AnnotatedSentence], path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(sentence_to_json(s) + "\n")
            count += 1
    return count


def read_jsonl(path) -> list[AnnotatedSentence]:
    with open(path, encoding="utf-8") as fh:
        return [sentence_from_json(line) for line in fh if line.strip()]
