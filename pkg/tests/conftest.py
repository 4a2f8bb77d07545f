"""Shared fixtures: a SemEval-style XML file and synthetic training corpora
with deterministic target / polarity patterns."""

from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from absagru.data import AnnotatedSentence, OpinionTuple, tokenize
from absagru.ian import PolarityInstance

FILLERS = ["كان", "جدا", "في", "الفندق", "هذا", "لكن", "مع", "عند"]
ASPECTS = [["الغرفة"], ["المسبح"], ["الخدمة"], ["وسائل", "ترفيه"]]
MARKERS = {"جميل": "positive", "سيئ": "negative", "عادي": "neutral"}


def sentence_with_targets(sid: str, words: list[str],
                          target_ranges: list[tuple[int, int]],
                          polarity: str = "positive") -> AnnotatedSentence:
    """Space-join punctuation-free words and mark token ranges as targets."""
    text = " ".join(words)
    tokens = tokenize(text)
    assert [t.surface for t in tokens] == words
    opinions = []
    for lo, hi in target_ranges:
        a, b = tokens[lo].start, tokens[hi - 1].end
        opinions.append(OpinionTuple(text[a:b], a, b, "HOTEL#GENERAL",
                                     polarity))
    return AnnotatedSentence(sid, text, tokens, opinions)


def make_ote_corpus(n: int = 20, seed: int = 7) -> list[AnnotatedSentence]:
    """Sentences where a fixed aspect-word inventory is always the target."""
    rng = np.random.default_rng(seed)
    corpus = []
    for i in range(n):
        words = list(rng.choice(FILLERS, size=3))
        aspect = ASPECTS[i % len(ASPECTS)]
        pos = int(rng.integers(0, len(words) + 1))
        words = words[:pos] + aspect + words[pos:]
        corpus.append(sentence_with_targets(
            f"s{i}", words, [(pos, pos + len(aspect))]))
    return corpus


def make_ian_instances(n: int = 30, seed: int = 3) -> list[PolarityInstance]:
    """A marker word adjacent to the target decides the polarity."""
    rng = np.random.default_rng(seed)
    classes = ["positive", "negative", "neutral"]
    markers = list(MARKERS)
    out = []
    for i in range(n):
        marker = markers[i % 3]
        context = list(rng.choice(FILLERS, size=3)) + [marker, "الغرفة"]
        out.append(PolarityInstance(context, ["الغرفة"],
                                    classes.index(MARKERS[marker])))
    return out


def make_polarity_corpus(n: int = 30,
                         seed: int = 3) -> list[AnnotatedSentence]:
    """Sentence-level version of the marker corpus, for CLI runs."""
    rng = np.random.default_rng(seed)
    markers = list(MARKERS)
    corpus = []
    for i in range(n):
        marker = markers[i % 3]
        words = list(rng.choice(FILLERS, size=3)) + [marker, "الغرفة"]
        sent = sentence_with_targets(f"p{i}", words, [(4, 5)],
                                     polarity=MARKERS[marker])
        corpus.append(sent)
    return corpus


@pytest.fixture(scope="session")
def ote_corpus():
    return make_ote_corpus()


@pytest.fixture(scope="session")
def ian_instances():
    return make_ian_instances()


def _xml_sentence(parent, sent: AnnotatedSentence) -> None:
    el = ET.SubElement(parent, "sentence", id=sent.sentence_id)
    ET.SubElement(el, "text").text = sent.text
    if sent.opinions:
        ops = ET.SubElement(el, "Opinions")
        for op in sent.opinions:
            ET.SubElement(ops, "Opinion", target=op.target,
                          category=op.category, polarity=op.polarity,
                          **{"from": str(op.from_offset),
                             "to": str(op.to_offset)})


def build_fixture_xml() -> bytes:
    """3 reviews / 7 sentences / 11 opinions, offsets computed from text."""
    s = [
        sentence_with_targets("r1:1", ["الموقع", "جيد", "جدا"], [(0, 1)]),
        sentence_with_targets("r1:2", ["وسائل", "ترفيه", "متوفرة"], [(0, 2)],
                              polarity="positive"),
        sentence_with_targets("r1:3", ["الغرف", "كانت", "سيئة"], [(0, 1)],
                              polarity="negative"),
        sentence_with_targets("r2:1", ["الخدمة", "ممتازة", "و", "المسبح",
                                       "نظيف"], [(0, 1), (3, 4)]),
        sentence_with_targets("r2:2", ["الفطور", "متنوع"], [(0, 1)]),
        sentence_with_targets("r3:1", ["الموقع", "بعيد", "لكن", "الاطلالة",
                                       "رائعة"], [(0, 1), (3, 4)],
                              polarity="negative"),
        sentence_with_targets("r3:2", ["استقبال", "ودود", "و", "غرفة",
                                       "واسعة", "و", "سرير", "مريح"],
                              [(0, 1), (3, 4)]),
    ]
    # one implicit opinion on top of the ten explicit ones above
    s[4].opinions.append(OpinionTuple("NULL", 0, 0, "HOTEL#GENERAL",
                                      "neutral"))
    root = ET.Element("Reviews")
    groups = [s[0:3], s[3:5], s[5:7]]
    for i, group in enumerate(groups, start=1):
        review = ET.SubElement(root, "Review", rid=f"r{i}")
        sentences = ET.SubElement(review, "sentences")
        for sent in group:
            _xml_sentence(sentences, sent)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


@pytest.fixture(scope="session")
def fixture_xml_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "reviews.xml"
    path.write_bytes(build_fixture_xml())
    return path
