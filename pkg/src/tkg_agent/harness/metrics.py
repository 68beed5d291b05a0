"""Answer scoring and score statistics."""

from __future__ import annotations

import re
import statistics
import string
from collections import Counter
from typing import Sequence

_LEADING_ARTICLE = re.compile(r"^(a|an|the)\s+")
_PUNCT = set(string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation and a leading article, collapse whitespace.

    Only the leading determiner goes: "in the kitchen sink" keeps four tokens.
    """
    text = " ".join("".join(ch for ch in text.lower() if ch not in _PUNCT).split())
    return _LEADING_ARTICLE.sub("", text)


def exact_match(prediction: str, gold: str) -> int:
    return int(normalize_answer(prediction) == normalize_answer(gold))


def f1_score(prediction: str, gold: str) -> float:
    pred = normalize_answer(prediction).split()
    ref = normalize_answer(gold).split()
    if not pred or not ref:
        return float(pred == ref)
    common = sum((Counter(pred) & Counter(ref)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred)
    recall = common / len(ref)
    return 2 * precision * recall / (precision + recall)


def mean(values: Sequence[float]) -> float:
    if not values:
        raise ValueError("mean of no values")
    return statistics.fmean(values)


def sample_std(values: Sequence[float]) -> float:
    """Sample standard deviation (n - 1 denominator); 0 for a single value."""
    if not values:
        raise ValueError("std of no values")
    return statistics.stdev(values) if len(values) > 1 else 0.0
