"""Coreference resolvers: identity, a pronoun-substitution heuristic, and LLM-backed."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Protocol

if TYPE_CHECKING:
    from ..llm import Gateway


class Resolver(Protocol):
    def resolve(self, text: str) -> str: ...


class IdentityResolver:
    def resolve(self, text: str) -> str:
        return text


_TOKEN = re.compile(r"[A-Za-z][A-Za-z'-]*|\d+|[^\sA-Za-z\d]")
_DETERMINERS = {"the", "a", "an"}
# Words that end a determiner-led noun phrase.
_NP_STOP = {
    "is", "are", "was", "were", "be", "been", "has", "have", "had", "contains", "contain", "in", "on",
    "into", "onto", "of", "and", "or", "to", "with", "at", "from", "by", "for", "it", "its", "that",
    "which", "who", "while", "but", "then", "when", "so", "as", "starts", "begins", "becomes",
}
_NOT_NAMES = {
    "the", "a", "an", "it", "its", "he", "she", "they", "them", "his", "her", "their", "this", "that",
    "there", "then", "you", "we", "i", "when", "after", "before", "later", "now", "next", "finally",
    "in", "on", "at", "if", "but", "and", "so", "nothing", "something", "everything", "these", "those",
    "here", "yes", "no",
}
_PREPOSITIONS = {"in", "on", "into", "onto", "to", "with", "at", "from", "by", "for", "up", "down", "over"}
_THING = {"it", "its"}
_PERSON = {"he", "she", "him", "his", "her"}
_GROUP = {"they", "them", "their"}


_PERSON_VERBS = {
    "founded", "directed", "wrote", "lives", "lived", "died", "works", "worked", "moved", "studied",
    "married", "painted", "composed", "discovered", "invented", "said", "says", "met",
}


@dataclass
class _Mention:
    text: str
    person: bool
    subject: bool
    plural: bool


class RuleResolver:
    """Replace pronouns with a type-compatible earlier mention.

    Mentions are determiner-led noun phrases (rewritten with "the") and
    capitalized names. A name counts as a person when it follows "by" or
    opens a sentence before a verb such as "was born" or "founded".
    ``he``/``she``/``him``/``his``/``her`` take the latest person; ``it`` and
    ``they`` take the latest non-person mention, except that a pronoun opening
    a sentence prefers the previous sentence's subject, and ``they`` prefers
    plural phrases.
    """

    max_np_words = 3

    def resolve(self, text: str) -> str:
        tokens = [(m.group(0), m.start(), m.end()) for m in _TOKEN.finditer(text)]
        mentions: list[_Mention] = []
        prev_subject: _Mention | None = None
        this_subject: _Mention | None = None
        pieces: list[str] = []
        cursor = 0
        i = 0
        while i < len(tokens):
            tok, start, end = tokens[i]
            low = tok.lower()
            sentence_start = i == 0 or tokens[i - 1][0] in ".!?"
            if sentence_start and i:
                prev_subject, this_subject = this_subject, None
            replacement = None
            found: _Mention | None = None

            if low in _DETERMINERS:
                words = []
                j = i + 1
                while (j < len(tokens) and len(words) < self.max_np_words and tokens[j][0][0].isalpha()
                       and tokens[j][0].lower() not in _NP_STOP | _DETERMINERS
                       and not (words and self._looks_like_verb(tokens, j))):
                    words.append(tokens[j][0].lower())
                    j += 1
                if words and words != ["agent"]:
                    last = words[-1]
                    found = _Mention("the " + " ".join(words), False, sentence_start,
                                     last.endswith("s") and not last.endswith("ss"))
            elif low in _THING | _GROUP:
                ref = self._thing(mentions, prev_subject if sentence_start else None, low in _GROUP)
                if ref is not None:
                    replacement = ref.text + ("'s" if low in ("its", "their") else "")
                    if sentence_start:
                        this_subject = ref
            elif low in _PERSON:
                ref = next((m for m in reversed(mentions) if m.person), None)
                if ref is not None:
                    possessive = low == "his" or (low == "her" and self._next_is_word(tokens, i))
                    replacement = ref.text + ("'s" if possessive else "")
                    if sentence_start:
                        this_subject = ref
            elif tok[0].isupper() and low not in _NOT_NAMES and not (sentence_start and low in _NP_STOP):
                prev = tokens[i - 1][0].lower() if i else ""
                if prev not in _DETERMINERS:
                    name = [tok]
                    j = i + 1
                    while j < len(tokens) and tokens[j][0][0].isupper() and tokens[j][0].lower() not in _NOT_NAMES:
                        name.append(tokens[j][0])
                        j += 1
                    after = [t[0].lower() for t in tokens[j:j + 2]]
                    person = prev == "by" or (sentence_start and bool(after) and (
                        after[0] in _PERSON_VERBS or after[:2] in (["was", "born"], ["is", "married"],
                                                                   ["was", "married"])))
                    mention = _Mention(" ".join(name), person, sentence_start, False)
                    mentions.append(mention)
                    if sentence_start:
                        this_subject = mention
                    i = j
                    continue

            if found is not None:
                mentions.append(found)
                if found.subject:
                    this_subject = found
            if replacement is not None:
                if tok[0].isupper():
                    replacement = replacement[0].upper() + replacement[1:]
                pieces.append(text[cursor:start])
                pieces.append(replacement)
                cursor = end
            i += 1
        pieces.append(text[cursor:])
        return "".join(pieces)

    @staticmethod
    def _thing(mentions: list[_Mention], subject: _Mention | None, plural: bool) -> _Mention | None:
        if subject is not None and not subject.person and (subject.plural or not plural):
            return subject
        things = [m for m in reversed(mentions) if not m.person]
        if plural:
            return next((m for m in things if m.plural), things[0] if things else None)
        return next((m for m in things if not m.plural), things[0] if things else None)

    @staticmethod
    def _looks_like_verb(tokens, j) -> bool:
        """``sits`` in "the frog sits in": an -s word followed by a preposition, article or punctuation."""
        word = tokens[j][0].lower()
        if not word.endswith("s") or word.endswith("ss"):
            return False
        nxt = tokens[j + 1][0].lower() if j + 1 < len(tokens) else "."
        return not nxt[0].isalpha() or nxt in _DETERMINERS or nxt in _PREPOSITIONS

    @staticmethod
    def _next_is_word(tokens, i) -> bool:
        if i + 1 >= len(tokens):
            return False
        nxt = tokens[i + 1][0].lower()
        return nxt[0].isalpha() and nxt not in _NP_STOP


class LLMResolver:
    def __init__(self, lm: "Gateway"):
        self.lm = lm

    def resolve(self, text: str) -> str:
        reply = self.lm.ask("coref", text=text).strip()
        if not reply:
            raise ValueError("empty coreference reply")
        return reply
