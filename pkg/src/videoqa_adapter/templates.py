"""Rule-based rewriting of multiple-choice QA pairs into declarative sentences.

Frozen image-text encoders are pretrained on caption-style statements, so a
question plus a candidate answer is rephrased as the event description the
pair asserts ("Which area has been damaged ...?" + "Back" -> "Back has been
damaged ...").  The rewrite is a deterministic pattern table keyed on the
question's leading interrogative/auxiliary tokens; each pattern produces a
sentence skeleton with a slot that the (normalized) answer fills.  Questions
no pattern understands fall back to "<question body>, <answer>." so a batch
never aborts on odd phrasing.

Everything here is pure string manipulation over immutable inputs: the same
pair always yields byte-identical output, and calls are safe from any number
of concurrent workers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class QuestionKind(Enum):
    WH = "wh"
    HOW_MANY = "how_many"
    WHATS = "whats"
    YES_NO = "yes_no"
    UNKNOWN = "unknown"


# Leading tokens that mark a yes/no question.
_AUX_LEADS = {
    "is", "are", "was", "were", "am",
    "do", "does", "did",
    "have", "has", "had",
    "can", "could", "will", "would", "shall", "should", "may", "might", "must",
}

_WH_LEADS = {"what", "which", "where", "when", "why", "how", "who", "whom", "whose"}

_DETERMINERS = {
    "the", "a", "an", "this", "that", "these", "those",
    "my", "your", "his", "her", "its", "our", "their",
    "some", "any", "no", "each", "every", "another", "both",
}

# Adverbs that can sit between the subject and the verb ("Would the accident
# still occur ...").  Kept with the subject in affirmative order, dropped when
# the auxiliary is reinserted for negation.
_MID_ADVERBS = {"still", "already", "also", "ever", "never", "even", "often", "usually", "really"}

# Auxiliaries/modals that can head a predicate ("Which area HAS been damaged").
_PREDICATE_AUX = {
    "is", "are", "was", "were", "am", "be", "been", "being",
    "do", "does", "did", "have", "has", "had",
    "can", "cannot", "could", "will", "would", "shall", "should", "may", "might", "must",
}

# Small base-form verb lexicon used to find where a subject ends after
# do-support or a modal.  Curated to avoid words that commonly appear as the
# non-final noun of a compound subject (no "speed", "light", "signal", ...).
_BASE_VERBS = {
    "appear", "arrive", "avoid", "become", "begin", "behave", "belong", "block",
    "break", "bring", "build", "burn", "carry", "catch", "cause", "change",
    "collide", "come", "continue", "crash", "cross", "decide", "drive", "drop",
    "emerge", "end", "enter", "escape", "exist", "explode", "fail", "fall",
    "find", "finish", "flip", "follow", "get", "give", "go", "happen", "have",
    "hit", "hold", "hurt", "ignore", "improve", "increase", "involve", "keep",
    "know", "lead", "leave", "look", "lose", "make", "move", "notice",
    "obstruct", "occur", "overtake", "overturn", "pass", "pay", "prevent",
    "pull", "push", "rain", "reach", "receive", "remain", "ride", "roll",
    "run", "see", "seem", "show", "skid", "slide", "slip", "slow", "snow",
    "spin", "stall", "stand", "start", "stay", "stop", "swerve", "take",
    "travel", "try", "turn", "use", "violate", "wait", "walk", "want",
    "watch", "wear", "work",
}

_IRREGULAR_PAST = {
    "become": "became", "begin": "began", "break": "broke", "bring": "brought",
    "build": "built", "catch": "caught", "come": "came", "drive": "drove",
    "fall": "fell", "find": "found", "get": "got", "give": "gave", "go": "went",
    "have": "had", "hit": "hit", "hold": "held", "hurt": "hurt", "keep": "kept",
    "know": "knew", "lead": "led", "leave": "left", "lose": "lost",
    "make": "made", "pay": "paid", "ride": "rode", "run": "ran", "see": "saw",
    "show": "showed", "slide": "slid", "spin": "spun", "stand": "stood",
    "take": "took", "wear": "wore",
}

# Verbs whose past tense doubles the final consonant despite not matching the
# single-vowel-group heuristic (stress on the final syllable).
_PAST_DOUBLING_EXTRA = {"occur": "occurred", "prefer": "preferred", "refer": "referred"}

_IRREGULAR_THIRD = {"have": "has", "do": "does", "go": "goes"}

_IRREGULAR_PARTICIPLES = {
    "taken", "seen", "been", "done", "given", "driven", "hidden", "broken",
    "stolen", "written", "shown", "known", "grown", "thrown", "drawn", "worn",
    "eaten", "fallen", "forgotten", "chosen", "frozen", "spoken", "woken",
    "ridden", "risen", "beaten", "gotten", "hit", "hurt", "left", "lost",
    "made", "held", "kept", "built", "caught", "brought", "found", "paid",
}

_PREPOSITIONS = {
    "in", "at", "on", "near", "by", "behind", "under", "over", "beside",
    "inside", "outside", "along", "around", "above", "below", "between",
    "beyond", "within",
}

# Finite auxiliaries whose presence marks an answer as a full clause
# ("Driver was not paying attention" -> "because ...", not "because of ...").
_CLAUSE_MARKERS = {
    "is", "are", "was", "were", "has", "have", "had",
    "do", "does", "did", "can", "could", "will", "would", "cannot",
}


@dataclass
class QAPair:
    """A question with one candidate answer.

    The kind is derived from the question's leading tokens when not given.
    """

    question: str
    answer: str
    question_kind: Optional[QuestionKind] = None

    def __post_init__(self) -> None:
        if not self.question or not self.question.strip():
            raise ValueError("question must be a non-empty string")
        if not self.answer or not self.answer.strip():
            raise ValueError("answer must be a non-empty string")
        if self.question_kind is None:
            self.question_kind = classify_question(self.question)


@dataclass
class EventDescription:
    """A declarative sentence asserting one (question, answer) combination."""

    text: str
    source: QAPair = field(repr=False)
    used_fallback: bool = False


def classify_question(question: str) -> QuestionKind:
    """Classify a question by its leading tokens alone.

    Returns UNKNOWN when no rule matches; never raises on a non-empty string.
    """
    if not question or not question.strip():
        raise ValueError("question must be a non-empty string")
    tokens = _tokens(question)
    if not tokens:
        return QuestionKind.UNKNOWN
    first = tokens[0].lower()
    second = tokens[1].lower() if len(tokens) > 1 else ""
    if first == "how" and second in {"many", "much"}:
        return QuestionKind.HOW_MANY
    if first == "what's" or (first == "what" and second == "is"):
        return QuestionKind.WHATS
    if first in _WH_LEADS:
        return QuestionKind.WH
    if first in _AUX_LEADS:
        return QuestionKind.YES_NO
    return QuestionKind.UNKNOWN


def to_declarative(pair: QAPair) -> EventDescription:
    """Rewrite one QA pair as a declarative event description.

    Total over well-formed pairs: when no pattern applies, the fallback
    "<question body>, <answer>." is used and flagged.
    """
    kind = pair.question_kind or classify_question(pair.question)
    tokens = _tokens(pair.question)
    text: Optional[str] = None
    if kind is QuestionKind.WH:
        text = _rewrite_wh(tokens, pair.answer)
    elif kind is QuestionKind.HOW_MANY:
        text = _rewrite_how_many(tokens, pair.answer)
    elif kind is QuestionKind.WHATS:
        text = _rewrite_whats(tokens, pair.answer)
    elif kind is QuestionKind.YES_NO:
        text = _rewrite_yes_no(tokens, pair.answer)
    if text is not None:
        return EventDescription(text=_finish(text), source=pair, used_fallback=False)
    if kind in (QuestionKind.WH, QuestionKind.HOW_MANY, QuestionKind.WHATS):
        body = _wh_fallback_body(tokens, kind)
        answer = _strip_final_punct(pair.answer.strip())
        fallback = f"{_cap(body)}, {answer}" if body else _cap(answer)
    else:
        body = _strip_final_punct(pair.question.strip())
        answer = _strip_final_punct(pair.answer.strip())
        fallback = f"{body}, {answer}" if body else _cap(answer)
    return EventDescription(text=_finish(fallback), source=pair, used_fallback=True)


def batch_templates(pairs: list[QAPair]) -> list[EventDescription]:
    """Apply to_declarative elementwise, preserving order."""
    if not pairs:
        raise ValueError("pairs must be non-empty")
    return [to_declarative(pair) for pair in pairs]


def normalized_slot(pair: QAPair) -> str:
    """The answer as it is normalized before filling the sentence slot.

    Lowercased, trailing punctuation stripped, and with a recognized
    subject+copula prefix removed (the What's/How rules splice only the
    predicate of answers like "The road is wet.").  This is the containment
    unit for WH/HOW_MANY/WHATS outputs.
    """
    cleaned = _strip_final_punct(pair.answer.strip()).lower()
    kind = pair.question_kind or classify_question(pair.question)
    if kind in (QuestionKind.WHATS, QuestionKind.WH):
        stripped = _strip_copula_prefix(cleaned)
        if stripped is not None:
            return stripped
        parts = cleaned.split()
        for i, tok in enumerate(parts[1:], start=1):
            if tok in {"in", "at", "on"}:
                return " ".join(parts[i:])
    return cleaned


# ---------------------------------------------------------------------------
# tokens and morphology


def _tokens(question: str) -> list[str]:
    return question.strip().rstrip("?").strip().split()


def _join(tokens: list[str]) -> str:
    return " ".join(tokens)


def _cap(text: str) -> str:
    return text[:1].upper() + text[1:] if text else text


def _decap(text: str) -> str:
    return text[:1].lower() + text[1:] if text else text


def _strip_final_punct(text: str) -> str:
    return text.rstrip(".?! ")


def _finish(text: str) -> str:
    text = text.replace("?", "").strip()
    text = _strip_final_punct(text)
    return text + "."


def _past(verb: str) -> str:
    word = verb.lower()
    if word in _IRREGULAR_PAST:
        return _IRREGULAR_PAST[word]
    if word in _PAST_DOUBLING_EXTRA:
        return _PAST_DOUBLING_EXTRA[word]
    if word.endswith("e"):
        return word + "d"
    if len(word) > 1 and word.endswith("y") and word[-2] not in "aeiou":
        return word[:-1] + "ied"
    if re.fullmatch(r"[^aeiou]*[aeiou][^aeiouwxy]", word):
        return word + word[-1] + "ed"
    return word + "ed"


def _third_singular(verb: str) -> str:
    word = verb.lower()
    if word in _IRREGULAR_THIRD:
        return _IRREGULAR_THIRD[word]
    if word.endswith(("s", "x", "z", "ch", "sh")):
        return word + "es"
    if len(word) > 1 and word.endswith("y") and word[-2] not in "aeiou":
        return word[:-1] + "ies"
    return word + "s"


def _is_participle(token: str) -> bool:
    word = token.lower()
    if word in _IRREGULAR_PARTICIPLES:
        return True
    if len(word) >= 4 and word.endswith("ed"):
        return True
    if len(word) >= 5 and word.endswith("ing"):
        return True
    return False


def _is_verbish(token: str) -> bool:
    word = token.lower()
    return word in _PREDICATE_AUX or word in _BASE_VERBS or _is_participle(word)


def _split_subject(tokens: list[str], finder) -> Optional[tuple[list[str], int]]:
    """Split "<subject> <verb> ..." at the first token `finder` accepts.

    The scan starts after the determiner phrase (a determiner never opens a
    predicate, and the token right after one is taken to be part of the
    subject).  Falls back to a det+1 split, absorbing mid-sentence adverbs
    into the subject.  Returns (subject tokens, verb index) or None.
    """
    if not tokens:
        return None
    start = 2 if tokens[0].lower() in _DETERMINERS else 1
    for i in range(start, len(tokens)):
        if finder(tokens[i]):
            return tokens[:i], i
    if tokens[0].lower() in _DETERMINERS and len(tokens) >= 3:
        i = 2
        while i < len(tokens) - 1 and tokens[i].lower() in _MID_ADVERBS:
            i += 1
        return tokens[:i], i
    if len(tokens) >= 2:
        return tokens[:1], 1
    return None


def _split_base_verb(tokens: list[str]) -> Optional[tuple[list[str], int]]:
    return _split_subject(tokens, lambda t: t.lower() in _BASE_VERBS)


def _split_participle(tokens: list[str]) -> Optional[tuple[list[str], int]]:
    if not tokens:
        return None
    start = 2 if tokens[0].lower() in _DETERMINERS else 1
    for i in range(start, len(tokens)):
        if _is_participle(tokens[i]):
            return tokens[:i], i
    return None


def _strip_copula_prefix(text: str) -> Optional[str]:
    """Drop a short "<subject> is/are/was/were " prefix from an answer."""
    match = re.match(
        r"^(?:the|a|an|this|that|these|those|it|they)\b(?:\s+\S+){0,3}?"
        r"\s+(?:is|are|was|were)\s+(.+)$",
        text,
        flags=re.IGNORECASE,
    )
    if match:
        return match.group(1)
    return None


def _normalize_subject(tokens: list[str]) -> str:
    # "vehicle(s)" is rendered "vehicle (s)" when it heads the sentence.
    return re.sub(r"(?<=\w)\(", " (", _join(tokens))


def _parse_yes_no_answer(answer: str) -> tuple[bool, str]:
    """Return (is_negative, trailing clause) for a yes/no style answer."""
    cleaned = _strip_final_punct(answer.strip())
    lowered = cleaned.lower()
    if lowered == "no":
        return True, ""
    if lowered == "yes":
        return False, ""
    if lowered.startswith("no,"):
        return True, cleaned[3:].strip()
    if lowered.startswith("yes,"):
        return False, cleaned[4:].strip()
    # Anything that is not an explicit "No" reads as an affirmation.
    return False, ""


def _looks_like_clause(answer: str) -> bool:
    return any(tok in _CLAUSE_MARKERS for tok in answer.lower().split())


# ---------------------------------------------------------------------------
# per-kind rewrite rules


def _rewrite_wh(tokens: list[str], answer: str) -> Optional[str]:
    first = tokens[0].lower()
    if first in {"which", "what", "who"}:
        return _rewrite_slot_first(tokens, answer)
    if first == "where":
        return _rewrite_where(tokens, answer)
    if first == "why":
        return _rewrite_why(tokens, answer)
    if first == "how":
        return _rewrite_how(tokens, answer)
    if first == "when":
        return _rewrite_when(tokens, answer)
    return None


def _rewrite_slot_first(tokens: list[str], answer: str) -> Optional[str]:
    """Which/What/Who: the answer replaces the wh-phrase at sentence start."""
    rest = tokens[1:]
    if not rest:
        return None
    pivot = None
    for i, tok in enumerate(rest):
        if _is_verbish(tok):
            pivot = i
            break
    if pivot is None:
        pivot = 1 if len(rest) > 1 else 0
    predicate = rest[pivot:]
    if not predicate:
        return None
    slot = _cap(_strip_final_punct(answer.strip()))
    return f"{slot} {_join(predicate)}"


def _rewrite_whats(tokens: list[str], answer: str) -> Optional[str]:
    """What's <NP>? -> "<NP> is <answer predicate>."."""
    first = tokens[0].lower()
    np_tokens = tokens[1:] if first == "what's" else tokens[2:]
    if not np_tokens:
        return None
    cleaned = _strip_final_punct(answer.strip())
    slot = _strip_copula_prefix(cleaned)
    if slot is None:
        slot = _decap(cleaned)
    return f"{_cap(_join(np_tokens))} is {slot}"


def _rewrite_where(tokens: list[str], answer: str) -> Optional[str]:
    if len(tokens) < 3:
        return None
    aux = tokens[1].lower()
    after = tokens[2:]
    slot = _location_slot(answer)
    if aux in {"is", "are", "was", "were"}:
        split = _split_participle(after)
        if split is None:
            subject, vp = after, []
        else:
            subject, i = split
            vp = after[i:]
        head = f"{_cap(_join(subject))} {aux}"
        if vp:
            head = f"{head} {_join(vp)}"
        return f"{head} {slot}"
    if aux in {"did", "does", "do"}:
        split = _split_base_verb(after)
        if split is None:
            return None
        subject, i = split
        verb = _inflect_for_aux(after[i], aux)
        rest = after[i + 1:]
        head = f"{_cap(_join(subject))} {verb}"
        if rest:
            head = f"{head} {_join(rest)}"
        return f"{head} {slot}"
    return None


def _location_slot(answer: str) -> str:
    cleaned = _strip_final_punct(answer.strip())
    parts = cleaned.split()
    if not parts:
        return cleaned
    if parts[0].lower() in _PREPOSITIONS:
        return _decap(cleaned)
    for i, tok in enumerate(parts[1:], start=1):
        if tok.lower() in {"in", "at", "on"}:
            return _join(parts[i:])
    if parts[0].lower() in {"a", "an", "the"}:
        return "in " + _decap(cleaned)
    return "in " + cleaned


def _rewrite_why(tokens: list[str], answer: str) -> Optional[str]:
    if len(tokens) < 3:
        return None
    aux = tokens[1].lower()
    after = tokens[2:]
    cleaned = _strip_final_punct(answer.strip())
    connector = "because" if _looks_like_clause(cleaned) else "because of"
    slot = _decap(cleaned)
    if aux in {"did", "does", "do"}:
        split = _split_base_verb(after)
        if split is None:
            return None
        subject, i = split
        verb = _inflect_for_aux(after[i], aux)
        rest = after[i + 1:]
        head = f"{_cap(_join(subject))} {verb}"
        if rest:
            head = f"{head} {_join(rest)}"
        return f"{head} {connector} {slot}"
    if aux in {"is", "are", "was", "were"}:
        split = _split_participle(after)
        if split is None:
            return None
        subject, i = split
        head = f"{_cap(_join(subject))} {aux} {_join(after[i:])}"
        return f"{head} {connector} {slot}"
    return None


def _rewrite_how(tokens: list[str], answer: str) -> Optional[str]:
    if len(tokens) < 3:
        return None
    aux = tokens[1].lower()
    after = tokens[2:]
    if aux == "did":
        split = _split_base_verb(after)
        if split is None:
            return None
        subject, i = split
        slot = _manner_slot(answer, _join(subject))
        # The verb keeps its base form here; only the auxiliary is dropped.
        return f"{_cap(_join(subject))} {_join(after[i:])} by {slot}"
    if aux in {"is", "are", "was", "were"}:
        if not after:
            return None
        cleaned = _strip_final_punct(answer.strip())
        slot = _strip_copula_prefix(cleaned) or _decap(cleaned)
        return f"{_cap(_join(after))} {aux} {slot}"
    return None


def _manner_slot(answer: str, subject: str) -> str:
    cleaned = _strip_final_punct(answer.strip())
    lowered = cleaned.lower()
    for copula in (" is ", " was ", " are ", " were "):
        prefix = subject.lower() + copula
        if lowered.startswith(prefix):
            return cleaned[len(prefix):]
    if lowered.startswith("by "):
        return cleaned[3:]
    return _decap(cleaned)


def _rewrite_when(tokens: list[str], answer: str) -> Optional[str]:
    if len(tokens) < 3:
        return None
    aux = tokens[1].lower()
    after = tokens[2:]
    cleaned = _strip_final_punct(answer.strip())
    parts = cleaned.split()
    if not parts:
        return None
    slot = _decap(cleaned) if parts[0].lower() in _PREPOSITIONS | {"a", "an", "the"} else cleaned
    if aux in {"did", "does", "do"}:
        split = _split_base_verb(after)
        if split is None:
            return None
        subject, i = split
        verb = _inflect_for_aux(after[i], aux)
        rest = after[i + 1:]
        head = f"{_cap(_join(subject))} {verb}"
        if rest:
            head = f"{head} {_join(rest)}"
        return f"{head} {slot}"
    if aux in {"is", "are", "was", "were"}:
        split = _split_participle(after)
        if split is None:
            return None
        subject, i = split
        return f"{_cap(_join(subject))} {aux} {_join(after[i:])} {slot}"
    return None


def _rewrite_how_many(tokens: list[str], answer: str) -> Optional[str]:
    """How many/much <noun> <aux> <subject> <verb> ...? -> slot after the verb."""
    aux_idx = None
    for i in range(2, len(tokens)):
        if tokens[i].lower() in _AUX_LEADS:
            aux_idx = i
            break
    if aux_idx is None or aux_idx + 1 >= len(tokens):
        return None
    aux = tokens[aux_idx].lower()
    after = tokens[aux_idx + 1:]
    slot = _decap(_strip_final_punct(answer.strip()))
    if after[0].lower() == "there":
        tail = after[1:]
        head = f"There {aux} {slot}"
        if tail:
            head = f"{head} {_join(tail)}"
        return head
    split = _split_base_verb(after)
    if split is None:
        return None
    subject, i = split
    rest = after[i + 1:]
    subject_text = _cap(_normalize_subject(subject))
    if aux in {"does", "do", "did"}:
        verb = _inflect_for_aux(after[i], aux)
        head = f"{subject_text} {verb} {slot}"
    else:
        head = f"{subject_text} {aux} {after[i]} {slot}"
    if rest:
        head = f"{head} {_join(rest)}"
    return head


def _inflect_for_aux(verb: str, aux: str) -> str:
    if aux == "did":
        return _past(verb)
    if aux == "does":
        return _third_singular(verb)
    return verb.lower()


def _rewrite_yes_no(tokens: list[str], answer: str) -> Optional[str]:
    first = tokens[0].lower()
    negative, clause = _parse_yes_no_answer(answer)
    body: Optional[str] = None
    if first in {"is", "are", "was", "were"} and len(tokens) > 1 and tokens[1].lower() == "there":
        body = _rewrite_existential(tokens, negative)
    elif first in {"can", "could", "will", "would", "shall", "should", "may", "might", "must"}:
        body = _rewrite_modal(tokens, negative)
    elif first in {"did", "does", "do"}:
        body = _rewrite_do_support(tokens, negative)
    elif first in {"is", "are", "was", "were", "am", "have", "has", "had"}:
        body = _rewrite_copula(tokens, negative)
    if body is None:
        return None
    if clause:
        body = f"{body}, {clause}"
    return body


def _rewrite_existential(tokens: list[str], negative: bool) -> Optional[str]:
    aux = tokens[0].lower()
    rest = tokens[2:]
    if not rest:
        return None
    if negative:
        return f"There {aux} not {_join(rest)}"
    if rest[0].lower() == "any":
        rest = ["some"] + rest[1:]
    return f"There {aux} {_join(rest)}"


def _rewrite_modal(tokens: list[str], negative: bool) -> Optional[str]:
    modal = tokens[0].lower()
    after = tokens[1:]
    split = _split_base_verb(after)
    if split is None:
        return None
    subject, i = split
    predicate = after[i:]
    core = list(subject)
    adverbs: list[str] = []
    while core and core[-1].lower() in _MID_ADVERBS:
        adverbs.insert(0, core.pop())
    if negative:
        negated = "cannot" if modal == "can" else f"{modal} not"
        return f"{_cap(_join(core))} {negated} {_join(predicate)}"
    if modal == "would":
        # Matches the affirmative counterfactual pattern: the modal vanishes
        # and the sentence keeps the bare predicate.
        return f"{_cap(_join(subject))} {_join(predicate)}"
    middle = f"{modal} {_join(adverbs)}" if adverbs else modal
    return f"{_cap(_join(core))} {middle} {_join(predicate)}"


def _rewrite_do_support(tokens: list[str], negative: bool) -> Optional[str]:
    aux = tokens[0].lower()
    after = tokens[1:]
    split = _split_base_verb(after)
    if split is None:
        return None
    subject, i = split
    verb = after[i]
    rest = after[i + 1:]
    if negative:
        head = f"{_cap(_join(subject))} {aux} not {verb.lower()}"
    else:
        head = f"{_cap(_join(subject))} {_inflect_for_aux(verb, aux)}"
    if rest:
        head = f"{head} {_join(rest)}"
    return head


def _rewrite_copula(tokens: list[str], negative: bool) -> Optional[str]:
    aux = tokens[0].lower()
    after = tokens[1:]
    if not after:
        return None
    split = _split_participle(after)
    if split is not None:
        subject, i = split
        predicate = after[i:]
    elif after[0].lower() in _DETERMINERS and len(after) >= 3:
        subject, predicate = after[:2], after[2:]
    elif len(after) >= 2:
        subject, predicate = after[:1], after[1:]
    else:
        return None
    joiner = f"{aux} not" if negative else aux
    return f"{_cap(_join(subject))} {joiner} {_join(predicate)}"


def _wh_fallback_body(tokens: list[str], kind: QuestionKind) -> str:
    drop = 2 if kind is QuestionKind.HOW_MANY else 1
    if kind is QuestionKind.WHATS and len(tokens) > 1 and tokens[1].lower() == "is":
        drop = 2
    return _join(tokens[drop:])
