"""Deterministic English sample corpus and treebank.

Real evaluations should point at actual resources (a tokenized PTB-style
text file, a UD CoNLL-U treebank); those cannot be redistributed here, so
this module grows a small but genuinely English stand-in from a hand-built
lexicon and a recursive clause grammar. Sentences come with consistent
dependency trees (UD-flavored labels), number agreement, long-tailed
lexeme frequencies, and attachment ambiguity, which keeps the downstream
tasks from saturating.

Everything is a pure function of (seed, sentence index).
"""

from __future__ import annotations

import numpy as np

from .corpusio import Treebank, TreebankSentence
from .rngstream import indexed_stream

NOUNS = [
    "cat", "dog", "farmer", "child", "bird", "teacher", "river", "house",
    "student", "horse", "garden", "door", "book", "woman", "man", "tree",
    "letter", "street", "city", "village", "market", "bridge", "boat",
    "train", "lamp", "table", "chair", "bottle", "basket", "apple", "stone",
    "flower", "cloud", "storm", "morning", "evening", "song", "story",
    "picture", "map", "road", "field", "forest", "lake", "island", "tower",
    "wall", "gate", "yard", "barn", "mill", "shop", "clerk", "baker",
    "guard", "king", "queen", "knight", "poet", "sailor", "merchant",
    "hunter", "shepherd", "neighbor", "friend", "brother", "sister",
    "uncle", "cousin", "painter", "singer", "dancer", "writer", "reader",
    "player", "runner", "rider", "driver", "keeper", "builder", "weaver",
    "potter", "tailor", "butcher", "grocer", "judge", "mayor", "pupil",
    "doctor", "nurse", "pilot", "window", "castle", "harbor", "meadow",
    "valley", "candle", "mirror", "carpet", "pillow", "kettle",
]
TRANS_VERBS = [
    "chase", "see", "find", "bring", "carry", "hold", "lift", "push",
    "pull", "watch", "follow", "greet", "help", "visit", "thank", "trust",
    "teach", "feed", "paint", "clean", "fix", "build", "buy", "sell",
    "borrow", "return", "open", "close", "break", "mend", "count",
    "measure", "move", "place", "choose", "gather", "collect", "write",
    "read", "praise", "blame", "invite", "warn", "remember", "forget",
]
INTRANS_VERBS = [
    "sleep", "run", "walk", "swim", "jump", "dance", "sing", "laugh",
    "smile", "wait", "rest", "arrive", "leave", "fall", "rise", "sit",
    "stand", "travel", "wander", "shout", "whisper", "tremble", "yawn",
    "stumble", "vanish",
]
ADJECTIVES = [
    "old", "young", "small", "large", "tall", "short", "quiet", "loud",
    "bright", "dark", "heavy", "light", "warm", "cold", "clever", "gentle",
    "brave", "shy", "tired", "busy", "happy", "angry", "calm", "strange",
    "narrow", "wide", "clean", "dusty", "golden", "silver", "wooden",
    "green", "blue", "red", "white", "black", "gray", "early", "late",
    "distant",
]
ADVERBS = [
    "quickly", "slowly", "quietly", "loudly", "carefully", "suddenly",
    "often", "rarely", "always", "never", "soon", "again", "twice",
    "gladly", "calmly", "eagerly", "barely", "nearly", "finally", "alone",
]
PREPOSITIONS = [
    "in", "on", "under", "near", "behind", "beside", "above", "below",
    "across", "through", "around", "past", "toward", "beyond", "within",
]
SG_DETS = ["the", "a", "this", "that", "each", "every"]
PL_DETS = ["the", "these", "those", "some", "many", "few"]

IRREGULAR_PAST = {
    "see": "saw", "find": "found", "bring": "brought", "hold": "held",
    "buy": "bought", "sell": "sold", "break": "broke", "choose": "chose",
    "write": "wrote", "read": "read", "teach": "taught", "feed": "fed",
    "sleep": "slept", "run": "ran", "swim": "swam", "sing": "sang",
    "leave": "left", "fall": "fell", "rise": "rose", "sit": "sat",
    "stand": "stood", "forget": "forgot",
}


def _pluralize(noun: str) -> str:
    if noun.endswith(("s", "x", "ch", "sh")):
        return noun + "es"
    if noun.endswith("y") and noun[-2] not in "aeiou":
        return noun[:-1] + "ies"
    return noun + "s"


def _third_sg(verb: str) -> str:
    return _pluralize(verb)


def _past(verb: str) -> str:
    if verb in IRREGULAR_PAST:
        return IRREGULAR_PAST[verb]
    if verb.endswith("e"):
        return verb + "d"
    if verb.endswith("y") and verb[-2] not in "aeiou":
        return verb[:-1] + "ied"
    return verb + "ed"


def _zipfish(rng: np.random.Generator, n: int) -> int:
    # long-tailed lexeme choice; rank 0 is most frequent
    weights = 1.0 / (np.arange(n) + 2.0)
    return int(rng.choice(n, p=weights / weights.sum()))


class _Builder:
    """Accumulates tokens while recording (head, deprel) per token."""

    def __init__(self):
        self.tokens: list[str] = []
        self.upos: list[str] = []
        self.heads: list[int] = []
        self.deprels: list[str] = []

    def add(self, form: str, tag: str) -> int:
        self.tokens.append(form)
        self.upos.append(tag)
        self.heads.append(0)
        self.deprels.append("dep")
        return len(self.tokens)   # 1-based index

    def attach(self, child: int, head: int, deprel: str) -> None:
        self.heads[child - 1] = head
        self.deprels[child - 1] = deprel


def _gen_np(b: _Builder, rng: np.random.Generator, depth: int
            ) -> tuple[int, bool]:
    """Emit a noun phrase; returns (noun index, is_plural)."""
    plural = rng.random() < 0.25
    dets = PL_DETS if plural else SG_DETS
    det_idx = b.add(dets[_zipfish(rng, len(dets))], "DET")
    adj_indices = []
    while rng.random() < 0.3 and len(adj_indices) < 2:
        adj_indices.append(
            b.add(ADJECTIVES[_zipfish(rng, len(ADJECTIVES))], "ADJ"))
    lemma = NOUNS[_zipfish(rng, len(NOUNS))]
    noun_idx = b.add(_pluralize(lemma) if plural else lemma, "NOUN")
    b.attach(det_idx, noun_idx, "det")
    for a in adj_indices:
        b.attach(a, noun_idx, "amod")
    if depth < 2 and rng.random() < 0.22:
        _gen_pp(b, rng, depth + 1, noun_idx, "nmod")
    if depth < 1 and rng.random() < 0.10:
        _gen_relative(b, rng, depth + 1, noun_idx, plural)
    return noun_idx, plural


def _gen_pp(b: _Builder, rng: np.random.Generator, depth: int,
            attach_to: int, deprel: str) -> None:
    prep_idx = b.add(PREPOSITIONS[_zipfish(rng, len(PREPOSITIONS))], "ADP")
    noun_idx, _ = _gen_np(b, rng, depth)
    b.attach(prep_idx, noun_idx, "case")
    b.attach(noun_idx, attach_to, deprel)


def _gen_relative(b: _Builder, rng: np.random.Generator, depth: int,
                  noun_idx: int, plural: bool) -> None:
    that_idx = b.add("that", "PRON")
    verb_idx = _gen_predicate(b, rng, depth, plural, allow_pp=False)
    b.attach(that_idx, verb_idx, "nsubj")
    b.attach(verb_idx, noun_idx, "acl")


def _gen_predicate(b: _Builder, rng: np.random.Generator, depth: int,
                   subject_plural: bool, allow_pp: bool = True) -> int:
    transitive = rng.random() < 0.62
    lemma = (TRANS_VERBS if transitive else INTRANS_VERBS)[
        _zipfish(rng, len(TRANS_VERBS) if transitive else len(INTRANS_VERBS))]
    past = rng.random() < 0.45
    if past:
        form = _past(lemma)
    elif subject_plural:
        form = lemma
    else:
        form = _third_sg(lemma)
    verb_idx = b.add(form, "VERB")
    obj_idx = None
    if transitive:
        obj_idx, _ = _gen_np(b, rng, depth + 1)
        b.attach(obj_idx, verb_idx, "obj")
    if allow_pp and rng.random() < 0.32:
        # attachment ambiguity: to the object noun or to the verb
        if obj_idx is not None and rng.random() < 0.5:
            _gen_pp(b, rng, depth + 1, obj_idx, "nmod")
        else:
            _gen_pp(b, rng, depth + 1, verb_idx, "obl")
    if rng.random() < 0.22:
        adv_idx = b.add(ADVERBS[_zipfish(rng, len(ADVERBS))], "ADV")
        b.attach(adv_idx, verb_idx, "advmod")
    return verb_idx


def _gen_clause(b: _Builder, rng: np.random.Generator) -> int:
    subj_idx, plural = _gen_np(b, rng, 0)
    verb_idx = _gen_predicate(b, rng, 0, plural)
    b.attach(subj_idx, verb_idx, "nsubj")
    return verb_idx


def sample_parsed_sentence(seed: int, index: int) -> TreebankSentence:
    """English sentence ``index`` with its dependency tree."""
    rng = indexed_stream(seed, "english-sentence", index)
    b = _Builder()
    root_verb = _gen_clause(b, rng)
    b.attach(root_verb, 0, "root")
    if rng.random() < 0.12:
        cc_idx = b.add("and", "CCONJ")
        second = _gen_clause(b, rng)
        b.attach(cc_idx, second, "cc")
        b.attach(second, root_verb, "conj")
    return TreebankSentence(
        tokens=tuple(b.tokens), upos=tuple(b.upos),
        heads=tuple(b.heads), deprels=tuple(b.deprels),
    )


def english_sentences(seed: int, count: int, offset: int = 0) -> list[str]:
    """Plain tokenized lines (for LM corpora and vocabulary building)."""
    return [
        " ".join(sample_parsed_sentence(seed, offset + i).tokens)
        for i in range(count)
    ]


def english_treebank(seed: int, count: int, offset: int = 0) -> Treebank:
    return Treebank(tuple(
        sample_parsed_sentence(seed, offset + i) for i in range(count)
    ))
