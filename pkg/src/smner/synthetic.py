"""Deterministic synthetic corpora and toy embeddings for tests and the
acceptance suite. Everything is generated from a seed; no files needed."""

from __future__ import annotations

import numpy as np

from .corpus import LabelCatalog, Sentence, Token
from .embeddings import EmbeddingTable

PERSONS = ["zoran", "mikel", "tasha", "brent", "olga", "ravi", "nadia", "kyle"]
LOCATIONS = ["paris", "oslo", "cairo", "lima", "quito", "milan", "perth", "kyoto"]
GROUPS = ["red sox", "blue jays", "alpha team", "green bay", "delta crew", "iron band"]

FILLERS = [
    "been listenin to music all week", "u hav to b kidding me",
    "i think im in luv", "so tired of this rain", "cant wait for the weekend",
    "that was such a good game", "need more coffee right now",
    "this song is stuck in my head", "why is it so cold today",
    "just got home from work",
]

TEMPLATES = [
    ("i met {person} yesterday", "person"),
    ("{person} is my best friend", "person"),
    ("talked to {person} about it", "person"),
    ("we flew to {location} today", "location"),
    ("{location} is beautiful this time of year", "location"),
    ("she moved to {location} last month", "location"),
    ("the {group} won again last night", "group"),
    ("go {group} go", "group"),
    ("i love watching the {group} play", "group"),
]

_VERBS = {"met", "is", "talked", "flew", "moved", "won", "go", "love", "watching",
          "been", "listenin", "hav", "b", "kidding", "think", "wait", "was", "need",
          "got", "play"}
_FUNCTION = {"i", "my", "we", "she", "the", "to", "u", "me", "im", "in", "so", "of",
             "this", "that", "for", "a", "all", "such", "more", "it", "about",
             "cant", "why", "just", "from", "time", "last", "best"}


def _pos_tag(word, is_entity):
    if is_entity:
        return "^"
    if word in _VERBS:
        return "V"
    if word in _FUNCTION:
        return "D"
    return "N"


def _entity_tokens(name, cls):
    words = name.split()
    toks = [Token(words[0], _pos_tag(words[0], True), f"B-{cls}")]
    toks += [Token(w, _pos_tag(w, True), f"I-{cls}") for w in words[1:]]
    return toks


def _plain_tokens(text):
    return [Token(w, _pos_tag(w, False), "O") for w in text.split()]


def toy_catalog():
    return LabelCatalog(["person", "location", "group"])


def make_toy_corpus(seed=0, n_train=50, n_dev=20):
    """Small entity-rich corpus drawn from fixed templates; (train, dev)."""
    rng = np.random.default_rng([seed, 101])
    lexicon = {"person": PERSONS, "location": LOCATIONS, "group": GROUPS}
    sentences = []
    total = n_train + n_dev
    for i in range(total):
        if i % 5 == 4:
            sentences.append(Sentence(tuple(_plain_tokens(
                FILLERS[int(rng.integers(len(FILLERS)))])), source_id=f"toy-{i}"))
            continue
        template, cls = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
        name = lexicon[cls][int(rng.integers(len(lexicon[cls])))]
        tokens = []
        for word in template.split():
            if word.startswith("{"):
                tokens.extend(_entity_tokens(name, cls))
            else:
                tokens.append(Token(word, _pos_tag(word, False), "O"))
        sentences.append(Sentence(tuple(tokens), source_id=f"toy-{i}"))
    return sentences[:n_train], sentences[n_train:]


def make_skewed_corpus(seed=0, n_train=40, n_dev=16, tokens_per_sentence=14):
    """Corpus skewed to ~95% O tokens: long filler context, one short entity."""
    rng = np.random.default_rng([seed, 202])
    lexicon = {"person": PERSONS, "location": LOCATIONS, "group": GROUPS}
    classes = sorted(lexicon)
    sentences = []
    for i in range(n_train + n_dev):
        tokens = []
        while len(tokens) < tokens_per_sentence - 2:
            tokens.extend(_plain_tokens(FILLERS[int(rng.integers(len(FILLERS)))]))
        tokens = tokens[: tokens_per_sentence - 1]
        cls = classes[int(rng.integers(len(classes)))]
        name = lexicon[cls][int(rng.integers(len(lexicon[cls])))].split()[0]
        pos = int(rng.integers(len(tokens) + 1))
        tokens.insert(pos, Token(name, "^", f"B-{cls}"))
        sentences.append(Sentence(tuple(tokens), source_id=f"skew-{i}"))
    return sentences[:n_train], sentences[n_train:]


def toy_vocabulary(sentences_groups):
    words = set()
    for group in sentences_groups:
        for sent in group:
            words.update(w.lower() for w in sent.surfaces())
    return sorted(words)


def make_toy_embeddings(sentences_groups, dim=20, seed=0):
    """Seeded vectors; entity words cluster around a per-class centroid so the
    toy task is learnable quickly."""
    rng = np.random.default_rng([seed, 303])
    centroids = {
        "person": rng.normal(size=dim), "location": rng.normal(size=dim),
        "group": rng.normal(size=dim),
    }
    entity_class = {}
    for cls, names in (("person", PERSONS), ("location", LOCATIONS), ("group", GROUPS)):
        for name in names:
            for w in name.split():
                entity_class[w] = cls
    vectors = {}
    for word in toy_vocabulary(sentences_groups):
        wrng = np.random.default_rng([seed, 404, abs(hash_word(word))])
        if word in entity_class:
            vectors[word] = centroids[entity_class[word]] + 0.2 * wrng.normal(size=dim)
        else:
            vectors[word] = 0.5 * wrng.normal(size=dim)
    return EmbeddingTable(dim, vectors)


def hash_word(word):
    """Stable (non-salted) word hash for seeding per-word streams."""
    h = 2166136261
    for byte in word.encode("utf-8"):
        h = ((h ^ byte) * 16777619) & 0xFFFFFFFF
    return h


def toy_tagset():
    return ["^", "V", "D", "N"]


def write_embedding_file(table, path):
    with open(path, "w", encoding="utf-8") as fh:
        for word in sorted(table.vectors):
            fh.write(word + " " + " ".join(repr(float(v)) for v in table.vectors[word]) + "\n")
