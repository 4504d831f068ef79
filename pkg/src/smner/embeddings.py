"""Pretrained word vectors with a deterministic subword-bucket OOV fallback.

OOV words are covered by hashing their character n-grams (n in [3, 6],
boundary-marked) into buckets with 32-bit FNV-1a and averaging the bucket
vectors. Bucket vectors come from a companion file when given; otherwise
each is generated on demand from a PRNG keyed by its bucket index, so
near-misspellings still land near correct spellings via shared n-grams.
"""

from __future__ import annotations

import numpy as np

RESERVED = ("<url>", "<emoji>", "<tag>", "<num>", "<unk>")

FNV_OFFSET = 0x811C9DC5
FNV_PRIME = 0x01000193


class EmbeddingLoadError(ValueError):
    """Malformed embedding or bucket-vector file."""


def fnv1a_32(data):
    """32-bit FNV-1a over UTF-8 bytes."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & 0xFFFFFFFF
    return h


def char_ngrams(word, n_min=3, n_max=6):
    """Boundary-wrapped character n-grams; whole wrapped word if it is too short."""
    wrapped = f"<{word}>"
    grams = [wrapped[i:i + n] for n in range(n_min, n_max + 1)
             for i in range(len(wrapped) - n + 1)]
    return grams if grams else [wrapped]


class SubwordModel:
    """Hash-bucketed n-gram vectors of a fixed dimension."""

    def __init__(self, dim, bucket_count=2_000_000, n_min=3, n_max=6,
                 bucket_vectors=None, seed=12345):
        if bucket_count <= 0:
            raise ValueError("bucket_count must be positive")
        self.dim = dim
        self.bucket_count = bucket_count
        self.n_min = n_min
        self.n_max = n_max
        self.seed = seed
        self._buckets = dict(bucket_vectors or {})

    def bucket_vector(self, bucket):
        vec = self._buckets.get(bucket)
        if vec is None:
            rng = np.random.default_rng([self.seed, bucket])
            vec = rng.uniform(-0.5, 0.5, size=self.dim) / self.dim
            self._buckets[bucket] = vec
        return vec

    def subword_vector(self, word):
        """Mean bucket vector over the word's character n-grams."""
        if not word:
            raise ValueError("word must be non-empty")
        grams = char_ngrams(word, self.n_min, self.n_max)
        acc = np.zeros(self.dim)
        for gram in grams:
            acc += self.bucket_vector(fnv1a_32(gram) % self.bucket_count)
        return acc / len(grams)


class EmbeddingTable:
    """word -> vector map with reserved-token vectors always present."""

    def __init__(self, dim, vectors, warnings=0):
        self.dim = dim
        self.vectors = vectors
        self.duplicate_warnings = warnings
        for i, tok in enumerate(RESERVED):
            if tok not in self.vectors:
                rng = np.random.default_rng([977, i])
                self.vectors[tok] = rng.uniform(-0.1, 0.1, size=dim)

    def __contains__(self, word):
        return word in self.vectors

    def __len__(self):
        return len(self.vectors)


def load_embeddings(path_or_lines):
    """Read text-format 'word v1 ... vd' lines; optional 'count dim' header."""
    if isinstance(path_or_lines, str):
        with open(path_or_lines, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = [l.rstrip("\n") for l in path_or_lines]
    vectors = {}
    dim = None
    warnings = 0
    start = 0
    if lines:
        head = lines[0].split()
        if len(head) == 2:
            try:
                int(head[0])
                dim = int(head[1])
                start = 1
            except ValueError:
                pass
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        parts = line.split()
        word, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
        if len(values) != dim:
            raise EmbeddingLoadError(f"line {lineno}: {len(values)} values, expected {dim}")
        if word in vectors:
            warnings += 1
            continue
        vectors[word] = np.array([float(v) for v in values])
    if dim is None:
        raise EmbeddingLoadError("embedding file is empty")
    return EmbeddingTable(dim, vectors, warnings)


def lookup(word, table, subword_model=None):
    """In-vocab -> stored vector (case-folded); OOV -> subword vector or <unk>."""
    vec = table.vectors.get(word)
    if vec is None:
        vec = table.vectors.get(word.lower())
    if vec is not None:
        return vec
    if subword_model is not None and word:
        return subword_model.subword_vector(word.lower())
    return table.vectors["<unk>"]


def load_bucket_vectors(path_or_lines):
    """Optional companion file 'bucket-index v1 ... vd'."""
    if isinstance(path_or_lines, str):
        with open(path_or_lines, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = list(path_or_lines)
    buckets = {}
    dim = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split()
        idx = int(parts[0])
        vec = np.array([float(v) for v in parts[1:]])
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise EmbeddingLoadError(f"line {lineno}: {vec.size} values, expected {dim}")
        buckets[idx] = vec
    return buckets
