import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smner import embeddings as emb


@pytest.mark.parametrize("data,expected", [
    ("", 0x811C9DC5),
    ("a", 0xE40C292C),
    ("foobar", 0xBF9CF968),
])
def test_fnv1a_reference_vectors(data, expected):
    assert emb.fnv1a_32(data) == expected


def test_fnv1a_utf8_bytes():
    assert emb.fnv1a_32("é") == emb.fnv1a_32("é".encode("utf-8"))


def test_char_ngrams_short_word_is_whole_wrapped():
    assert emb.char_ngrams("ab") == ["<ab", "ab>", "<ab>"]
    assert emb.char_ngrams("x", n_min=4, n_max=6) == ["<x>"]


def test_char_ngrams_window_sizes():
    grams = emb.char_ngrams("cat")
    assert "<ca" in grams and "at>" in grams and "<cat>" in grams
    assert all(3 <= len(g) <= 6 for g in grams)


def test_subword_vector_deterministic():
    m1 = emb.SubwordModel(10)
    m2 = emb.SubwordModel(10)
    assert np.array_equal(m1.subword_vector("boston"), m2.subword_vector("boston"))


def test_subword_vector_shared_ngrams_are_close():
    model = emb.SubwordModel(25)
    a = model.subword_vector("kidding")
    b = model.subword_vector("kiddding")
    c = model.subword_vector("zqxwvu")
    assert np.linalg.norm(a - b) < np.linalg.norm(a - c)


def test_subword_model_respects_explicit_buckets():
    vec = np.ones(4)
    bucket = emb.fnv1a_32("<ab>") % 100
    model = emb.SubwordModel(4, bucket_count=100, n_min=4, n_max=6,
                             bucket_vectors={bucket: vec})
    assert np.array_equal(model.subword_vector("ab"), vec)


def test_subword_rejects_empty_word():
    with pytest.raises(ValueError):
        emb.SubwordModel(4).subword_vector("")
    with pytest.raises(ValueError):
        emb.SubwordModel(4, bucket_count=0)


@given(st.text(alphabet="abcdefghij", min_size=1, max_size=8))
@settings(max_examples=50, deadline=None)
def test_subword_vector_bounded(word):
    model = emb.SubwordModel(8)
    vec = model.subword_vector(word)
    assert vec.shape == (8,)
    assert np.abs(vec).max() <= 0.5 / 8 + 1e-12


LINES = [
    "the 0.1 0.2 0.3",
    "cat 1.0 0.0 0.0",
    "the 9.0 9.0 9.0",
]


def test_load_embeddings_first_wins_on_duplicates():
    table = emb.load_embeddings(LINES)
    assert table.dim == 3
    assert np.array_equal(table.vectors["the"], [0.1, 0.2, 0.3])
    assert table.duplicate_warnings == 1


def test_load_embeddings_header_detection():
    table = emb.load_embeddings(["2 3"] + LINES[:2])
    assert table.dim == 3
    assert "cat" in table


def test_load_embeddings_ragged_rejected():
    with pytest.raises(emb.EmbeddingLoadError, match="line 2"):
        emb.load_embeddings(["a 1 2 3", "b 1 2"])


def test_load_embeddings_empty_rejected():
    with pytest.raises(emb.EmbeddingLoadError):
        emb.load_embeddings([])


def test_reserved_tokens_always_present():
    table = emb.load_embeddings(LINES[:2])
    for tok in emb.RESERVED:
        assert tok in table
    again = emb.load_embeddings(LINES[:2])
    assert np.array_equal(table.vectors["<unk>"], again.vectors["<unk>"])


def test_reserved_tokens_not_overwritten_when_in_file():
    table = emb.load_embeddings(["<unk> 5 5 5", "cat 1 0 0"])
    assert np.array_equal(table.vectors["<unk>"], [5.0, 5.0, 5.0])


def test_lookup_order_exact_then_lower_then_subword_then_unk():
    table = emb.load_embeddings(["Cat 2 2 2", "cat 1 0 0"])
    model = emb.SubwordModel(3)
    assert np.array_equal(emb.lookup("Cat", table, model), [2, 2, 2])
    assert np.array_equal(emb.lookup("CAT", table, model), [1, 0, 0])
    assert np.array_equal(emb.lookup("dog", table, model), model.subword_vector("dog"))
    assert np.array_equal(emb.lookup("dog", table, None), table.vectors["<unk>"])


def test_load_bucket_vectors():
    buckets = emb.load_bucket_vectors(["7 0.5 0.5", "", "9 -1 2"])
    assert set(buckets) == {7, 9}
    assert np.array_equal(buckets[9], [-1.0, 2.0])
    with pytest.raises(emb.EmbeddingLoadError):
        emb.load_bucket_vectors(["1 0.5", "2 0.5 0.5"])
