import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smner.phonology import (UNK_PHONE, PhonemeInventory, RuleFileError, load_feature_table,
                             load_rules, normalize)

NOISY = "u hav to b KIDDDDING me".split()
CLEAN = "you have to be kidding me".split()


def test_normalize_examples():
    assert normalize("KIDDDDING") == "kidding"
    assert normalize("me") == "me"
    assert normalize("soooo") == "soo"
    assert normalize("it's") == "it's"
    assert normalize("he!!llo123") == "hello"


def test_noisy_phrase_matches_normalized_phrase(phonetic_encoder):
    for noisy, clean in zip(NOISY, CLEAN):
        assert phonetic_encoder.transliterate(noisy) == phonetic_encoder.transliterate(clean)


def test_expected_ipa_for_noisy_phrase(phonetic_encoder):
    expected = [["j", "u"], ["h", "æ", "v"], ["t", "ə"], ["b", "i"],
                ["k", "ɪ", "d", "ɪ", "ŋ"], ["m", "i"]]
    assert [phonetic_encoder.transliterate(w) for w in NOISY] == expected


def test_defence_defense_same_sequence(phonetic_encoder):
    seq = phonetic_encoder.transliterate("defence")
    assert seq == phonetic_encoder.transliterate("defense")
    assert seq == ["d", "ɪ", "f", "ɛ", "n", "s"]


def test_empty_word(phonetic_encoder):
    assert phonetic_encoder.transliterate("") == []
    assert phonetic_encoder.encode_chars("").shape == (0, phonetic_encoder.width)


def test_out_of_alphabet_emits_unk(phonetic_encoder):
    before = phonetic_encoder.unmatched_count
    # normalize strips digits/symbols; an unknown letter sequence still maps
    syms = phonetic_encoder.rules.apply("q")  # bare q has a default rule
    assert UNK_PHONE not in syms
    assert phonetic_encoder.unmatched_count == before


def test_unk_phone_features_all_zero(phonetic_encoder):
    assert np.array_equal(phonetic_encoder.articulatory_features(UNK_PHONE), np.zeros(21))
    assert np.array_equal(phonetic_encoder.articulatory_features("<never-seen>"), np.zeros(21))


def test_m_is_nasal(phonetic_encoder):
    table, _ = _table_with_names()
    nas = table["m"]["nas"]
    assert nas == 1.0
    assert table["p"]["nas"] == -1.0


def test_i_vs_small_cap_i_differ(phonetic_encoder):
    a = phonetic_encoder.articulatory_features("i")
    b = phonetic_encoder.articulatory_features("ɪ")
    assert not np.array_equal(a, b)


def _table_with_names():
    from importlib import resources

    text = (resources.files("smner") / "data" / "articulatory_features.csv").read_text("utf-8")
    lines = text.splitlines()
    names = lines[0].split(",")[1:]
    table = {}
    for line in lines[1:]:
        parts = line.split(",")
        table[parts[0]] = dict(zip(names, map(float, parts[1:])))
    return table, names


def test_feature_table_is_ternary_and_21_wide():
    table, names = _table_with_names()
    assert len(names) == 21
    for sym, row in table.items():
        assert len(row) == 21
        assert set(row.values()) <= {-1.0, 0.0, 1.0}


def test_encode_chars_shape_and_one_hot(phonetic_encoder):
    m = phonetic_encoder.encode_chars("me")
    inv = len(phonetic_encoder.inventory)
    assert m.shape == (2, inv + 21)
    assert np.array_equal(m[:, :inv].sum(axis=1), [1.0, 1.0])
    assert np.isin(m[:, inv:], (-1.0, 0.0, 1.0)).all()


def test_case_invariance(phonetic_encoder):
    assert np.array_equal(phonetic_encoder.encode_chars("ME"),
                          phonetic_encoder.encode_chars("me"))


def test_elongation_robustness(phonetic_encoder):
    assert np.array_equal(phonetic_encoder.encode_chars("kiddddding"),
                          phonetic_encoder.encode_chars("kidding"))


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=10))
@settings(max_examples=100, deadline=None)
def test_case_invariance_property(phonetic_encoder, word):
    upper = phonetic_encoder.encode_chars(word.upper())
    lower = phonetic_encoder.encode_chars(word)
    assert np.array_equal(upper, lower)


def test_determinism(phonetic_encoder):
    a = phonetic_encoder.transliterate("yesterday")
    b = phonetic_encoder.transliterate("yesterday")
    assert a == b
    assert np.array_equal(phonetic_encoder.encode_chars("yesterday"),
                          phonetic_encoder.encode_chars("yesterday"))


def test_rule_output_must_be_in_inventory():
    inv = PhonemeInventory(["a"])
    with pytest.raises(RuleFileError):
        load_rules(["x -> zz"], inv)


def test_rule_missing_arrow_rejected():
    inv = PhonemeInventory(["a"])
    with pytest.raises(RuleFileError):
        load_rules(["x a"], inv)


def test_longest_pattern_wins():
    inv = PhonemeInventory(["a", "b"])
    rules = load_rules(["x -> a", "xx -> b"], inv)
    assert rules.apply("xx") == ["b"]


def test_feature_table_rejects_wrong_width():
    with pytest.raises(RuleFileError):
        load_feature_table(["m," + ",".join(["1"] * 20)])


def test_feature_table_rejects_non_ternary():
    with pytest.raises(RuleFileError):
        load_feature_table(["m," + ",".join(["2"] * 21)])
