"""Finite-difference gradient suites, shared by the CLI command and tests."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import crf as crf_mod
from .corpus import Sentence, Token
from .embeddings import EmbeddingTable
from .layers import BiLstm, Dense, LstmParams, bilstm_pool, bilstm_seq, dense_relu, lstm_step
from .model import E2EModel, Featurizer, FeatureFlags, HyperParams, StackedExtractor
from .phonology import default_encoder

TOLERANCE = 1e-4


def _small_hp():
    return HyperParams(char_hidden=4, word_hidden=6, dense_dim=5, pos_dim=3,
                       dropout=0.0, alpha=1.0)


def _tiny_sentence():
    return Sentence((
        Token("been", "V", "O"),
        Token("trey", "^", "B-person"),
        Token("paris", "^", "B-location"),
    ))


def _tiny_featurizer(seed=0):
    rng = np.random.default_rng([seed, 1])
    words = ["been", "trey", "paris"]
    table = EmbeddingTable(4, {w: rng.normal(size=4) for w in words})
    return Featurizer(table, None, default_encoder(), FeatureFlags(subword_oov=False))


def check_dense(seed=0):
    rng = np.random.default_rng([seed, 2])
    dense = Dense("gc.dense", 4, 3, seed)
    x = rng.normal(size=4)

    def loss():
        return ad.sum_all(dense_relu(ad.constant(x), dense))

    return ad.finite_difference_check(loss, dense.parameters())


def check_lstm_steps(seed=0, steps=3):
    rng = np.random.default_rng([seed, 3])
    params = LstmParams("gc.lstm", 3, 4, seed)
    xs = [rng.normal(size=3) for _ in range(steps)]

    def loss():
        h = ad.constant(np.zeros(4))
        c = ad.constant(np.zeros(4))
        for x in xs:
            h, c = lstm_step(ad.constant(x), h, c, params)
        return ad.sum_all(ad.mul(h, h))

    return ad.finite_difference_check(loss, params.parameters())


def check_bilstm(seed=0):
    rng = np.random.default_rng([seed, 4])
    bi = BiLstm("gc.bi", 3, 4, seed)
    rows = [rng.normal(size=3) for _ in range(4)]

    def loss():
        nodes = [ad.constant(r) for r in rows]
        pooled = bilstm_pool(nodes, bi)
        seq = bilstm_seq(nodes, bi)
        total = ad.sum_all(ad.mul(pooled, pooled))
        for s in seq:
            total = ad.add(total, ad.sum_all(ad.mul(s, s)))
        return total

    return ad.finite_difference_check(loss, bi.parameters())


def check_softmax(seed=0):
    rng = np.random.default_rng([seed, 5])
    w = ad.Parameter("gc.soft.W", rng.normal(size=(3, 4)))
    target = rng.normal(size=(3, 4))

    def loss():
        return ad.sum_all(ad.mul(ad.row_softmax(w), ad.constant(target)))

    return ad.finite_difference_check(loss, [w])


def check_crf(seed=0, n=4, k=3, feat=5):
    rng = np.random.default_rng([seed, 6])
    crf = crf_mod.CrfParams("gc.crf", k, feat, seed)
    z = ad.Parameter("gc.crf.z", rng.normal(size=(n, feat)))
    gold = [int(g) for g in rng.integers(k, size=n)]

    def loss():
        emissions = ad.add(ad.matmul(z, crf.W), crf.b)
        return crf_mod.nll_node(emissions, crf, gold)

    return ad.finite_difference_check(loss, crf.parameters() + [z])


def check_e2e(seed=0):
    from .synthetic import toy_catalog

    model = E2EModel(toy_catalog(), ["V", "^"], _tiny_featurizer(seed), _small_hp(), seed)
    sent = _tiny_sentence()

    def loss():
        return model.loss(sent)

    # every parameter tensor is covered; coordinates are sampled for speed
    return ad.finite_difference_check(loss, model.parameters(), max_coords=20,
                                      rng=np.random.default_rng([seed, 99]))


def check_stacked(seed=0):
    from .synthetic import toy_catalog

    weights = {l: 1.0 + 0.25 * i for i, l in enumerate(toy_catalog().category_labels)}
    seg_weights = {"O": 0.5, "B": 1.0, "I": 1.5}
    model = StackedExtractor(toy_catalog(), ["V", "^"], _tiny_featurizer(seed),
                             _small_hp(), seed)
    sent = _tiny_sentence()

    def loss():
        return model.loss(sent, cat_weights=weights, seg_weights=seg_weights)

    return ad.finite_difference_check(loss, model.parameters(), max_coords=20,
                                      rng=np.random.default_rng([seed, 98]))


SUITES = (
    ("dense_relu", check_dense),
    ("lstm_steps", check_lstm_steps),
    ("bilstm", check_bilstm),
    ("row_softmax", check_softmax),
    ("crf_nll", check_crf),
    ("e2e_loss", check_e2e),
    ("stacked_loss", check_stacked),
)


def run_all(seed=0):
    """Run every suite; returns list of (name, max relative error, passed)."""
    results = []
    for name, fn in SUITES:
        err = fn(seed)
        results.append((name, err, err < TOLERANCE))
    return results
