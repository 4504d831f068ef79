"""Shared BLSTM encoder plus the two architectures: the end-to-end dual-CRF
model and the stacked feature extractor with dual softmax heads."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from . import crf as crf_mod
from . import embeddings as emb_mod
from .corpus import derive_segmentation_labels, validate_bio
from .layers import BiLstm, Dense, bilstm_pool, bilstm_seq, dense_relu, param_rng

UNK_POS = "<unk-pos>"


@dataclass(frozen=True)
class HyperParams:
    char_hidden: int = 64
    word_hidden: int = 100
    dense_dim: int = 100
    pos_dim: int = 50
    dropout: float = 0.5
    alpha: float = 1.0


@dataclass(frozen=True)
class FeatureFlags:
    phonetics: bool = True
    pos: bool = True
    weighted_classes: bool = True
    subword_oov: bool = True
    pretrained: bool = True
    multitask: bool = True

    def disable(self, toggle):
        names = {
            "multitask": "multitask",
            "char-phonetics": "phonetics",
            "weighted-classes": "weighted_classes",
            "pos-vectors": "pos",
            "subword-oov": "subword_oov",
            "pretrained-embeddings": "pretrained",
        }
        if toggle not in names:
            raise ValueError(f"unknown toggle {toggle!r}")
        return replace(self, **{names[toggle]: False})


class Featurizer:
    """Frozen per-word inputs: word vector lookup honoring the feature flags."""

    def __init__(self, table, subword, phonetic_encoder, flags=FeatureFlags()):
        self.table = table
        self.subword = subword if flags.subword_oov else None
        self.phonetic = phonetic_encoder
        self.flags = flags
        self._cache = {}

    @property
    def word_dim(self):
        return self.table.dim

    def word_vector(self, surface):
        cached = self._cache.get(surface)
        if cached is not None:
            return cached
        if self.flags.pretrained:
            vec = emb_mod.lookup(surface, self.table, self.subword)
        elif self.subword is not None and surface:
            vec = self.subword.subword_vector(surface.lower())
        else:
            vec = self.table.vectors["<unk>"]
        self._cache[surface] = vec
        return vec

    def char_matrix(self, surface):
        return self.phonetic.encode_chars(surface)


class EncoderParams:
    """Char BLSTM + learned POS embeddings + word BLSTM + dense ReLU head."""

    def __init__(self, featurizer, tagset, hp=HyperParams(), seed=0):
        self.featurizer = featurizer
        self.hp = hp
        self.flags = featurizer.flags
        self.tagset = sorted(set(tagset))
        self.pos_index = {t: i for i, t in enumerate(self.tagset)}
        self.pos_index[UNK_POS] = len(self.tagset)

        width = featurizer.word_dim
        self.char_bilstm = None
        if self.flags.phonetics:
            self.char_bilstm = BiLstm("encoder.char", featurizer.phonetic.width,
                                      hp.char_hidden, seed)
            width += self.char_bilstm.output_dim
        self.pos_table = None
        if self.flags.pos:
            n = len(self.tagset) + 1
            init = 0.1 * param_rng(seed, "encoder.pos").standard_normal((n, hp.pos_dim))
            self.pos_table = ad.Parameter("encoder.pos", init)
            width += hp.pos_dim
        self.input_dim = width
        self.word_bilstm = BiLstm("encoder.word", width, hp.word_hidden, seed)
        self.dense = Dense("encoder.dense", self.word_bilstm.output_dim, hp.dense_dim, seed)

    def parameters(self):
        params = []
        if self.char_bilstm is not None:
            params += self.char_bilstm.parameters()
        if self.pos_table is not None:
            params.append(self.pos_table)
        params += self.word_bilstm.parameters() + self.dense.parameters()
        return params

    def encode(self, sentence, train=False, rng=None):
        """Per-token feature nodes z_i (width dense_dim).

        Dropout (train mode) sits on the char-pool output, the word-BLSTM
        input, and the word-BLSTM output.
        """
        p = self.hp.dropout
        a_rows = []
        for tok in sentence.tokens:
            parts = [ad.constant(self.featurizer.word_vector(tok.surface))]
            if self.pos_table is not None:
                idx = self.pos_index.get(tok.pos, self.pos_index[UNK_POS])
                parts.append(ad.row(self.pos_table, idx))
            if self.char_bilstm is not None:
                matrix = self.featurizer.char_matrix(tok.surface)
                char_rows = [ad.constant(matrix[i]) for i in range(matrix.shape[0])]
                h = bilstm_pool(char_rows, self.char_bilstm)
                parts.append(ad.dropout(h, p, train, rng))
            a = ad.concat(parts)
            a_rows.append(ad.dropout(a, p, train, rng))
        r_rows = bilstm_seq(a_rows, self.word_bilstm)
        return [dense_relu(ad.dropout(r, p, train, rng), self.dense) for r in r_rows]


def _label_indices(sentence, catalog):
    gold = sentence.gold_labels()
    if any(g is None for g in gold):
        raise ValueError("sentence has no gold labels")
    cat = [catalog.category_index[g] for g in gold]
    seg = [catalog.segmentation_index[s] for s in derive_segmentation_labels(gold)]
    return cat, seg


def _mean_weight(labels, weights):
    if weights is None:
        return 1.0
    return float(np.mean([weights[l] for l in labels]))


class E2EModel:
    """End-to-end encoder with one CRF head per task; trained jointly."""

    def __init__(self, catalog, tagset, featurizer, hp=HyperParams(), seed=0):
        self.catalog = catalog
        self.hp = hp
        self.alpha = hp.alpha
        self.encoder = EncoderParams(featurizer, tagset, hp, seed)
        self.multitask = featurizer.flags.multitask
        self.cat_crf = crf_mod.CrfParams("crf.cat", len(catalog.category_labels),
                                         hp.dense_dim, seed)
        self.seg_crf = None
        if self.multitask:
            self.seg_crf = crf_mod.CrfParams("crf.seg", len(catalog.segmentation_labels),
                                             hp.dense_dim, seed)

    def parameters(self):
        params = self.encoder.parameters() + self.cat_crf.parameters()
        if self.seg_crf is not None:
            params += self.seg_crf.parameters()
        return params

    def loss(self, sentence, train=False, rng=None, cat_weights=None, seg_weights=None):
        """alpha * seg_nll + cat_nll; each nll scaled by the sentence's mean
        gold-label class weight when weights are given."""
        cat_idx, seg_idx = _label_indices(sentence, self.catalog)
        z = self.encoder.encode(sentence, train, rng)
        gold = sentence.gold_labels()
        cat_nll = crf_mod.nll(z, self.cat_crf, cat_idx)
        cat_nll = ad.scale(cat_nll, _mean_weight(gold, cat_weights))
        if self.seg_crf is None or self.alpha == 0.0:
            return cat_nll
        seg_labels = derive_segmentation_labels(gold)
        seg_nll = crf_mod.nll(z, self.seg_crf, seg_idx)
        seg_nll = ad.scale(seg_nll, _mean_weight(seg_labels, seg_weights))
        return ad.add(cat_nll, ad.scale(seg_nll, self.alpha))

    def predict(self, sentence):
        """Viterbi over the categorization CRF, then BIO repair."""
        z = [r.value for r in self.encoder.encode(sentence, train=False)]
        scores = self.cat_crf.emissions(np.stack(z))
        path, _ = crf_mod.viterbi(scores, self.cat_crf.trans.value,
                                  self.cat_crf.start, self.cat_crf.stop)
        labels = [self.catalog.category_labels[i] for i in path]
        return validate_bio(labels, mode="repair")

    def tensors(self):
        return {p.name: p.value for p in self.parameters()}


class StackedExtractor:
    """Encoder with dual softmax heads; its z activations feed a standalone CRF."""

    def __init__(self, catalog, tagset, featurizer, hp=HyperParams(), seed=0):
        self.catalog = catalog
        self.hp = hp
        self.alpha = hp.alpha
        self.encoder = EncoderParams(featurizer, tagset, hp, seed)
        self.multitask = featurizer.flags.multitask
        self.cat_head = Dense("head.cat", hp.dense_dim, len(catalog.category_labels), seed)
        self.seg_head = None
        if self.multitask:
            self.seg_head = Dense("head.seg", hp.dense_dim,
                                  len(catalog.segmentation_labels), seed)

    def parameters(self):
        params = self.encoder.parameters() + self.cat_head.parameters()
        if self.seg_head is not None:
            params += self.seg_head.parameters()
        return params

    def loss(self, sentence, train=False, rng=None, cat_weights=None, seg_weights=None):
        """alpha * H_seg + H_cat with exact per-token class weighting."""
        cat_idx, seg_idx = _label_indices(sentence, self.catalog)
        z = self.encoder.encode(sentence, train, rng)
        gold = sentence.gold_labels()
        cat_w = np.array([cat_weights[g] for g in gold]) if cat_weights else None
        cat_logits = ad.add(ad.matmul(ad.stack_rows(z), self.cat_head.W), self.cat_head.b)
        total = weighted_cross_entropy(cat_logits, cat_idx, cat_w)
        if self.seg_head is None or self.alpha == 0.0:
            return total
        seg_labels = derive_segmentation_labels(gold)
        seg_w = np.array([seg_weights[s] for s in seg_labels]) if seg_weights else None
        seg_logits = ad.add(ad.matmul(ad.stack_rows(z), self.seg_head.W), self.seg_head.b)
        return ad.add(total, ad.scale(weighted_cross_entropy(seg_logits, seg_idx, seg_w),
                                      self.alpha))

    def extract(self, sentence):
        """Deterministic z features (dropout off), as an (n, dense_dim) array."""
        return np.stack([r.value for r in self.encoder.encode(sentence, train=False)])

    def predict_softmax(self, sentence):
        """Diagnostic decode: per-token argmax of the categorization head."""
        z = self.extract(sentence)
        logits = z @ self.cat_head.W.value + self.cat_head.b.value
        labels = [self.catalog.category_labels[i] for i in logits.argmax(axis=1)]
        return validate_bio(labels, mode="repair")

    def predict_with_crf(self, sentence, crf_params):
        z = self.extract(sentence)
        scores = crf_params.emissions(z)
        path, _ = crf_mod.viterbi(scores, crf_params.trans.value,
                                  crf_params.start, crf_params.stop)
        labels = [self.catalog.category_labels[i] for i in path]
        return validate_bio(labels, mode="repair")

    def tensors(self):
        return {p.name: p.value for p in self.parameters()}


def weighted_cross_entropy(logits_node, gold, weights=None):
    """Sum over tokens of w_t * (logsumexp(logits_t) - logits_t[gold_t])."""
    logits = logits_node.value
    n = logits.shape[0]
    if len(gold) != n:
        raise ValueError(f"logits rows {n} != gold length {len(gold)}")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
    value = float((w * (lse - logits[np.arange(n), gold])).sum())

    def vjp(g):
        soft = np.exp(shifted)
        soft /= soft.sum(axis=1, keepdims=True)
        d = soft.copy()
        d[np.arange(n), gold] -= 1.0
        return (float(g) * w[:, None] * d,)

    return ad.Node(value, (logits_node,), vjp)


@dataclass
class FeatureRecord:
    """Per-sentence z features with gold labels, for the stacked CRF phase."""
    gold: list[str]
    z: np.ndarray


def write_feature_records(records, path, header_lines=()):
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for rec in records:
            for label, row in zip(rec.gold, rec.z):
                fh.write(label + " " + " ".join(repr(float(v)) for v in row) + "\n")
            fh.write("\n")


def read_feature_records(path):
    records = []
    gold = []
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                continue
            if not line.strip():
                if rows:
                    records.append(FeatureRecord(gold, np.array(rows)))
                    gold, rows = [], []
                continue
            parts = line.split()
            gold.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    if rows:
        records.append(FeatureRecord(gold, np.array(rows)))
    return records


def extract_features(sentences, extractor):
    """One FeatureRecord per sentence, deterministic (dropout off)."""
    records = []
    for sent in sentences:
        gold = [g if g is not None else "O" for g in sent.gold_labels()]
        records.append(FeatureRecord(gold, extractor.extract(sent)))
    return records
