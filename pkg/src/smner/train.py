"""Adam-style optimization loops for both architectures, with seeded
shuffling, early stopping on dev entity F1, and the two-phase stacked
pipeline (extractor training, then full-batch CRF fitting)."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import crf as crf_mod
from .corpus import compute_class_weights, segmentation_weights
from .evaluation import entity_f1
from .model import extract_features


class NumericError(FloatingPointError):
    """A non-finite gradient or loss during training."""


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 50
    patience: int = 8
    grad_clip_norm: float = 5.0
    seed: int = 0
    alpha: float = 1.0
    class_weight_exponent: float = 0.5
    class_weight_o_floor: float = 0.5
    dropout: float = 0.5
    crf_iterations: int = 500
    crf_learning_rate: float = 0.05
    crf_l2: float = 1e-4
    crf_grad_tol: float = 1e-5

    def __post_init__(self):
        for name in ("learning_rate", "beta1", "beta2", "epsilon"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.patience > self.epochs:
            raise ValueError("patience must be <= epochs")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_f1: float
    wall_time: float

    def to_dict(self):
        return {"epoch": self.epoch, "train_loss": self.train_loss,
                "dev_f1": self.dev_f1, "wall_time": self.wall_time}


@dataclass
class TrainLog:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    extractor_dev_f1: float | None = None
    crf_dev_f1: float | None = None


class AdamOptimizer:
    """Bias-corrected first/second-moment updates with global-norm clipping."""

    def __init__(self, params, config):
        self.params = list(params)
        self.config = config
        self.m = {p.name: np.zeros_like(p.value) for p in self.params}
        self.v = {p.name: np.zeros_like(p.value) for p in self.params}
        self.t = 0

    def step(self):
        cfg = self.config
        self.t += 1
        grads = {}
        sq = 0.0
        for p in self.params:
            if not np.isfinite(p.grad).all():
                raise NumericError(f"non-finite gradient in parameter {p.name!r}")
            grads[p.name] = p.grad
            sq += float((p.grad * p.grad).sum())
        norm = np.sqrt(sq)
        scale = 1.0
        if cfg.grad_clip_norm > 0 and norm > cfg.grad_clip_norm:
            scale = cfg.grad_clip_norm / norm
        correct1 = 1.0 - cfg.beta1 ** self.t
        correct2 = 1.0 - cfg.beta2 ** self.t
        for p in self.params:
            g = grads[p.name] * scale
            m = self.m[p.name]
            v = self.v[p.name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            p.value -= cfg.learning_rate * (m / correct1) / (np.sqrt(v / correct2) + cfg.epsilon)
        return norm


def adaptive_step(optimizer):
    """One optimizer update from the currently populated gradients."""
    return optimizer.step()


def _class_weight_maps(sentences, catalog, config, enabled):
    if not enabled:
        return None, None
    cat_w = compute_class_weights(sentences, catalog,
                                  exponent=config.class_weight_exponent,
                                  o_floor=config.class_weight_o_floor)
    return cat_w, segmentation_weights(cat_w, catalog)


def dev_entity_f1(model, dev_sentences, predict=None):
    predict = predict or model.predict
    pred = [predict(s) for s in dev_sentences]
    gold = [s.gold_labels() for s in dev_sentences]
    surfaces = [s.surfaces() for s in dev_sentences]
    return entity_f1(gold, pred, surfaces).overall.f1


def _snapshot(model):
    return {name: arr.copy() for name, arr in model.tensors().items()}


def _restore(model, snapshot):
    for p in model.parameters():
        p.value[...] = snapshot[p.name]


def _run_epochs(model, train_sents, dev_sents, config, step_losses=None,
                dev_predict=None):
    """Shared loop: per-epoch shuffle, one sentence per update, early stopping."""
    if not train_sents:
        raise ValueError("training corpus is empty")
    cat_w, seg_w = _class_weight_maps(train_sents, model.catalog, config,
                                      model.encoder.flags.weighted_classes)
    optimizer = AdamOptimizer(model.parameters(), config)
    shuffle_rng = np.random.default_rng([config.seed, 13])
    dropout_rng = np.random.default_rng([config.seed, 7])
    log = TrainLog()
    best_f1 = -1.0
    best = _snapshot(model)
    stale = 0
    order = np.arange(len(train_sents))
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        shuffle_rng.shuffle(order)
        total = 0.0
        for i in order:
            sent = train_sents[i]
            for p in optimizer.params:
                p.zero_grad()
            loss = model.loss(sent, train=True, rng=dropout_rng,
                              cat_weights=cat_w, seg_weights=seg_w)
            if not np.isfinite(loss.value):
                raise NumericError(f"non-finite loss on sentence {sent.source_id!r}")
            ad.backward(loss)
            optimizer.step()
            total += float(loss.value)
            if step_losses is not None:
                step_losses.append(float(loss.value))
        f1 = dev_entity_f1(model, dev_sents, dev_predict)
        log.epochs.append(EpochRecord(epoch, total / len(train_sents), f1,
                                      time.perf_counter() - t0))
        if f1 > best_f1:
            best_f1 = f1
            best = _snapshot(model)
            log.best_epoch = epoch
            stale = 0
        else:
            stale += 1
        # patience 0 stops after the first epoch by contract
        if stale >= config.patience:
            break
    _restore(model, best)
    return log


def train_e2e(model, train_sents, dev_sents, config, step_losses=None):
    """Train the end-to-end dual-CRF model; returns the TrainLog. The model is
    left at its best-dev-F1 checkpoint."""
    return _run_epochs(model, train_sents, dev_sents, config, step_losses)


def fit_standalone_crf(records, catalog, config, seed=None, feat_dim=None):
    """Full-batch fit of the stacked model's CRF on extracted features.

    Adam updates on total nll plus L2(crf_l2); stops after crf_iterations
    or when the gradient norm drops below crf_grad_tol.
    """
    if not records:
        raise ValueError("no feature records to fit")
    feat_dim = feat_dim if feat_dim is not None else records[0].z.shape[1]
    crf = crf_mod.make_standalone_crf(len(catalog.category_labels), feat_dim,
                                      seed=config.seed if seed is None else seed)
    gold_idx = [[catalog.category_index[g] for g in rec.gold] for rec in records]
    cfg = TrainConfig(learning_rate=config.crf_learning_rate, seed=config.seed,
                      grad_clip_norm=0.0)
    optimizer = AdamOptimizer(crf.parameters(), cfg)
    for _ in range(config.crf_iterations):
        for p in crf.parameters():
            p.zero_grad()
        total = None
        for rec, gold in zip(records, gold_idx):
            loss = crf_mod.nll(rec.z, crf, gold)
            total = loss if total is None else ad.add(total, loss)
        for p in crf.parameters():
            reg = ad.scale(ad.sum_all(ad.mul(p, p)), config.crf_l2)
            total = ad.add(total, reg)
        ad.backward(total)
        norm = optimizer.step()
        if norm < config.crf_grad_tol:
            break
    return crf


def train_stacked(extractor, train_sents, dev_sents, config, step_losses=None):
    """Two-phase stacked pipeline.

    Phase 1 trains the extractor on its weighted cross-entropy multitask
    loss with early stopping (dev F1 via the softmax diagnostic decode).
    Phase 2 extracts z features for the training set and fits the
    standalone CRF on them. Returns (crf, TrainLog); the log records both
    the extractor's own dev F1 and the CRF's dev F1.
    """
    log = _run_epochs(extractor, train_sents, dev_sents, config, step_losses,
                      dev_predict=extractor.predict_softmax)
    records = extract_features(train_sents, extractor)
    crf = fit_standalone_crf(records, extractor.catalog, config)
    log.extractor_dev_f1 = dev_entity_f1(extractor, dev_sents,
                                         extractor.predict_softmax)
    log.crf_dev_f1 = dev_entity_f1(
        extractor, dev_sents, lambda s: extractor.predict_with_crf(s, crf))
    return crf, log


def write_train_log(log, path, header=None):
    """Line-oriented JSON records, one per epoch."""
    import json

    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(json.dumps({"config": header}) + "\n")
        for rec in log.epochs:
            fh.write(json.dumps(rec.to_dict()) + "\n")
        summary = {"best_epoch": log.best_epoch}
        if log.extractor_dev_f1 is not None:
            summary["extractor_dev_f1"] = log.extractor_dev_f1
            summary["crf_dev_f1"] = log.crf_dev_f1
        fh.write(json.dumps(summary) + "\n")
