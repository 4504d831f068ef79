import json

import numpy as np
import pytest

from smner import autodiff as ad
from smner import train as tr
from smner.model import E2EModel, FeatureRecord, HyperParams, StackedExtractor
from smner.synthetic import make_toy_corpus, toy_catalog, toy_tagset

HP = HyperParams(char_hidden=4, word_hidden=8, dense_dim=6, pos_dim=3, dropout=0.25)


def small_config(**kw):
    base = dict(epochs=2, patience=2, seed=0, crf_iterations=30)
    base.update(kw)
    return tr.TrainConfig(**base)


@pytest.fixture(scope="module")
def small_corpus():
    return make_toy_corpus(seed=3, n_train=6, n_dev=4)


def adam_reference(grad_fn, theta0, cfg, steps):
    """Closed-form Adam (no clipping) for a deterministic gradient function."""
    theta = theta0.copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    for t in range(1, steps + 1):
        g = grad_fn(theta)
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        m_hat = m / (1 - cfg.beta1 ** t)
        v_hat = v / (1 - cfg.beta2 ** t)
        theta = theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return theta


def test_adam_matches_closed_form_on_quadratic():
    cfg = tr.TrainConfig(learning_rate=0.1, grad_clip_norm=0.0, epochs=1, patience=0)
    target = np.array([1.0, -2.0, 0.5])
    theta = ad.Parameter("theta", np.zeros(3))
    opt = tr.AdamOptimizer([theta], cfg)
    for _ in range(10):
        theta.zero_grad()
        diff = ad.add(theta, ad.constant(-target))
        ad.backward(ad.scale(ad.sum_all(ad.mul(diff, diff)), 0.5))
        opt.step()
    ref = adam_reference(lambda th: th - target, np.zeros(3), cfg, 10)
    assert np.allclose(theta.value, ref, atol=1e-12)


def test_adam_global_norm_clipping():
    cfg = tr.TrainConfig(learning_rate=0.1, grad_clip_norm=1.0, epochs=1, patience=0)
    a = ad.Parameter("a", np.zeros(3))
    b = ad.Parameter("b", np.zeros(4))
    opt = tr.AdamOptimizer([a, b], cfg)
    a.grad[:] = 3.0
    b.grad[:] = 4.0
    norm = opt.step()
    assert norm == pytest.approx(np.sqrt(9 * 3 + 16 * 4))
    # after clipping to unit norm, both params move by lr with m_hat/sqrt(v_hat)=1
    assert np.allclose(a.value, b.value[:3])


def test_adam_rejects_non_finite_gradient():
    cfg = small_config()
    p = ad.Parameter("p", np.zeros(2))
    opt = tr.AdamOptimizer([p], cfg)
    p.grad[:] = [np.nan, 0.0]
    with pytest.raises(tr.NumericError, match="'p'"):
        opt.step()


def test_config_validation():
    with pytest.raises(ValueError):
        tr.TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        tr.TrainConfig(epochs=2, patience=3)


def test_e2e_training_loss_decreases(toy_featurizer, small_corpus):
    train_sents, dev_sents = small_corpus
    model = E2EModel(toy_catalog(), toy_tagset(), toy_featurizer, HP, seed=0)
    losses = []
    log = tr.train_e2e(model, train_sents, dev_sents,
                       small_config(epochs=4, patience=4), step_losses=losses)
    assert len(log.epochs) == 4
    assert log.epochs[-1].train_loss < log.epochs[0].train_loss
    assert len(losses) == 4 * len(train_sents)


def test_training_is_deterministic(toy_featurizer, small_corpus):
    train_sents, dev_sents = small_corpus
    results = []
    for _ in range(2):
        model = E2EModel(toy_catalog(), toy_tagset(), toy_featurizer, HP, seed=5)
        tr.train_e2e(model, train_sents, dev_sents, small_config(seed=5))
        results.append(model.tensors())
    for name in results[0]:
        assert np.array_equal(results[0][name], results[1][name])


def test_patience_zero_runs_exactly_one_epoch(toy_featurizer, small_corpus):
    train_sents, dev_sents = small_corpus
    model = E2EModel(toy_catalog(), toy_tagset(), toy_featurizer, HP, seed=0)
    log = tr.train_e2e(model, train_sents, dev_sents,
                       small_config(epochs=5, patience=0))
    assert len(log.epochs) == 1


def test_early_stopping_restores_best_epoch(toy_featurizer, small_corpus):
    train_sents, dev_sents = small_corpus
    model = E2EModel(toy_catalog(), toy_tagset(), toy_featurizer, HP, seed=1)
    log = tr.train_e2e(model, train_sents, dev_sents,
                       small_config(epochs=3, patience=3))
    best = max(log.epochs, key=lambda r: r.dev_f1)
    assert log.best_epoch == min(r.epoch for r in log.epochs if r.dev_f1 == best.dev_f1)
    # restored weights must reproduce the recorded best dev F1
    assert tr.dev_entity_f1(model, dev_sents) == pytest.approx(best.dev_f1)


def test_empty_corpus_rejected(toy_featurizer, small_corpus):
    _, dev_sents = small_corpus
    model = E2EModel(toy_catalog(), toy_tagset(), toy_featurizer, HP, seed=0)
    with pytest.raises(ValueError):
        tr.train_e2e(model, [], dev_sents, small_config())


def test_fit_standalone_crf_overfits_separable_features():
    # features are one-hot in the gold label: the CRF must learn to read them
    catalog = toy_catalog()
    labels = catalog.category_labels
    rng = np.random.default_rng(0)
    records = []
    for _ in range(8):
        idx = rng.integers(0, len(labels), size=5)
        z = np.eye(len(labels))[idx] + 0.01 * rng.normal(size=(5, len(labels)))
        records.append(FeatureRecord([labels[i] for i in idx], z))
    cfg = small_config(crf_iterations=150)
    crf = tr.fit_standalone_crf(records, catalog, cfg)
    from smner.crf import viterbi
    correct = total = 0
    for rec in records:
        path, _ = viterbi(crf.emissions(rec.z), crf.trans.value, crf.start, crf.stop)
        gold = [catalog.category_index[g] for g in rec.gold]
        correct += sum(p == g for p, g in zip(path, gold))
        total += len(gold)
    assert correct / total > 0.95


def test_fit_standalone_crf_l2_shrinks_weights():
    catalog = toy_catalog()
    rng = np.random.default_rng(1)
    records = [FeatureRecord(["O", "B-person"], rng.normal(size=(2, 4)))]
    light = tr.fit_standalone_crf(records, catalog, small_config(crf_l2=1e-6))
    heavy = tr.fit_standalone_crf(records, catalog, small_config(crf_l2=10.0))
    assert np.abs(heavy.W.value).sum() < np.abs(light.W.value).sum()


def test_fit_standalone_crf_grad_tol_stops():
    catalog = toy_catalog()
    records = [FeatureRecord(["O"], np.zeros((1, 4)))]
    cfg = small_config(crf_iterations=500, crf_grad_tol=1e3)  # stops immediately
    crf = tr.fit_standalone_crf(records, catalog, cfg)
    fresh = tr.fit_standalone_crf(records, catalog,
                                  small_config(crf_iterations=1, crf_grad_tol=1e3))
    assert np.array_equal(crf.trans.value, fresh.trans.value)


def test_train_stacked_pipeline(toy_featurizer, small_corpus):
    train_sents, dev_sents = small_corpus
    model = StackedExtractor(toy_catalog(), toy_tagset(), toy_featurizer, HP, seed=0)
    crf, log = tr.train_stacked(model, train_sents, dev_sents,
                                small_config(epochs=2, patience=2, crf_iterations=20))
    assert log.extractor_dev_f1 is not None
    assert log.crf_dev_f1 is not None
    pred = model.predict_with_crf(dev_sents[0], crf)
    assert len(pred) == len(dev_sents[0])


def test_write_train_log(tmp_path, toy_featurizer, small_corpus):
    train_sents, dev_sents = small_corpus
    model = E2EModel(toy_catalog(), toy_tagset(), toy_featurizer, HP, seed=0)
    log = tr.train_e2e(model, train_sents, dev_sents, small_config())
    path = tmp_path / "log.jsonl"
    tr.write_train_log(log, path, header={"seed": 0})
    lines = [json.loads(l) for l in path.read_text().splitlines()]
    assert lines[0] == {"config": {"seed": 0}}
    assert lines[1]["epoch"] == 1
    assert "best_epoch" in lines[-1]


def test_checkpoint_reproduces_dev_f1(tmp_path, toy_featurizer, small_corpus):
    train_sents, dev_sents = small_corpus
    model = E2EModel(toy_catalog(), toy_tagset(), toy_featurizer, HP, seed=2)
    tr.train_e2e(model, train_sents, dev_sents, small_config())
    f1 = tr.dev_entity_f1(model, dev_sents)
    path = tmp_path / "model.ckpt"
    ad.save_checkpoint(model.tensors(), path)

    fresh = E2EModel(toy_catalog(), toy_tagset(), toy_featurizer, HP, seed=99)
    loaded = ad.load_checkpoint(path)
    for p in fresh.parameters():
        p.value[...] = loaded[p.name]
    assert tr.dev_entity_f1(fresh, dev_sents) == pytest.approx(f1)
    preds_a = [model.predict(s) for s in dev_sents]
    preds_b = [fresh.predict(s) for s in dev_sents]
    assert preds_a == preds_b
