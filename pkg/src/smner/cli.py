"""Command-line surface: preprocess, stats, train, extract-features,
train-crf, predict, evaluate, ablate, gradcheck.

Configuration is a flat key=value file; ``--set key=value`` overrides
take precedence. The effective config is echoed into every output
artifact's header. Exit codes: 2 missing file, 3 validation failure,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import autodiff as ad
from . import corpus as corpus_mod
from . import crf as crf_mod
from . import embeddings as emb_mod
from . import evaluation as eval_mod
from . import gradcheck as gradcheck_mod
from . import report as report_mod
from . import train as train_mod
from .corpus import ColumnSpec, LabelCatalog
from .model import (E2EModel, FeatureFlags, Featurizer, HyperParams, StackedExtractor,
                    extract_features, read_feature_records, write_feature_records)
from .phonology import default_encoder

EXIT_MISSING_FILE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4

DEFAULTS = {
    "model": "stacked",
    "seed": 0,
    "epochs": 50,
    "patience": 8,
    "learning_rate": 0.001,
    "grad_clip_norm": 5.0,
    "alpha": 1.0,
    "dropout": 0.5,
    "class_weight_exponent": 0.5,
    "class_weight_o_floor": 0.5,
    "char_hidden": 64,
    "word_hidden": 100,
    "dense_dim": 100,
    "pos_dim": 50,
    "phonetics": True,
    "pos": True,
    "weighted_classes": True,
    "subword_oov": True,
    "pretrained": True,
    "multitask": True,
    "replace_hashtags": False,
    "subword_buckets": 2_000_000,
    "surface_col": 0,
    "pos_col": 1,
    "label_col": 2,
    "n_columns": 3,
    "repetitions": 3,
    "toggles": "multitask,char-phonetics,weighted-classes",
    "crf_iterations": 500,
    "crf_learning_rate": 0.05,
}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _coerce(value):
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def load_config(path, overrides):
    config = dict(DEFAULTS)
    if path:
        if not os.path.exists(path):
            raise CliError(f"config file not found: {path}", EXIT_MISSING_FILE)
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise CliError(f"{path}:{lineno}: expected key=value", EXIT_VALIDATION)
                key, value = line.split("=", 1)
                config[key.strip()] = _coerce(value.strip())
    for item in overrides:
        if "=" not in item:
            raise CliError(f"--set needs key=value, got {item!r}", EXIT_VALIDATION)
        key, value = item.split("=", 1)
        config[key] = _coerce(value)
    return config


def config_header(config):
    return [f"{k}={config[k]}" for k in sorted(config)]


def _require_file(config, key):
    path = config.get(key)
    if not path:
        raise CliError(f"config key {key!r} is required", EXIT_VALIDATION)
    if not os.path.exists(str(path)):
        raise CliError(f"{key}: file not found: {path}", EXIT_MISSING_FILE)
    return str(path)


def _column_spec(config):
    pos_col = config.get("pos_col")
    return ColumnSpec(
        surface=int(config["surface_col"]),
        pos=None if pos_col in (None, "none", -1) else int(pos_col),
        label=None if config.get("label_col") in (None, "none", -1) else int(config["label_col"]),
        n_columns=int(config["n_columns"]),
    )


def _load_corpus(config, key, preprocess=True):
    path = _require_file(config, key)
    with open(path, encoding="utf-8") as fh:
        try:
            sentences = corpus_mod.parse_conll(fh, _column_spec(config))
        except (corpus_mod.ParseError, corpus_mod.CatalogError) as exc:
            raise CliError(f"{path}: {exc}", EXIT_VALIDATION) from exc
    sentences, repairs = corpus_mod.repair_corpus(sentences)
    if repairs:
        print(f"warning: repaired {repairs} BIO violations in {path}", file=sys.stderr)
    if preprocess:
        sentences = [corpus_mod.preprocess(s, bool(config["replace_hashtags"]))
                     for s in sentences]
    return sentences


def _flags(config):
    return FeatureFlags(
        phonetics=bool(config["phonetics"]),
        pos=bool(config["pos"]),
        weighted_classes=bool(config["weighted_classes"]),
        subword_oov=bool(config["subword_oov"]),
        pretrained=bool(config["pretrained"]),
        multitask=bool(config["multitask"]),
    )


def _hyperparams(config):
    return HyperParams(
        char_hidden=int(config["char_hidden"]),
        word_hidden=int(config["word_hidden"]),
        dense_dim=int(config["dense_dim"]),
        pos_dim=int(config["pos_dim"]),
        dropout=float(config["dropout"]),
        alpha=float(config["alpha"]),
    )


def _train_config(config):
    return train_mod.TrainConfig(
        learning_rate=float(config["learning_rate"]),
        epochs=int(config["epochs"]),
        patience=int(config["patience"]),
        grad_clip_norm=float(config["grad_clip_norm"]),
        seed=int(config["seed"]),
        alpha=float(config["alpha"]),
        class_weight_exponent=float(config["class_weight_exponent"]),
        class_weight_o_floor=float(config["class_weight_o_floor"]),
        dropout=float(config["dropout"]),
        crf_iterations=int(config["crf_iterations"]),
        crf_learning_rate=float(config["crf_learning_rate"]),
    )


def _featurizer(config, flags):
    table = emb_mod.load_embeddings(_require_file(config, "embeddings_file"))
    buckets = None
    if config.get("bucket_file"):
        buckets = emb_mod.load_bucket_vectors(_require_file(config, "bucket_file"))
    subword = emb_mod.SubwordModel(table.dim, bucket_count=int(config["subword_buckets"]),
                                   bucket_vectors=buckets)
    encoder = default_encoder(config.get("rules_file"), config.get("features_file"))
    return Featurizer(table, subword, encoder, flags)


def _tagset(sentences):
    return sorted({t.pos for s in sentences for t in s.tokens})


def _build_model(config, catalog, tagset, featurizer):
    kind = config["model"]
    hp = _hyperparams(config)
    seed = int(config["seed"])
    if kind == "e2e":
        return E2EModel(catalog, tagset, featurizer, hp, seed)
    if kind == "stacked":
        return StackedExtractor(catalog, tagset, featurizer, hp, seed)
    raise CliError(f"unknown model kind {config['model']!r}", EXIT_VALIDATION)


def _save_model(model, config, path, crf=None):
    ad.save_checkpoint(model.tensors(), path)
    meta = {
        "model": config["model"],
        "entity_classes": model.catalog.entity_classes,
        "tagset": model.encoder.tagset,
        "config": {k: config[k] for k in sorted(config)},
    }
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    if crf is not None:
        crf_path = config.get("crf_checkpoint") or path + ".crf"
        ad.save_checkpoint({p.name: p.value for p in crf.parameters()}, crf_path)


def _load_model(config):
    path = _require_file(config, "checkpoint")
    with open(path + ".json", encoding="utf-8") as fh:
        meta = json.load(fh)
    saved = dict(meta["config"])
    saved.update({k: config[k] for k in ("embeddings_file", "bucket_file", "rules_file",
                                         "features_file") if config.get(k)})
    saved["model"] = meta["model"]
    catalog = LabelCatalog(meta["entity_classes"])
    featurizer = _featurizer(saved, _flags(saved))
    model = _build_model(saved, catalog, meta["tagset"], featurizer)
    tensors = ad.load_checkpoint(path)
    for p in model.parameters():
        if p.name not in tensors:
            raise CliError(f"checkpoint missing tensor {p.name!r}", EXIT_VALIDATION)
        if tensors[p.name].shape != p.value.shape:
            raise CliError(f"checkpoint tensor {p.name!r} has shape "
                           f"{tensors[p.name].shape}, expected {p.value.shape}",
                           EXIT_VALIDATION)
        p.value[...] = tensors[p.name]
    return model, saved


def _load_standalone_crf(config, catalog, feat_dim):
    path = _require_file(config, "crf_checkpoint")
    crf = crf_mod.make_standalone_crf(len(catalog.category_labels), feat_dim)
    tensors = ad.load_checkpoint(path)
    for p in crf.parameters():
        p.value[...] = tensors[p.name]
    return crf


def _out_path(config, default):
    return str(config.get("output") or default)


def cmd_preprocess(config):
    sentences = _load_corpus(config, "input_file")
    out = _out_path(config, "preprocessed.conll")
    with open(out, "w", encoding="utf-8") as fh:
        for line in config_header(config):
            fh.write(f"# {line}\n")
        fh.write(corpus_mod.serialize_conll(sentences))
    print(f"wrote {out}", file=sys.stderr)
    return 0


def cmd_stats(config):
    sentences = _load_corpus(config, "input_file", preprocess=False)
    stats = corpus_mod.corpus_stats(sentences, gold_required=False)
    payload = {"config": {k: config[k] for k in sorted(config)}, **stats.to_dict()}
    text = json.dumps(payload, indent=2)
    if config.get("output"):
        with open(str(config["output"]), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_train(config):
    train_sents = _load_corpus(config, "train_file")
    dev_sents = _load_corpus(config, "dev_file")
    catalog = LabelCatalog.from_corpus(train_sents + dev_sents)
    featurizer = _featurizer(config, _flags(config))
    model = _build_model(config, catalog, _tagset(train_sents + dev_sents), featurizer)
    tc = _train_config(config)
    ckpt = _out_path(config, "model.ckpt")
    if isinstance(model, E2EModel):
        log = train_mod.train_e2e(model, train_sents, dev_sents, tc)
        _save_model(model, config, ckpt)
    else:
        crf, log = train_mod.train_stacked(model, train_sents, dev_sents, tc)
        _save_model(model, config, ckpt, crf=crf)
    train_mod.write_train_log(log, ckpt + ".trainlog.jsonl",
                              header={k: str(config[k]) for k in sorted(config)})
    report_mod.save_training_figure(log, ckpt + ".curves.png")
    best = log.epochs[log.best_epoch - 1] if log.epochs else None
    if best:
        print(f"best epoch {log.best_epoch}: dev F1 {best.dev_f1:.2f}", file=sys.stderr)
    return 0


def cmd_extract_features(config):
    model, _ = _load_model(config)
    if not isinstance(model, StackedExtractor):
        raise CliError("extract-features requires a stacked checkpoint", EXIT_VALIDATION)
    sentences = _load_corpus(config, "input_file")
    out = _out_path(config, "features.txt")
    write_feature_records(extract_features(sentences, model), out,
                          header_lines=config_header(config))
    print(f"wrote {out}", file=sys.stderr)
    return 0


def cmd_train_crf(config):
    records = read_feature_records(_require_file(config, "features_in"))
    if not records:
        raise CliError("feature record file is empty", EXIT_VALIDATION)
    classes = sorted({g[2:] for rec in records for g in rec.gold if g != "O"})
    catalog = LabelCatalog(classes)
    crf = train_mod.fit_standalone_crf(records, catalog, _train_config(config))
    out = _out_path(config, "crf.ckpt")
    ad.save_checkpoint({p.name: p.value for p in crf.parameters()}, out)
    print(f"wrote {out}", file=sys.stderr)
    return 0


def cmd_predict(config):
    model, saved = _load_model(config)
    sentences = _load_corpus(config, "input_file")
    if isinstance(model, StackedExtractor):
        crf = _load_standalone_crf(config, model.catalog, model.hp.dense_dim)
        predict = lambda s: model.predict_with_crf(s, crf)
    else:
        predict = model.predict
    out = _out_path(config, "predictions.conll")
    with open(out, "w", encoding="utf-8") as fh:
        for line in config_header(config):
            fh.write(f"# {line}\n")
        for sent in sentences:
            pred = predict(sent)
            for tok, label in zip(sent.tokens, pred):
                gold = tok.gold if tok.gold is not None else "O"
                fh.write(f"{tok.surface}\t{tok.pos}\t{gold}\t{label}\n")
            fh.write("\n")
    print(f"wrote {out}", file=sys.stderr)
    return 0


def cmd_evaluate(config):
    path = _require_file(config, "pred_file")
    spec = ColumnSpec(surface=0, pos=1, label=2, n_columns=4)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    gold_corpus, pred_corpus, surfaces = [], [], []
    gold, pred, surf = [], [], []
    for lineno, line in enumerate(lines, start=1):
        if line.startswith("#"):
            continue
        if not line.strip():
            if gold:
                gold_corpus.append(gold)
                pred_corpus.append(pred)
                surfaces.append(surf)
                gold, pred, surf = [], [], []
            continue
        parts = line.split()
        if len(parts) != spec.n_columns:
            raise CliError(f"{path}:{lineno}: expected {spec.n_columns} columns",
                           EXIT_VALIDATION)
        surf.append(parts[0])
        gold.append(parts[2])
        pred.append(parts[3])
    if gold:
        gold_corpus.append(gold)
        pred_corpus.append(pred)
        surfaces.append(surf)
    try:
        rep = eval_mod.entity_f1(gold_corpus, pred_corpus, surfaces)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_VALIDATION) from exc
    out = _out_path(config, "report")
    payload = {"config": {k: config[k] for k in sorted(config)}, **rep.to_dict()}
    with open(out + ".json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    with open(out + ".txt", "w", encoding="utf-8") as fh:
        for line in config_header(config):
            fh.write(f"# {line}\n")
        fh.write(report_mod.format_report_table(rep) + "\n")
    with open(out + ".tsv", "w", encoding="utf-8") as fh:
        fh.write(report_mod.report_tsv(rep))
    report_mod.save_class_figure(rep, out + ".png")
    print(report_mod.format_report_table(rep))
    return 0


def cmd_ablate(config):
    train_sents = _load_corpus(config, "train_file")
    dev_sents = _load_corpus(config, "dev_file")
    catalog = LabelCatalog.from_corpus(train_sents + dev_sents)
    tagset = _tagset(train_sents + dev_sents)
    toggles = [t.strip() for t in str(config["toggles"]).split(",") if t.strip()]
    base_flags = _flags(config)
    tc = _train_config(config)

    def run_one(toggle, seed):
        flags = base_flags if toggle is None else base_flags.disable(toggle)
        featurizer = _featurizer(config, flags)
        cfg = dict(config)
        cfg["seed"] = seed
        model = _build_model(cfg, catalog, tagset, featurizer)
        local_tc = train_mod.TrainConfig(**{**tc.__dict__, "seed": seed})
        if isinstance(model, E2EModel):
            log = train_mod.train_e2e(model, train_sents, dev_sents, local_tc)
            return max(r.dev_f1 for r in log.epochs)
        _, log = train_mod.train_stacked(model, train_sents, dev_sents, local_tc)
        return log.crf_dev_f1

    try:
        rows = eval_mod.ablation_run(run_one, toggles, int(config["repetitions"]),
                                     base_seed=int(config["seed"]))
    except ValueError as exc:
        raise CliError(str(exc), EXIT_VALIDATION) from exc
    out = _out_path(config, "ablation")
    with open(out + ".tsv", "w", encoding="utf-8") as fh:
        fh.write(report_mod.ablation_tsv(rows))
    with open(out + ".txt", "w", encoding="utf-8") as fh:
        for line in config_header(config):
            fh.write(f"# {line}\n")
        fh.write(report_mod.format_ablation_table(rows) + "\n")
    report_mod.save_ablation_figure(rows, out + ".png")
    print(report_mod.format_ablation_table(rows))
    return 0


def cmd_gradcheck(config):
    results = gradcheck_mod.run_all(int(config["seed"]))
    failed = False
    for name, err, ok in results:
        print(f"{name:<16} max rel error {err:.3e}  {'ok' if ok else 'FAIL'}")
        failed = failed or not ok
    return 1 if failed else 0


COMMANDS = {
    "preprocess": cmd_preprocess,
    "stats": cmd_stats,
    "train": cmd_train,
    "extract-features": cmd_extract_features,
    "train-crf": cmd_train_crf,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="smner",
        description="Multitask BLSTM-CRF NER for noisy social-media text.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config value")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, args.overrides)
        return COMMANDS[args.command](config)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except (train_mod.NumericError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (corpus_mod.ValidationError, corpus_mod.CatalogError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
