"""Entity-level precision/recall/F1, surface-form F1, and the ablation harness.

A predicted mention is a true positive iff its class, start, and end all
match a gold mention (exact-span scoring, WNUT convention). Surface-form
F1 deduplicates mentions by (class, surface) corpus-wide first, rewarding
diversity of recovered entities over repetition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import extract_mention_spans


@dataclass(frozen=True)
class EntityMention:
    cls: str
    start: int
    end: int
    surface: str


@dataclass
class PRF:
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @classmethod
    def from_counts(cls, tp, fp, fn):
        p = 100.0 * tp / (tp + fp) if tp + fp else 0.0
        r = 100.0 * tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f, tp, fp, fn)


@dataclass
class EvalReport:
    per_class: dict[str, PRF] = field(default_factory=dict)
    overall: PRF = field(default_factory=PRF)
    surface_form_f1: float = 0.0
    support: dict[str, int] = field(default_factory=dict)

    def to_dict(self):
        def prf(x):
            return {"precision": x.precision, "recall": x.recall, "f1": x.f1,
                    "tp": x.tp, "fp": x.fp, "fn": x.fn}

        return {
            "per_class": {c: prf(v) for c, v in sorted(self.per_class.items())},
            "overall": prf(self.overall),
            "surface_form_f1": self.surface_form_f1,
            "support": dict(sorted(self.support.items())),
        }


def extract_entities(labels, tokens):
    """Decode BIO labels into EntityMention spans (bare I-c starts a mention)."""
    mentions = []
    for cls, start, end in extract_mention_spans(labels):
        mentions.append(EntityMention(cls, start, end, " ".join(tokens[start:end])))
    return mentions


def _check_alignment(gold_corpus, pred_corpus):
    if len(gold_corpus) != len(pred_corpus):
        raise ValueError(
            f"gold has {len(gold_corpus)} sentences, predictions {len(pred_corpus)}"
        )
    for i, (g, p) in enumerate(zip(gold_corpus, pred_corpus)):
        if len(g) != len(p):
            raise ValueError(f"sentence {i}: gold length {len(g)} != predicted {len(p)}")


def entity_f1(gold_corpus, pred_corpus, surfaces=None):
    """Exact-match entity scoring; micro-averaged overall, per-class breakdown.

    ``gold_corpus`` and ``pred_corpus`` are aligned lists of label sequences;
    ``surfaces`` (same alignment) enables the surface-form metric.
    """
    _check_alignment(gold_corpus, pred_corpus)
    if surfaces is None:
        surfaces = [[""] * len(g) for g in gold_corpus]
    tp = {}
    fp = {}
    fn = {}
    support = {}
    gold_surface_set = set()
    pred_surface_set = set()
    for gold, pred, toks in zip(gold_corpus, pred_corpus, surfaces):
        gold_set = set(extract_mention_spans(gold))
        pred_set = set(extract_mention_spans(pred))
        for cls, s, e in gold_set:
            support[cls] = support.get(cls, 0) + 1
            gold_surface_set.add((cls, " ".join(toks[s:e]).lower()))
            if (cls, s, e) in pred_set:
                tp[cls] = tp.get(cls, 0) + 1
            else:
                fn[cls] = fn.get(cls, 0) + 1
        for cls, s, e in pred_set:
            pred_surface_set.add((cls, " ".join(toks[s:e]).lower()))
            if (cls, s, e) not in gold_set:
                fp[cls] = fp.get(cls, 0) + 1
    classes = sorted(set(tp) | set(fp) | set(fn) | set(support))
    report = EvalReport()
    for cls in classes:
        report.per_class[cls] = PRF.from_counts(tp.get(cls, 0), fp.get(cls, 0), fn.get(cls, 0))
    report.overall = PRF.from_counts(sum(tp.values()), sum(fp.values()), sum(fn.values()))
    report.support = support
    sf_tp = len(gold_surface_set & pred_surface_set)
    report.surface_form_f1 = PRF.from_counts(
        sf_tp, len(pred_surface_set) - sf_tp, len(gold_surface_set) - sf_tp
    ).f1
    return report


def surface_form_f1(gold_corpus, pred_corpus, surfaces):
    """F1 over (class, surface)-deduplicated mention sets."""
    return entity_f1(gold_corpus, pred_corpus, surfaces).surface_form_f1


KNOWN_TOGGLES = ("multitask", "char-phonetics", "weighted-classes",
                 "pos-vectors", "subword-oov", "pretrained-embeddings")


@dataclass
class AblationRow:
    name: str
    mean_f1: float
    delta: float
    f1_per_rep: list[float]


def ablation_run(train_fn, toggles, repetitions=3, base_seed=0):
    """Retrain with each component disabled and report mean F1 deltas.

    ``train_fn(toggle_or_none, seed)`` must run one full training and
    return its dev/test F1. Repetition r uses seed base_seed + r, so
    triplicate runs are reproducible.
    """
    for toggle in toggles:
        if toggle not in KNOWN_TOGGLES:
            raise ValueError(f"unknown toggle {toggle!r}")
    rows = []
    base_scores = [train_fn(None, base_seed + r) for r in range(repetitions)]
    base_mean = sum(base_scores) / len(base_scores)
    rows.append(AblationRow("base", base_mean, 0.0, base_scores))
    for toggle in toggles:
        scores = [train_fn(toggle, base_seed + r) for r in range(repetitions)]
        mean = sum(scores) / len(scores)
        rows.append(AblationRow(f"- {toggle}", mean, mean - base_mean, scores))
    return rows
