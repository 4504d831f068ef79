"""CoNLL-style corpus ingestion, BIO hygiene, class weights, and statistics."""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class ParseError(ValueError):
    """Malformed input file (ragged rows etc.)."""


class CatalogError(ValueError):
    """A label outside the declared catalog."""


class ValidationError(ValueError):
    """A BIO scheme violation in strict mode."""


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str = "X"
    gold: str | None = None


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    source_id: str = ""

    def __len__(self):
        return len(self.tokens)

    def surfaces(self):
        return [t.surface for t in self.tokens]

    def gold_labels(self):
        return [t.gold for t in self.tokens]


@dataclass(frozen=True)
class ColumnSpec:
    """Which whitespace-separated columns hold what; n_columns fixes row width."""
    surface: int = 0
    pos: int | None = 1
    label: int | None = 2
    n_columns: int = 3


@dataclass
class LabelCatalog:
    """Deterministic label orderings for the categorization and segmentation tasks."""

    entity_classes: list[str]
    category_labels: list[str] = field(init=False)
    segmentation_labels: tuple[str, ...] = ("O", "B", "I")

    def __post_init__(self):
        self.entity_classes = sorted(set(self.entity_classes))
        self.category_labels = ["O"]
        for cls in self.entity_classes:
            self.category_labels += [f"B-{cls}", f"I-{cls}"]
        self.category_index = {l: i for i, l in enumerate(self.category_labels)}
        self.segmentation_index = {l: i for i, l in enumerate(self.segmentation_labels)}

    @classmethod
    def from_corpus(cls, sentences):
        classes = set()
        for sent in sentences:
            for tok in sent.tokens:
                if tok.gold and tok.gold != "O":
                    classes.add(_split_label(tok.gold)[1])
        return cls(sorted(classes))


def _split_label(label):
    if label == "O":
        return "O", None
    if len(label) > 2 and label[1] == "-" and label[0] in "BI":
        return label[0], label[2:]
    raise CatalogError(f"label {label!r} is not O, B-<class>, or I-<class>")


def parse_conll(stream, column_spec=ColumnSpec(), catalog=None):
    """Parse blank-line separated sentences; '#'-prefixed lines are comments.

    ``stream`` is an iterable of lines or a whole string. Ragged rows raise
    ParseError with the 1-based line number.
    """
    if isinstance(stream, str):
        lines = stream.splitlines()
    else:
        lines = [l.rstrip("\n") for l in stream]
    sentences = []
    tokens = []
    start_line = None
    for lineno, line in enumerate(lines, start=1):
        if line.startswith("#"):
            continue
        if not line.strip():
            if tokens:
                sentences.append(Sentence(tuple(tokens), source_id=f"line-{start_line}"))
                tokens = []
            continue
        parts = line.split()
        if len(parts) != column_spec.n_columns:
            raise ParseError(
                f"line {lineno}: expected {column_spec.n_columns} columns, got {len(parts)}"
            )
        if not tokens:
            start_line = lineno
        gold = parts[column_spec.label] if column_spec.label is not None else None
        if gold is not None:
            kind, cls = _split_label(gold)
            if catalog is not None and gold not in catalog.category_index:
                raise CatalogError(f"line {lineno}: label {gold!r} not in catalog")
        pos = parts[column_spec.pos] if column_spec.pos is not None else "X"
        tokens.append(Token(surface=parts[column_spec.surface], pos=pos, gold=gold))
    if tokens:
        sentences.append(Sentence(tuple(tokens), source_id=f"line-{start_line}"))
    return sentences


def serialize_conll(sentences, include_pos=True):
    out = []
    for sent in sentences:
        for tok in sent.tokens:
            cols = [tok.surface]
            if include_pos:
                cols.append(tok.pos)
            cols.append(tok.gold if tok.gold is not None else "O")
            out.append("\t".join(cols))
        out.append("")
    return "\n".join(out) + "\n" if out else ""


URL_RE = re.compile(r"^(https?://|www\.)\S+$", re.IGNORECASE)
TAG_RE = re.compile(r"^@\w+$")
HASHTAG_RE = re.compile(r"^#\w+$")
NUM_RE = re.compile(r"^[+-]?\d+([.,:/\-]\d+)*%?$")
# Common emoji blocks; a token is an emoji if it is non-empty after dropping
# joiners/variation selectors and every remaining char is in an emoji range.
_EMOJI_RANGES = (
    (0x1F300, 0x1F5FF), (0x1F600, 0x1F64F), (0x1F680, 0x1F6FF),
    (0x1F900, 0x1FAFF), (0x2600, 0x27BF), (0x1F1E6, 0x1F1FF),
    (0x2B00, 0x2BFF), (0x1F000, 0x1F0FF),
)
_JOINERS = {0x200D, 0xFE0E, 0xFE0F, 0x20E3}


def is_emoji(token):
    chars = [c for c in token if ord(c) not in _JOINERS]
    if not chars:
        return False
    return all(any(lo <= ord(c) <= hi for lo, hi in _EMOJI_RANGES) for c in chars)


def preprocess_token(surface, replace_hashtags=False):
    if URL_RE.match(surface):
        return "<url>"
    if TAG_RE.match(surface):
        return "<tag>"
    if replace_hashtags and HASHTAG_RE.match(surface):
        return "<tag>"
    if NUM_RE.match(surface):
        return "<num>"
    if is_emoji(surface):
        return "<emoji>"
    return surface


def preprocess(sentence, replace_hashtags=False):
    """Replace URL/emoji/user-tag/number tokens with reserved tokens."""
    tokens = tuple(
        Token(preprocess_token(t.surface, replace_hashtags), t.pos, t.gold)
        for t in sentence.tokens
    )
    return Sentence(tokens, sentence.source_id)


def derive_segmentation_labels(category_labels):
    """B-c -> B, I-c -> I, O -> O, positionwise."""
    out = []
    for label in category_labels:
        kind, _ = _split_label(label)
        out.append(kind)
    return out


def validate_bio(labels, mode="strict"):
    """Check (or repair) I-c labels that do not continue a same-class run."""
    if mode not in ("strict", "repair"):
        raise ValueError(f"unknown mode {mode!r}")
    repaired = []
    prev_cls = None
    for i, label in enumerate(labels):
        kind, cls = _split_label(label)
        if kind == "I" and cls != prev_cls:
            if mode == "strict":
                raise ValidationError(f"index {i}: {label} does not continue a {cls} entity")
            label = f"B-{cls}"
        repaired.append(label)
        prev_cls = cls if kind in ("B", "I") else None
    return repaired


def repair_corpus(sentences):
    """Repair gold BIO violations in place; returns (sentences, repair count)."""
    out = []
    repairs = 0
    for sent in sentences:
        gold = sent.gold_labels()
        if any(g is None for g in gold):
            out.append(sent)
            continue
        fixed = validate_bio(gold, mode="repair")
        repairs += sum(a != b for a, b in zip(gold, fixed))
        out.append(
            Sentence(
                tuple(Token(t.surface, t.pos, g) for t, g in zip(sent.tokens, fixed)),
                sent.source_id,
            )
        )
    return out, repairs


def compute_class_weights(sentences, catalog, exponent=0.5, o_floor=0.5):
    """Inverse-frequency class weights, damped by ``exponent``.

    weight(l) = (total / (|labels| * count(l)))^exponent, then weight(O) is
    multiplied by ``o_floor`` and everything is rescaled so the max entity
    weight is 1. Zero-count labels get the max computed weight.
    """
    if not sentences:
        raise ValueError("corpus is empty")
    if exponent < 0:
        raise ValueError("exponent must be >= 0")
    if not 0 < o_floor <= 1:
        raise ValueError("o_floor must be in (0, 1]")
    counts = dict.fromkeys(catalog.category_labels, 0)
    total = 0
    for sent in sentences:
        for tok in sent.tokens:
            if tok.gold is None:
                continue
            if tok.gold not in counts:
                raise CatalogError(f"label {tok.gold!r} not in catalog")
            counts[tok.gold] += 1
            total += 1
    n_labels = len(catalog.category_labels)
    weights = {}
    for label, c in counts.items():
        if c > 0:
            weights[label] = (total / (n_labels * c)) ** exponent
    max_w = max(weights.values())
    for label, c in counts.items():
        if c == 0:
            weights[label] = max_w
    weights["O"] *= o_floor
    scale = max(w for l, w in weights.items() if l != "O") if n_labels > 1 else weights["O"]
    return {l: w / scale for l, w in weights.items()}


def segmentation_weights(category_weights, catalog):
    """Segmentation-task weights: O keeps its weight, B/I get the max over their classes."""
    b = max((w for l, w in category_weights.items() if l.startswith("B-")), default=1.0)
    i = max((w for l, w in category_weights.items() if l.startswith("I-")), default=1.0)
    return {"O": category_weights.get("O", 1.0), "B": b, "I": i}


def extract_mention_spans(labels):
    """Maximal B-c (I-c)* runs as (class, start, end); bare I-c starts a run."""
    spans = []
    start = None
    cls = None
    for i, label in enumerate(labels):
        kind, label_cls = _split_label(label)
        if kind == "B" or (kind == "I" and label_cls != cls):
            if start is not None:
                spans.append((cls, start, i))
            start, cls = i, label_cls
        elif kind == "O":
            if start is not None:
                spans.append((cls, start, i))
            start, cls = None, None
    if start is not None:
        spans.append((cls, start, len(labels)))
    return spans


@dataclass
class DatasetStats:
    posts: int
    tokens: int
    ne_tokens: int
    ne_token_pct: float
    unique_entity_pct: float
    per_class_counts: dict[str, int]

    def to_dict(self):
        return {
            "posts": self.posts,
            "tokens": self.tokens,
            "ne_tokens": self.ne_tokens,
            "ne_token_pct": self.ne_token_pct,
            "unique_entity_pct": self.unique_entity_pct,
            "per_class_counts": dict(self.per_class_counts),
        }


def corpus_stats(sentences, gold_required=True):
    posts = len(sentences)
    tokens = 0
    ne_tokens = 0
    per_class = {}
    mentions = []
    for idx, sent in enumerate(sentences):
        gold = sent.gold_labels()
        if any(g is None for g in gold):
            if gold_required:
                raise ValueError(f"sentence {idx} is unlabeled")
            tokens += len(sent)
            continue
        tokens += len(sent)
        ne_tokens += sum(g != "O" for g in gold)
        for cls, start, end in extract_mention_spans(gold):
            per_class[cls] = per_class.get(cls, 0) + 1
            mentions.append(" ".join(sent.surfaces()[start:end]).lower())
    unique_pct = 100.0 * len(set(mentions)) / len(mentions) if mentions else 0.0
    ne_pct = 100.0 * ne_tokens / tokens if tokens else 0.0
    return DatasetStats(posts, tokens, ne_tokens, ne_pct, unique_pct,
                        dict(sorted(per_class.items())))
