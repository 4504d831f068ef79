"""Grapheme-to-IPA transliteration and articulatory character features.

Each word is normalized, rewritten to an IPA phoneme sequence by an
ordered rule set, and encoded as a matrix of one-hot-plus-articulatory
vectors. The rule set and feature table are data files so the engine
itself stays language-agnostic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

import numpy as np

UNK_PHONE = "<unk-phone>"
N_ARTICULATORY = 21

_LETTER_RE = re.compile(r"[^a-z']+")
_REPEAT_RE = re.compile(r"(.)\1{2,}")


class RuleFileError(ValueError):
    """Raised when a rule file or feature table is malformed."""


@dataclass(frozen=True)
class Rule:
    pattern: str
    left: str | None   # None = unconstrained; '#' = word boundary
    right: str | None
    output: tuple[str, ...]
    order: int


class PhonemeInventory:
    """Ordered IPA symbol set with stable indices; UNK_PHONE is index 0."""

    def __init__(self, symbols):
        seen = dict.fromkeys(symbols)
        if UNK_PHONE in seen:
            del seen[UNK_PHONE]
        self.symbols = [UNK_PHONE] + list(seen)
        self.index = {s: i for i, s in enumerate(self.symbols)}

    def __len__(self):
        return len(self.symbols)

    def __contains__(self, symbol):
        return symbol in self.index


def normalize(word):
    """Lowercase, collapse >=3 repeated letters to 2, strip non-letters (keep ')."""
    word = word.lower()
    word = _REPEAT_RE.sub(r"\1\1", word)
    return _LETTER_RE.sub("", word)


def _parse_rule_line(line, order):
    if "->" not in line:
        raise RuleFileError(f"rule line {order + 1}: missing '->': {line!r}")
    lhs, rhs = line.split("->", 1)
    lhs = lhs.strip()
    output = tuple(rhs.split())
    left = right = None
    m = re.match(r"^(\S+)\s+/(.*)_(.*)/$", lhs)
    if m:
        pattern, left, right = m.group(1), m.group(2), m.group(3)
    else:
        pattern = lhs
    if not pattern:
        raise RuleFileError(f"rule line {order + 1}: empty pattern")
    return Rule(pattern, left, right, output, order)


class G2PRuleSet:
    """Ordered rewrite rules applied longest-pattern-first, then file order."""

    def __init__(self, rules, inventory):
        self.rules = list(rules)
        self.inventory = inventory
        for rule in self.rules:
            for sym in rule.output:
                if sym not in inventory:
                    raise RuleFileError(
                        f"rule {rule.pattern!r} emits {sym!r}, not in the inventory"
                    )
        # Bucket rules by first pattern character for fast candidate lookup;
        # within a bucket keep longest-first, then file order.
        self._by_first = {}
        for rule in sorted(self.rules, key=lambda r: (-len(r.pattern), r.order)):
            self._by_first.setdefault(rule.pattern[0], []).append(rule)

    def _context_ok(self, word, start, end, rule):
        if rule.left is not None:
            if rule.left == "#":
                if start != 0:
                    return False
            elif not word.endswith(rule.left, 0, start):
                return False
        if rule.right is not None:
            if rule.right == "#":
                if end != len(word):
                    return False
            elif not word.startswith(rule.right, end):
                return False
        return True

    def apply(self, word):
        """Rewrite a normalized word to IPA symbols; unmatched chars -> UNK_PHONE."""
        out = []
        i = 0
        n = len(word)
        while i < n:
            matched = None
            for rule in self._by_first.get(word[i], ()):
                end = i + len(rule.pattern)
                if end <= n and word.startswith(rule.pattern, i) and self._context_ok(
                    word, i, end, rule
                ):
                    matched = rule
                    break
            if matched is None:
                out.append(UNK_PHONE)
                i += 1
            else:
                out.extend(matched.output)
                i += len(matched.pattern)
        return out


class ArticulatoryTable:
    """Map IPA symbol -> 21 ternary features; UNK_PHONE is all zeros."""

    def __init__(self, features):
        self.features = dict(features)
        self.features.setdefault(UNK_PHONE, np.zeros(N_ARTICULATORY))
        for sym, vec in self.features.items():
            if vec.shape != (N_ARTICULATORY,):
                raise RuleFileError(f"feature row for {sym!r} has {vec.size} entries, want 21")

    def row(self, symbol):
        return self.features.get(symbol, self.features[UNK_PHONE])


class PhoneticEncoder:
    """Bundles inventory, rules, and feature table; produces char feature matrices."""

    def __init__(self, rules, table, inventory):
        self.rules = rules
        self.table = table
        self.inventory = inventory
        self.width = len(inventory) + N_ARTICULATORY
        self.unmatched_count = 0
        self._cache = {}

    def transliterate(self, word):
        symbols = self.rules.apply(normalize(word))
        self.unmatched_count += symbols.count(UNK_PHONE)
        return symbols

    def articulatory_features(self, symbol):
        return self.table.row(symbol)

    def encode_chars(self, word):
        """One row per phoneme: one-hot(symbol) ++ articulatory features."""
        key = normalize(word)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        symbols = self.transliterate(key)
        matrix = np.zeros((len(symbols), self.width))
        for r, sym in enumerate(symbols):
            matrix[r, self.inventory.index.get(sym, 0)] = 1.0
            matrix[r, len(self.inventory):] = self.table.row(sym)
        self._cache[key] = matrix
        return matrix


def load_rules(path_or_lines, inventory):
    if isinstance(path_or_lines, (str,)):
        with open(path_or_lines, encoding="utf-8") as fh:
            lines = fh.readlines()
    else:
        lines = list(path_or_lines)
    rules = []
    for i, raw in enumerate(lines):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rules.append(_parse_rule_line(line, i))
    return G2PRuleSet(rules, inventory)


def load_feature_table(path_or_lines):
    """Read the CSV 'symbol,f1..f21'; returns (ArticulatoryTable, symbol order)."""
    if isinstance(path_or_lines, str):
        with open(path_or_lines, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = [l.rstrip("\n") for l in path_or_lines]
    features = {}
    order = []
    for i, line in enumerate(lines):
        if not line or i == 0 and line.startswith("symbol,"):
            continue
        parts = line.split(",")
        if len(parts) != N_ARTICULATORY + 1:
            raise RuleFileError(f"feature table line {i + 1}: {len(parts) - 1} values, want 21")
        sym = parts[0]
        vec = np.array([float(v) for v in parts[1:]])
        if not np.isin(vec, (-1.0, 0.0, 1.0)).all():
            raise RuleFileError(f"feature table line {i + 1}: values must be ternary")
        features[sym] = vec
        order.append(sym)
    return ArticulatoryTable(features), order


def default_encoder(rules_path=None, features_path=None):
    """Build the encoder from the shipped English data files (or overrides)."""
    data = resources.files("smner") / "data"
    if features_path is None:
        table, order = load_feature_table(
            (data / "articulatory_features.csv").read_text(encoding="utf-8").splitlines()
        )
    else:
        table, order = load_feature_table(features_path)
    inventory = PhonemeInventory(order)
    if rules_path is None:
        rules = load_rules(
            (data / "g2p_rules.txt").read_text(encoding="utf-8").splitlines(), inventory
        )
    else:
        rules = load_rules(rules_path, inventory)
    return PhoneticEncoder(rules, table, inventory)
