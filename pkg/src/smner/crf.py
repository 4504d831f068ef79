"""Linear-chain CRF with explicit START/STOP states.

Scoring, exact log-partition, forward-backward marginals, Viterbi
decoding, and a negative log-likelihood node whose gradients (expected
counts minus empirical counts) flow into both the CRF parameters and the
emission features.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .layers import param_rng

NEG_INF = -1e9


def _logsumexp(a, axis=None):
    m = a.max(axis=axis, keepdims=True)
    out = np.log(np.exp(a - m).sum(axis=axis, keepdims=True)) + m
    return out.squeeze(axis=axis) if axis is not None else out.reshape(())


class CrfParams:
    """Transition matrix over labels plus START/STOP, and a linear emission map."""

    def __init__(self, name, label_count, feat_dim, seed=0):
        self.name = name
        self.label_count = label_count
        self.feat_dim = feat_dim
        self.start = label_count
        self.stop = label_count + 1
        k2 = label_count + 2
        self.trans = ad.Parameter(
            f"{name}.trans",
            0.01 * param_rng(seed, f"{name}.trans").standard_normal((k2, k2)),
        )
        self.W = ad.Parameter(f"{name}.W", ad.glorot(param_rng(seed, f"{name}.W"),
                                                     feat_dim, label_count))
        self.b = ad.Parameter(f"{name}.b", np.zeros(label_count))

    def parameters(self):
        return [self.trans, self.W, self.b]

    def emissions(self, z_seq):
        """Numeric emission scores for an (n, feat_dim) feature array."""
        return np.asarray(z_seq) @ self.W.value + self.b.value

    def emission_node(self, z_rows):
        """Autodiff emission scores from a list of feature row nodes."""
        return ad.add(ad.matmul(ad.stack_rows(z_rows), self.W), self.b)

    def mask_forbidden(self, forbidden):
        """Hard-constrain (a, b) label transitions to NEG_INF. Off by default."""
        for a, b in forbidden:
            self.trans.value[a, b] = NEG_INF


def _check_lengths(scores, y_seq=None):
    scores = np.asarray(scores)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise ValueError(f"emission scores must be a non-empty (n, k) array, got {scores.shape}")
    if y_seq is not None and len(y_seq) != scores.shape[0]:
        raise ValueError(f"sequence length {scores.shape[0]} != label length {len(y_seq)}")
    return scores


def sequence_score(scores, y_seq, trans, start, stop):
    """Sum of emissions plus transitions along one path, with START/STOP."""
    scores = _check_lengths(scores, y_seq)
    total = trans[start, y_seq[0]] + scores[0, y_seq[0]]
    for t in range(1, len(y_seq)):
        total += trans[y_seq[t - 1], y_seq[t]] + scores[t, y_seq[t]]
    return total + trans[y_seq[-1], stop]


def _forward_alphas(scores, trans, start):
    n, k = scores.shape
    alphas = np.empty((n, k))
    alphas[0] = trans[start, :k] + scores[0]
    for t in range(1, n):
        alphas[t] = scores[t] + _logsumexp(alphas[t - 1][:, None] + trans[:k, :k], axis=0)
    return alphas


def _backward_betas(scores, trans, stop):
    n, k = scores.shape
    betas = np.empty((n, k))
    betas[-1] = trans[:k, stop]
    for t in range(n - 2, -1, -1):
        betas[t] = _logsumexp(trans[:k, :k] + scores[t + 1] + betas[t + 1], axis=1)
    return betas


def log_partition(scores, trans, start, stop):
    scores = _check_lengths(scores)
    alphas = _forward_alphas(scores, trans, start)
    k = scores.shape[1]
    return float(_logsumexp(alphas[-1] + trans[:k, stop]))


def marginals(scores, trans, start, stop):
    """Per-position posterior over labels; rows sum to 1."""
    scores = _check_lengths(scores)
    alphas = _forward_alphas(scores, trans, start)
    betas = _backward_betas(scores, trans, stop)
    k = scores.shape[1]
    log_z = _logsumexp(alphas[-1] + trans[:k, stop])
    return np.exp(alphas + betas - log_z)


def viterbi(scores, trans, start, stop):
    """Argmax path and its score; ties broken toward the lowest label index."""
    scores = _check_lengths(scores)
    n, k = scores.shape
    delta = trans[start, :k] + scores[0]
    back = np.zeros((n, k), dtype=int)
    for t in range(1, n):
        cand = delta[:, None] + trans[:k, :k]
        back[t] = cand.argmax(axis=0)  # argmax takes the first (lowest-index) max
        delta = scores[t] + cand[back[t], np.arange(k)]
    final = delta + trans[:k, stop]
    path = [int(final.argmax())]
    for t in range(n - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return path, float(final.max())


def nll_node(emission_node, crf, y_seq):
    """Negative log-likelihood node: log_partition - score(gold).

    Gradients: expected counts minus empirical counts, for both emissions
    (flowing back into z via the emission map) and transitions.
    """
    scores = _check_lengths(emission_node.value, y_seq)
    trans_param = crf.trans
    trans = trans_param.value
    start, stop = crf.start, crf.stop
    n, k = scores.shape

    alphas = _forward_alphas(scores, trans, start)
    betas = _backward_betas(scores, trans, stop)
    log_z = float(_logsumexp(alphas[-1] + trans[:k, stop]))
    gold = float(sequence_score(scores, y_seq, trans, start, stop))
    value = log_z - gold

    def vjp(g):
        g = float(g)
        unary = np.exp(alphas + betas - log_z)
        d_scores = unary.copy()
        d_scores[np.arange(n), y_seq] -= 1.0
        d_trans = np.zeros_like(trans)
        d_trans[start, :k] = unary[0]
        d_trans[start, y_seq[0]] -= 1.0
        d_trans[:k, stop] = unary[-1]
        d_trans[y_seq[-1], stop] -= 1.0
        for t in range(n - 1):
            pair = np.exp(
                alphas[t][:, None] + trans[:k, :k] + scores[t + 1] + betas[t + 1] - log_z
            )
            d_trans[:k, :k] += pair
            d_trans[y_seq[t], y_seq[t + 1]] -= 1.0
        return g * d_scores, g * d_trans

    return ad.Node(value, (emission_node, trans_param), vjp)


def nll(z_rows, crf, y_seq):
    """Loss node over feature row nodes (or arrays) and a gold label sequence."""
    rows = [r if isinstance(r, ad.Node) else ad.constant(r) for r in z_rows]
    return nll_node(crf.emission_node(rows), crf, list(y_seq))


def bio_forbidden_transitions(catalog):
    """(a, b) pairs illegal under the BIO scheme, for optional hard masking."""
    labels = catalog.category_labels
    idx = catalog.category_index
    forbidden = []
    for b_label in labels:
        if not b_label.startswith("I-"):
            continue
        cls = b_label[2:]
        for a_label in labels:
            ok = a_label == f"B-{cls}" or a_label == f"I-{cls}"
            if not ok:
                forbidden.append((idx[a_label], idx[b_label]))
    return forbidden


def make_standalone_crf(label_count, feat_dim, seed=0):
    return CrfParams("crf.standalone", label_count, feat_dim, seed=seed)
