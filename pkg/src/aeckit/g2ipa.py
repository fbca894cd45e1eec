"""Linear-chain CRF tagger mapping syllable sequences to IPA labels.

Model: for a token sequence x and label sequence y,

    score(x, y) = sum_t  sum_{f in feats(x, t)} W_em[f, y_t]
                + sum_{t>0} W_tr[y_{t-1}, y_t]

    p(y | x) = exp(score) / Z(x)

The objective is the mean per-sequence negative log-likelihood plus an L2
term (l2_lambda / 2) * ||w||^2. Z and the marginals come from the forward
and backward recursions in log space; the gradient is exact (expected minus
empirical feature counts). Decoding is Viterbi with ties broken toward the
lowest label index.

Emission features are strings such as "id[-1]=<s>" or "cls[0]=cv", produced
by window templates; unknown decode-time tokens simply contribute whatever
features the model has seen (typically boundary and class features) and never
fail. Feature ids are assigned in sorted order so that training is
reproducible across processes regardless of hash randomization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .errors import EmptyCorpus, FormatError, IoFailure, LengthMismatch
from .textcore import codepoint_class, read_segmented_file

BOS = "<s>"
EOS = "</s>"

_CLASS_CODES = {
    "consonant": "c",
    "standalone": "x",
    "vowel": "v",
    "final": "f",
    "stacker": "s",
    "asat": "a",
    "medial": "m",
    "digit": "d",
    "punct": "p",
    "unclassified": "u",
    "other": "o",
}


@dataclass(frozen=True)
class TagSet:
    """Ordered distinct label strings with index lookup both ways."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if not self.labels:
            raise ValueError("empty tag set")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate labels in tag set")
        object.__setattr__(
            self, "_index", {lab: i for i, lab in enumerate(self.labels)}
        )

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> "TagSet":
        return cls(tuple(sorted(set(labels))))

    def index(self, label: str) -> int:
        return self._index[label]

    def label(self, idx: int) -> str:
        return self.labels[idx]

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class FeatureTemplate:
    """Window feature descriptors.

    Descriptors are tuples: ("identity", offset), ("class", offset),
    ("prefix", offset, k), ("suffix", offset, k). Offsets must stay within
    the window radius and descriptors must be unique.
    """

    descriptors: tuple[tuple, ...]
    window: int = 2

    def __post_init__(self):
        seen = set()
        for d in self.descriptors:
            kind = d[0]
            if kind not in ("identity", "class", "prefix", "suffix"):
                raise ValueError("unknown feature kind %r" % (kind,))
            if abs(d[1]) > self.window:
                raise ValueError("offset %d outside window %d" % (d[1], self.window))
            if d in seen:
                raise ValueError("duplicate descriptor %r" % (d,))
            seen.add(d)


def default_templates() -> FeatureTemplate:
    """Identity and class signature over a +/-2 window, affixes up to length 3
    on the current token."""
    descriptors: list[tuple] = []
    for off in range(-2, 3):
        descriptors.append(("identity", off))
    for off in range(-2, 3):
        descriptors.append(("class", off))
    for k in (1, 2, 3):
        descriptors.append(("prefix", 0, k))
        descriptors.append(("suffix", 0, k))
    return FeatureTemplate(tuple(descriptors))


def _class_signature(token: str) -> str:
    return "".join(_CLASS_CODES[codepoint_class(ord(ch))] for ch in token)


def extract_features(
    tokens: Sequence[str], position: int, templates: FeatureTemplate
) -> frozenset:
    """Feature-id strings for one position; deterministic, set-valued.

    Out-of-window positions yield boundary sentinels so that edge tokens
    still get a full feature complement.
    """
    if not 0 <= position < len(tokens):
        raise IndexError("position %d outside sequence" % position)
    feats = []
    n = len(tokens)
    for d in templates.descriptors:
        kind = d[0]
        off = d[1]
        p = position + off
        if p < 0:
            tok = BOS
        elif p >= n:
            tok = EOS
        else:
            tok = tokens[p]
        if kind == "identity":
            feats.append("id[%d]=%s" % (off, tok))
        elif kind == "class":
            sig = tok if tok in (BOS, EOS) else _class_signature(tok)
            feats.append("cls[%d]=%s" % (off, sig))
        elif kind == "prefix":
            feats.append("pre[%d,%d]=%s" % (off, d[2], tok[: d[2]]))
        else:
            feats.append("suf[%d,%d]=%s" % (off, d[2], tok[-d[2] :]))
    return frozenset(feats)


@dataclass(frozen=True)
class TaggedSequence:
    """Tokens plus one label index per token."""

    tokens: tuple[str, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.labels):
            raise LengthMismatch(
                "%d tokens vs %d labels" % (len(self.tokens), len(self.labels))
            )


@dataclass
class CrfModel:
    tagset: TagSet
    templates: FeatureTemplate
    feature_index: dict
    emission: np.ndarray     # (features, labels)
    transitions: np.ndarray  # (labels, labels), [prev, cur]
    l2_lambda: float = 0.0

    def n_labels(self) -> int:
        return len(self.tagset)


class CrfGradient:
    """Gradient container matching CrfModel's weight layout."""

    __slots__ = ("emission", "transitions")

    def __init__(self, emission: np.ndarray, transitions: np.ndarray):
        self.emission = emission
        self.transitions = transitions


def _position_feature_ids(model: CrfModel, tokens: Sequence[str]) -> list:
    """Known-feature id lists per position (unknown features are skipped)."""
    index = model.feature_index
    out = []
    for t in range(len(tokens)):
        feats = extract_features(tokens, t, model.templates)
        out.append([index[f] for f in sorted(feats) if f in index])
    return out


def emission_scores(model: CrfModel, tokens: Sequence[str]) -> np.ndarray:
    """(T, L) matrix of summed emission weights per position and label."""
    L = model.n_labels()
    E = np.zeros((len(tokens), L))
    for t, ids in enumerate(_position_feature_ids(model, tokens)):
        if ids:
            E[t] = model.emission[ids].sum(axis=0)
    return E


def _sequence_nll_grad(model: CrfModel, seq: TaggedSequence):
    """(nll, emission grad, transition grad) of one sequence, exact."""
    T = len(seq.tokens)
    L = model.n_labels()
    trans = model.transitions
    feat_ids = _position_feature_ids(model, seq.tokens)
    E = np.zeros((T, L))
    for t, ids in enumerate(feat_ids):
        if ids:
            E[t] = model.emission[ids].sum(axis=0)

    log_alpha = np.empty((T, L))
    log_alpha[0] = E[0]
    for t in range(1, T):
        log_alpha[t] = E[t] + logsumexp(
            log_alpha[t - 1][:, None] + trans, axis=0
        )
    log_z = logsumexp(log_alpha[T - 1])

    log_beta = np.zeros((T, L))
    for t in range(T - 2, -1, -1):
        log_beta[t] = logsumexp(
            trans + (E[t + 1] + log_beta[t + 1])[None, :], axis=1
        )

    gold_score = E[np.arange(T), list(seq.labels)].sum()
    for t in range(1, T):
        gold_score += trans[seq.labels[t - 1], seq.labels[t]]
    nll = log_z - gold_score

    unary = np.exp(log_alpha + log_beta - log_z)  # (T, L) marginals
    d_emission = np.zeros_like(model.emission)
    for t, ids in enumerate(feat_ids):
        if not ids:
            continue
        contrib = unary[t].copy()
        contrib[seq.labels[t]] -= 1.0
        d_emission[ids] += contrib[None, :]

    d_trans = np.zeros_like(trans)
    for t in range(T - 1):
        pair = np.exp(
            log_alpha[t][:, None]
            + trans
            + (E[t + 1] + log_beta[t + 1])[None, :]
            - log_z
        )
        d_trans += pair
        d_trans[seq.labels[t], seq.labels[t + 1]] -= 1.0
    return nll, d_emission, d_trans


def crf_log_likelihood(
    model: CrfModel, data: Sequence[TaggedSequence]
) -> tuple[float, CrfGradient]:
    """Regularized mean NLL over ``data`` and its exact gradient.

    Returns (objective, gradient) where the objective is
    mean_seq(log Z - gold score) + (l2_lambda / 2) * ||w||^2 and the gradient
    covers both emission and transition weights. Both are finite for finite
    weights by log-space construction.
    """
    if len(data) == 0:
        raise EmptyCorpus("no tagged sequences")
    total = 0.0
    d_em = np.zeros_like(model.emission)
    d_tr = np.zeros_like(model.transitions)
    for seq in data:
        nll, g_em, g_tr = _sequence_nll_grad(model, seq)
        total += nll
        d_em += g_em
        d_tr += g_tr
    n = len(data)
    total /= n
    d_em /= n
    d_tr /= n
    lam = model.l2_lambda
    if lam:
        total += 0.5 * lam * (
            float(np.sum(model.emission**2)) + float(np.sum(model.transitions**2))
        )
        d_em += lam * model.emission
        d_tr += lam * model.transitions
    return total, CrfGradient(d_em, d_tr)


def crf_decode(model: CrfModel, tokens: Sequence[str]) -> TaggedSequence:
    """Viterbi labeling; equal scores resolve to the lowest label index."""
    tokens = tuple(tokens)
    if not tokens:
        raise EmptyCorpus("cannot decode an empty token sequence")
    T = len(tokens)
    E = emission_scores(model, tokens)
    trans = model.transitions
    delta = E[0]
    back = np.zeros((T, model.n_labels()), dtype=np.int64)
    for t in range(1, T):
        scores = delta[:, None] + trans  # (prev, cur)
        back[t] = np.argmax(scores, axis=0)  # first max = lowest prev index
        delta = E[t] + scores[back[t], np.arange(scores.shape[1])]
    path = [int(np.argmax(delta))]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t][path[-1]]))
    path.reverse()
    return TaggedSequence(tokens, tuple(path))


def crf_train(
    corpus: Sequence[tuple[Sequence[str], Sequence[str]]],
    templates: FeatureTemplate | None = None,
    l2_lambda: float = 1e-2,
    max_iter: int = 200,
    tol: float = 1e-5,
    seed: int = 0,
    history: list | None = None,
) -> CrfModel:
    """Train a CRF on (tokens, label strings) pairs.

    The tag set is the sorted label inventory of the corpus; the feature
    index covers every feature seen in training, in sorted order. Weights
    start at zero and L-BFGS-B minimizes the regularized mean NLL until the
    projected-gradient max-norm drops below ``tol`` or ``max_iter`` is
    reached, so a fixed corpus always reproduces the same weights bit for
    bit (``seed`` is accepted for interface uniformity and recorded nowhere).
    If ``history`` is a list, the objective at each accepted iterate is
    appended to it.

    Raises:
        EmptyCorpus: the corpus is empty.
    """
    if not corpus:
        raise EmptyCorpus("empty CRF training corpus")
    del seed
    if templates is None:
        templates = default_templates()
    tagset = TagSet.from_labels(
        lab for _, labels in corpus for lab in labels
    )
    feature_set = set()
    for tokens, _ in corpus:
        for t in range(len(tokens)):
            feature_set.update(extract_features(tokens, t, templates))
    feature_index = {f: i for i, f in enumerate(sorted(feature_set))}
    F, L = len(feature_index), len(tagset)
    model = CrfModel(
        tagset=tagset,
        templates=templates,
        feature_index=feature_index,
        emission=np.zeros((F, L)),
        transitions=np.zeros((L, L)),
        l2_lambda=l2_lambda,
    )
    data = [
        TaggedSequence(
            tuple(tokens), tuple(tagset.index(lab) for lab in labels)
        )
        for tokens, labels in corpus
    ]

    def objective(w: np.ndarray):
        model.emission = w[: F * L].reshape(F, L)
        model.transitions = w[F * L :].reshape(L, L)
        value, grad = crf_log_likelihood(model, data)
        return value, np.concatenate(
            [grad.emission.ravel(), grad.transitions.ravel()]
        )

    def record(w: np.ndarray):
        if history is not None:
            history.append(objective(w)[0])

    result = minimize(
        objective,
        np.zeros(F * L + L * L),
        jac=True,
        method="L-BFGS-B",
        callback=record,
        options={
            "maxiter": max_iter,
            "gtol": tol,
            "ftol": 1e-15,
            "maxfun": max_iter * 4,
        },
    )
    w = result.x
    model.emission = w[: F * L].reshape(F, L).copy()
    model.transitions = w[F * L :].reshape(L, L).copy()
    return model


def evaluate_tagging(
    gold: Sequence[TaggedSequence], pred: Sequence[TaggedSequence]
) -> dict:
    """Micro-averaged token-level precision, recall, and F1.

    Raises:
        LengthMismatch: sequence counts or pairwise lengths differ.
    """
    if len(gold) != len(pred):
        raise LengthMismatch(
            "%d gold vs %d predicted sequences" % (len(gold), len(pred))
        )
    correct = 0
    total_gold = 0
    total_pred = 0
    for g, p in zip(gold, pred):
        if len(g.tokens) != len(p.tokens):
            raise LengthMismatch(
                "sequence lengths differ: %d vs %d" % (len(g.tokens), len(p.tokens))
            )
        total_gold += len(g.labels)
        total_pred += len(p.labels)
        correct += sum(a == b for a, b in zip(g.labels, p.labels))
    precision = correct / total_pred if total_pred else 0.0
    recall = correct / total_gold if total_gold else 0.0
    if precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return {"precision": precision, "recall": recall, "f1": f1}


# ---------------------------------------------------------------------------
# Corpus loading and model persistence


def load_tagged_corpus(path) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """Read "syllable|label" lines into (tokens, labels) pairs.

    Raises:
        FormatError: a line is missing annotations.
        IoFailure: the file cannot be read.
    """
    out = []
    for seq, anns in read_segmented_file(path):
        if anns is None:
            raise FormatError("line %r has no label annotations" % " ".join(seq))
        out.append((seq.tokens, anns))
    return out


_MAGIC = "aeckit-crf-model 1"


def save_crf_model(model: CrfModel, path) -> None:
    """Versioned flat text encoding; exact float round-trip via repr."""
    lines = [_MAGIC, "l2_lambda %r" % model.l2_lambda]
    lines.append("window %d" % model.templates.window)
    lines.append("templates %d" % len(model.templates.descriptors))
    for d in model.templates.descriptors:
        lines.append(" ".join(str(x) for x in d))
    lines.append("labels %d" % len(model.tagset))
    lines.extend(model.tagset.labels)
    features = sorted(model.feature_index, key=model.feature_index.get)
    lines.append("features %d" % len(features))
    lines.extend(features)
    nz = np.argwhere(model.emission != 0.0)
    lines.append("emissions %d" % len(nz))
    for f, l in nz:
        lines.append("%d %d %r" % (f, l, float(model.emission[f, l])))
    lines.append("transitions")
    for row in model.transitions:
        lines.append(" ".join(repr(x) for x in row.tolist()))
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure("cannot write model %s: %s" % (path, exc))


def load_crf_model(path) -> CrfModel:
    """Inverse of save_crf_model.

    Raises:
        FormatError: the file is not a CRF model or is corrupt.
        IoFailure: the file cannot be read.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise IoFailure("cannot read model %s: %s" % (path, exc))
    try:
        pos = 0

        def take():
            nonlocal pos
            line = lines[pos]
            pos += 1
            return line

        if take() != _MAGIC:
            raise FormatError("not a CRF model file: %s" % path)
        l2_lambda = float(take().split(" ", 1)[1])
        window = int(take().split(" ", 1)[1])
        n_templates = int(take().split(" ", 1)[1])
        descriptors = []
        for _ in range(n_templates):
            parts = take().split(" ")
            if parts[0] in ("prefix", "suffix"):
                descriptors.append((parts[0], int(parts[1]), int(parts[2])))
            else:
                descriptors.append((parts[0], int(parts[1])))
        templates = FeatureTemplate(tuple(descriptors), window)
        n_labels = int(take().split(" ", 1)[1])
        tagset = TagSet(tuple(take() for _ in range(n_labels)))
        n_features = int(take().split(" ", 1)[1])
        feature_index = {take(): i for i in range(n_features)}
        emission = np.zeros((n_features, n_labels))
        n_emissions = int(take().split(" ", 1)[1])
        for _ in range(n_emissions):
            f, l, w = take().split(" ")
            emission[int(f), int(l)] = float(w)
        if take() != "transitions":
            raise FormatError("missing transitions block in %s" % path)
        transitions = np.array(
            [[float(x) for x in take().split(" ")] for _ in range(n_labels)]
        )
    except (IndexError, ValueError) as exc:
        raise FormatError("corrupt CRF model %s: %s" % (path, exc))
    return CrfModel(
        tagset=tagset,
        templates=templates,
        feature_index=feature_index,
        emission=emission,
        transitions=transitions,
        l2_lambda=l2_lambda,
    )
