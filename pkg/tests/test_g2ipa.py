import math

import numpy as np
import pytest

from aeckit.errors import EmptyCorpus, FormatError, LengthMismatch
from aeckit.g2ipa import (
    CrfModel,
    FeatureTemplate,
    TaggedSequence,
    TagSet,
    crf_decode,
    crf_log_likelihood,
    crf_train,
    default_templates,
    emission_scores,
    evaluate_tagging,
    extract_features,
    load_crf_model,
    load_tagged_corpus,
    save_crf_model,
)

from oracles import crf_brute_force

IDENTITY_1 = FeatureTemplate(
    (("identity", -1), ("identity", 0), ("identity", 1)), window=1
)


def make_model(vocab, n_labels, templates=IDENTITY_1, l2_lambda=0.0, rng=None):
    """Model over identity features for vocab plus boundary sentinels."""
    feats = sorted(
        "id[%d]=%s" % (off, tok)
        for off in (-1, 0, 1)
        for tok in list(vocab) + ["<s>", "</s>"]
    )
    index = {f: i for i, f in enumerate(feats)}
    F = len(index)
    if rng is None:
        emission = np.zeros((F, n_labels))
        transitions = np.zeros((n_labels, n_labels))
    else:
        emission = rng.normal(size=(F, n_labels))
        transitions = rng.normal(size=(n_labels, n_labels))
    return CrfModel(
        tagset=TagSet(tuple("L%d" % i for i in range(n_labels))),
        templates=templates,
        feature_index=index,
        emission=emission,
        transitions=transitions,
        l2_lambda=l2_lambda,
    )


def feature_ids(model, tokens):
    return [
        sorted(
            model.feature_index[f]
            for f in extract_features(tokens, t, model.templates)
            if f in model.feature_index
        )
        for t in range(len(tokens))
    ]


def dense_emissions(model, tokens):
    """Per-position label score lists, summed feature by feature."""
    rows = []
    for ids in feature_ids(model, tokens):
        row = [0.0] * model.n_labels()
        for f in ids:
            for y in range(model.n_labels()):
                row[y] += model.emission[f, y]
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Feature extraction


def test_single_token_gets_boundary_sentinels():
    feats = extract_features(("ka",), 0, IDENTITY_1)
    assert feats == {"id[-1]=<s>", "id[0]=ka", "id[1]=</s>"}
    assert len(feats) == 3


def test_mid_window_identity_features():
    feats = extract_features(("a", "b", "c"), 1, IDENTITY_1)
    assert feats == {"id[-1]=a", "id[0]=b", "id[1]=c"}


def test_affix_and_class_features():
    t = FeatureTemplate(
        (("prefix", 0, 2), ("suffix", 0, 1), ("class", 0), ("class", 1)),
        window=1,
    )
    feats = extract_features(("မြန်",), 0, t)
    # consonant, medial, consonant, asat
    assert "cls[0]=cmca" in feats
    assert "pre[0,2]=မြ" in feats
    assert "suf[0,1]=်" in feats
    assert "cls[1]=</s>" in feats


def test_feature_position_out_of_range():
    with pytest.raises(IndexError):
        extract_features(("a",), 1, IDENTITY_1)


def test_template_validation():
    with pytest.raises(ValueError):
        FeatureTemplate((("identity", 3),), window=2)
    with pytest.raises(ValueError):
        FeatureTemplate((("identity", 0), ("identity", 0)))
    with pytest.raises(ValueError):
        FeatureTemplate((("bigram", 0),))


def test_default_templates_cover_window():
    t = default_templates()
    offsets = {d[1] for d in t.descriptors if d[0] == "identity"}
    assert offsets == {-2, -1, 0, 1, 2}


def test_tagset_round_trip_and_validation():
    ts = TagSet.from_labels(["b", "a", "b"])
    assert ts.labels == ("a", "b")
    assert ts.index("b") == 1 and ts.label(0) == "a"
    with pytest.raises(ValueError):
        TagSet(())
    with pytest.raises(ValueError):
        TagSet(("a", "a"))


def test_tagged_sequence_length_check():
    with pytest.raises(LengthMismatch):
        TaggedSequence(("a", "b"), (0,))


# ---------------------------------------------------------------------------
# Likelihood against closed forms and brute force


def test_zero_weight_nll_is_log_label_count():
    model = make_model(["x"], 4)
    value, _ = crf_log_likelihood(model, [TaggedSequence(("x",), (0,))])
    assert value == pytest.approx(math.log(4), abs=1e-12)


def test_zero_weight_nll_two_positions():
    model = make_model(["x", "y"], 3)
    value, _ = crf_log_likelihood(model, [TaggedSequence(("x", "y"), (2, 1))])
    assert value == pytest.approx(2 * math.log(3), abs=1e-12)


def test_zero_weight_transition_gradient_by_hand():
    # Two positions, two labels, no features: every pairwise marginal is 1/4,
    # the gold path (0, 0) subtracts one at that cell.
    model = CrfModel(
        tagset=TagSet(("A", "B")),
        templates=FeatureTemplate((), window=0),
        feature_index={},
        emission=np.zeros((0, 2)),
        transitions=np.zeros((2, 2)),
    )
    value, grad = crf_log_likelihood(model, [TaggedSequence(("p", "q"), (0, 0))])
    assert value == pytest.approx(2 * math.log(2), abs=1e-12)
    expected = np.array([[0.25 - 1.0, 0.25], [0.25, 0.25]])
    np.testing.assert_allclose(grad.transitions, expected, atol=1e-12)
    assert grad.emission.shape == (0, 2)


def brute_objective_and_gradient(model, data):
    """Objective and gradient by full path enumeration, no recursions."""
    L = model.n_labels()
    total = 0.0
    d_em = np.zeros_like(model.emission)
    d_tr = np.zeros_like(model.transitions)
    for seq in data:
        ids = feature_ids(model, seq.tokens)
        E = dense_emissions(model, seq.tokens)
        log_z, path_scores = crf_brute_force(E, model.transitions.tolist(), L)
        gold = 0.0
        for t, y in enumerate(seq.labels):
            gold += E[t][y]
            if t > 0:
                gold += model.transitions[seq.labels[t - 1], y]
        total += log_z - gold
        for path, score in path_scores.items():
            p = math.exp(score - log_z)
            for t, y in enumerate(path):
                for f in ids[t]:
                    d_em[f, y] += p
                if t > 0:
                    d_tr[path[t - 1], y] += p
        for t, y in enumerate(seq.labels):
            for f in ids[t]:
                d_em[f, y] -= 1.0
            if t > 0:
                d_tr[seq.labels[t - 1], y] -= 1.0
    n = len(data)
    total /= n
    d_em /= n
    d_tr /= n
    lam = model.l2_lambda
    if lam:
        total += 0.5 * lam * (np.sum(model.emission**2) + np.sum(model.transitions**2))
        d_em = d_em + lam * model.emission
        d_tr = d_tr + lam * model.transitions
    return total, d_em, d_tr


def test_likelihood_and_gradient_match_enumeration():
    rng = np.random.default_rng(7)
    vocab = ["ka", "kha", "ga", "nga", "ca"]
    for trial in range(30):
        n_labels = int(rng.integers(1, 5))
        lam = float(rng.choice([0.0, 0.05]))
        model = make_model(vocab, n_labels, l2_lambda=lam, rng=rng)
        data = []
        for _ in range(int(rng.integers(1, 4))):
            T = int(rng.integers(1, 5))
            toks = tuple(rng.choice(vocab) for _ in range(T))
            labs = tuple(int(rng.integers(0, n_labels)) for _ in range(T))
            data.append(TaggedSequence(toks, labs))
        value, grad = crf_log_likelihood(model, data)
        ref_value, ref_em, ref_tr = brute_objective_and_gradient(model, data)
        assert value == pytest.approx(ref_value, abs=1e-8)
        np.testing.assert_allclose(grad.emission, ref_em, atol=1e-8)
        np.testing.assert_allclose(grad.transitions, ref_tr, atol=1e-8)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    model = make_model(["a", "b", "c"], 3, l2_lambda=0.1, rng=rng)
    data = [
        TaggedSequence(("a", "b", "c"), (0, 2, 1)),
        TaggedSequence(("c", "a"), (1, 1)),
        TaggedSequence(("b",), (2,)),
    ]
    _, grad = crf_log_likelihood(model, data)
    analytic = np.concatenate([grad.emission.ravel(), grad.transitions.ravel()])
    F, L = model.emission.shape
    base_em = model.emission.copy()
    base_tr = model.transitions.copy()

    def value_at(flat):
        model.emission = flat[: F * L].reshape(F, L)
        model.transitions = flat[F * L :].reshape(L, L)
        v, _ = crf_log_likelihood(model, data)
        return v

    flat = np.concatenate([base_em.ravel(), base_tr.ravel()])
    h = 1e-6
    for k in range(flat.size):
        bump = flat.copy()
        bump[k] += h
        up = value_at(bump)
        bump[k] -= 2 * h
        down = value_at(bump)
        fd = (up - down) / (2 * h)
        denom = max(abs(fd), abs(analytic[k]), 1e-8)
        assert abs(fd - analytic[k]) / denom < 1e-5, "param %d" % k
    model.emission = base_em
    model.transitions = base_tr


def test_mean_nll_is_non_negative():
    # Z sums over every path including the gold one, so each sequence NLL
    # is non-negative before regularization.
    rng = np.random.default_rng(3)
    for _ in range(20):
        model = make_model(["u", "v"], int(rng.integers(1, 4)), rng=rng)
        T = int(rng.integers(1, 5))
        toks = tuple(rng.choice(["u", "v"]) for _ in range(T))
        labs = tuple(int(rng.integers(0, model.n_labels())) for _ in range(T))
        value, _ = crf_log_likelihood(model, [TaggedSequence(toks, labs)])
        assert value >= -1e-12


def test_likelihood_empty_data():
    model = make_model(["x"], 2)
    with pytest.raises(EmptyCorpus):
        crf_log_likelihood(model, [])


# ---------------------------------------------------------------------------
# Decoding


def test_decode_zero_weights_picks_lowest_labels():
    model = make_model(["x", "y"], 3)
    tagged = crf_decode(model, ("x", "y"))
    assert tagged.labels == (0, 0)


def test_decode_matches_enumeration_argmax():
    rng = np.random.default_rng(23)
    vocab = ["a", "b", "c"]
    for _ in range(40):
        model = make_model(vocab, int(rng.integers(2, 5)), rng=rng)
        T = int(rng.integers(1, 5))
        toks = tuple(rng.choice(vocab) for _ in range(T))
        E = dense_emissions(model, toks)
        _, path_scores = crf_brute_force(E, model.transitions.tolist(), model.n_labels())
        best = max(path_scores.items(), key=lambda kv: kv[1])
        ties = [p for p, s in path_scores.items() if abs(s - best[1]) < 1e-9]
        got = crf_decode(model, toks)
        if len(ties) == 1:
            assert got.labels == best[0]
        else:
            assert got.labels in ties


def test_decode_handles_unknown_tokens():
    model = make_model(["a"], 2)
    tagged = crf_decode(model, ("never-seen", "a"))
    assert len(tagged.labels) == 2


def test_decode_empty_sequence_rejected():
    model = make_model(["a"], 2)
    with pytest.raises(EmptyCorpus):
        crf_decode(model, ())


def test_emission_scores_shape():
    model = make_model(["a", "b"], 3)
    assert emission_scores(model, ("a", "b", "a")).shape == (3, 3)


# ---------------------------------------------------------------------------
# Training


def separable_corpus(rng, n_types=12, n_labels=6, n_seqs=60):
    types = ["t%d" % i for i in range(n_types)]
    label_of = {t: "lab%d" % (i % n_labels) for i, t in enumerate(types)}
    corpus = []
    for _ in range(n_seqs):
        T = int(rng.integers(1, 8))
        toks = [types[int(rng.integers(0, n_types))] for _ in range(T)]
        corpus.append((tuple(toks), tuple(label_of[t] for t in toks)))
    return corpus


def test_training_fits_type_separable_corpus_exactly():
    rng = np.random.default_rng(5)
    corpus = separable_corpus(rng)
    model = crf_train(corpus, l2_lambda=1e-3, max_iter=150)
    gold, pred = [], []
    for toks, labs in corpus:
        gold.append(
            TaggedSequence(toks, tuple(model.tagset.index(l) for l in labs))
        )
        pred.append(crf_decode(model, toks))
    scores = evaluate_tagging(gold, pred)
    assert scores == {"precision": 1.0, "recall": 1.0, "f1": 1.0}


def test_training_objective_non_increasing():
    rng = np.random.default_rng(9)
    corpus = separable_corpus(rng, n_types=6, n_labels=3, n_seqs=20)
    history = []
    crf_train(corpus, l2_lambda=1e-2, max_iter=60, history=history)
    assert len(history) >= 2
    for earlier, later in zip(history, history[1:]):
        assert later <= earlier + 1e-12


def test_training_is_bitwise_deterministic():
    rng = np.random.default_rng(13)
    corpus = separable_corpus(rng, n_types=5, n_labels=3, n_seqs=15)
    a = crf_train(corpus, max_iter=40)
    b = crf_train(corpus, max_iter=40)
    assert a.feature_index == b.feature_index
    assert np.array_equal(a.emission, b.emission)
    assert np.array_equal(a.transitions, b.transitions)


def test_training_empty_corpus():
    with pytest.raises(EmptyCorpus):
        crf_train([])


# ---------------------------------------------------------------------------
# Tagging metric


def test_micro_scores_by_hand():
    gold = [TaggedSequence(("a", "b", "c"), (0, 1, 2)), TaggedSequence(("a", "b"), (0, 0))]
    pred = [TaggedSequence(("a", "b", "c"), (0, 1, 1)), TaggedSequence(("a", "b"), (0, 1))]
    scores = evaluate_tagging(gold, pred)
    assert scores["precision"] == pytest.approx(3 / 5)
    assert scores["recall"] == pytest.approx(3 / 5)
    assert scores["f1"] == pytest.approx(3 / 5)


def test_micro_scores_mismatches():
    g = [TaggedSequence(("a",), (0,))]
    with pytest.raises(LengthMismatch):
        evaluate_tagging(g, [])
    with pytest.raises(LengthMismatch):
        evaluate_tagging(g, [TaggedSequence(("a", "b"), (0, 0))])


# ---------------------------------------------------------------------------
# Persistence and corpus loading


def test_model_file_round_trip(tmp_path):
    rng = np.random.default_rng(17)
    corpus = separable_corpus(rng, n_types=5, n_labels=3, n_seqs=12)
    model = crf_train(corpus, l2_lambda=0.02, max_iter=50)
    path = tmp_path / "tagger.crf"
    save_crf_model(model, path)
    loaded = load_crf_model(path)
    assert loaded.tagset.labels == model.tagset.labels
    assert loaded.feature_index == model.feature_index
    assert loaded.templates == model.templates
    assert loaded.l2_lambda == model.l2_lambda
    assert np.array_equal(loaded.emission, model.emission)
    assert np.array_equal(loaded.transitions, model.transitions)
    toks = corpus[0][0]
    assert crf_decode(loaded, toks).labels == crf_decode(model, toks).labels


def test_model_save_is_byte_stable(tmp_path):
    rng = np.random.default_rng(19)
    corpus = separable_corpus(rng, n_types=4, n_labels=2, n_seqs=8)
    model = crf_train(corpus, max_iter=30)
    p1 = tmp_path / "one.crf"
    p2 = tmp_path / "two.crf"
    save_crf_model(model, p1)
    save_crf_model(load_crf_model(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_rejects_non_model(tmp_path):
    path = tmp_path / "junk.crf"
    path.write_text("hello\nworld\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_crf_model(path)


def test_load_tagged_corpus(tmp_path):
    path = tmp_path / "train.tagged"
    path.write_text(
        "မြန်|mjan မာ|ma\nမာ|ma\n",
        encoding="utf-8",
    )
    corpus = load_tagged_corpus(path)
    assert corpus == [
        (("မြန်", "မာ"), ("mjan", "ma")),
        (("မာ",), ("ma",)),
    ]


def test_load_tagged_corpus_requires_labels(tmp_path):
    path = tmp_path / "train.tagged"
    path.write_text("မာ\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_tagged_corpus(path)
