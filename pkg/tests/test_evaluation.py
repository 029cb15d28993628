import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vfrpool import evaluation as ev
from vfrpool.errors import DegenerateTrials, DimensionMismatch, LengthMismatch, ZeroVector


def brute_force_eer(labels, scores):
    """(FAR, FRR) at every candidate threshold, counted trial by trial."""
    labels = np.asarray(labels, bool)
    scores = np.asarray(scores, float)
    cands = sorted(set(scores.tolist())) + [np.nextafter(scores.max(), np.inf)]
    pts = []
    for th in cands:
        far = sum(1 for s, l in zip(scores, labels) if not l and s >= th) / (~labels).sum()
        frr = sum(1 for s, l in zip(scores, labels) if l and s < th) / labels.sum()
        pts.append((far, frr))
    return pts


# --- cosine ----------------------------------------------------------------------------

def test_cosine_examples():
    v = np.array([1.0, -2.0, 3.0])
    assert ev.cosine_score(v, v) == pytest.approx(1.0)
    assert ev.cosine_score(v, -v) == pytest.approx(-1.0)
    assert ev.cosine_score([1, 0], [0, 5]) == 0.0


def test_cosine_errors():
    with pytest.raises(ZeroVector):
        ev.cosine_score([0, 0], [1, 1])
    with pytest.raises(DimensionMismatch):
        ev.cosine_score([1, 2], [1, 2, 3])


# --- EER ---------------------------------------------------------------------------------

def test_eer_perfect_separation():
    eer, _ = ev.compute_eer([True, True, False, False], [0.8, 0.9, 0.1, 0.2])
    assert eer == 0.0


def test_eer_interleaved():
    eer, th = ev.compute_eer([True, True, False, False], [0.9, 0.2, 0.8, 0.1])
    assert eer == 0.5
    assert th == 0.8


def test_eer_flipped_labels():
    eer, _ = ev.compute_eer([False, False, True, True], [0.8, 0.9, 0.1, 0.2])
    assert eer == 1.0


def test_eer_accepts_trial_tuples():
    trials = [("a", "b", True), ("a", "c", False)]
    assert ev.compute_eer(trials, [0.7, 0.1])[0] == 0.0


def test_eer_degenerate():
    with pytest.raises(DegenerateTrials):
        ev.compute_eer([True, True], [0.1, 0.2])
    with pytest.raises(LengthMismatch):
        ev.compute_eer([True, False], [0.1])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(-20, 20)), min_size=2, max_size=30))
def test_eer_lies_between_bracketing_operating_points(pairs):
    labels = [p[0] for p in pairs]
    if all(labels) or not any(labels):
        return
    scores = [p[1] / 4 for p in pairs]
    eer, _ = ev.compute_eer(labels, scores)
    pts = brute_force_eer(labels, scores)
    k = next(i for i, (far, frr) in enumerate(pts) if frr >= far)
    lo = min(pts[k][0], pts[k][1], pts[max(k - 1, 0)][0], pts[max(k - 1, 0)][1])
    hi = max(pts[k][0], pts[k][1], pts[max(k - 1, 0)][0], pts[max(k - 1, 0)][1])
    assert 0.0 <= eer <= 1.0
    assert lo - 1e-12 <= eer <= hi + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(-40, 40)), min_size=2, max_size=40))
def test_eer_invariant_under_monotone_transform(pairs):
    labels = [p[0] for p in pairs]
    if all(labels) or not any(labels):
        return
    # grid spacing keeps the transform strictly monotone after rounding
    scores = np.array([p[1] / 8 for p in pairs])
    a, _ = ev.compute_eer(labels, scores)
    b, _ = ev.compute_eer(labels, np.arctan(scores) * 3 + 1)
    assert a == pytest.approx(b, abs=1e-12)


def test_eer_random_scores_near_half():
    rng = np.random.default_rng(42)
    labels = np.arange(1000) % 2 == 0
    eer, _ = ev.compute_eer(labels, rng.normal(size=1000))
    assert 0.35 <= eer <= 0.65


# --- decisions and McNemar ------------------------------------------------------------------

def test_decisions_at_eer_perfect():
    labels = np.array([True, True, False, False])
    d = ev.decisions_at_eer(labels, [0.8, 0.9, 0.1, 0.2])
    np.testing.assert_array_equal(d.decisions, labels)


def test_decisions_all_equal_scores():
    d = ev.decisions_at_eer([True, False, True, False], [0.3] * 4)
    assert len(set(d.decisions.tolist())) == 1


def test_decisions_recount_far_frr():
    rng = np.random.default_rng(3)
    labels = rng.random(400) < 0.5
    scores = rng.normal(size=400) + labels
    d = ev.decisions_at_eer(labels, scores)
    far = (d.decisions & ~labels).sum() / (~labels).sum()
    frr = (~d.decisions & labels).sum() / labels.sum()
    assert abs(far - frr) < 0.02


def _pair(n01, n10, n_agree=5):
    truth = np.ones(n01 + n10 + n_agree, dtype=bool)
    a = np.ones_like(truth)
    b = np.ones_like(truth)
    a[:n01] = False  # A wrong, B right
    b[n01:n01 + n10] = False  # A right, B wrong
    return a, b, truth


def test_mcnemar_examples():
    res = ev.mcnemar(*_pair(10, 2))
    assert (res.n01, res.n10) == (10, 2)
    assert res.statistic == pytest.approx(64 / 12)
    assert res.significant_at_05
    res = ev.mcnemar(*_pair(50, 50))
    assert res.statistic == 0.0 and not res.significant_at_05
    a, _, truth = _pair(3, 0)
    res = ev.mcnemar(a, a, truth)
    assert (res.statistic, res.n01, res.n10, res.significant_at_05) == (0.0, 0, 0, False)


@pytest.mark.parametrize("n01,n10", [(0, 7), (4, 1), (12, 30)])
def test_mcnemar_symmetry(n01, n10):
    a, b, truth = _pair(n01, n10)
    ab, ba = ev.mcnemar(a, b, truth), ev.mcnemar(b, a, truth)
    assert ab.statistic == ba.statistic
    assert (ab.n01, ab.n10) == (ba.n10, ba.n01)


def test_mcnemar_length_mismatch():
    with pytest.raises(LengthMismatch):
        ev.mcnemar([True], [True, False], [True, False])


# --- trial generation ---------------------------------------------------------------------------

def test_make_trials_balanced_and_labelled():
    ids = [f"u{i}" for i in range(12)]
    spk = [i // 3 for i in range(12)]
    trials = ev.make_trials(ids, spk, 20, seed=1)
    assert sum(t for _, _, t in trials) == 10
    assert len({(e, t) for e, t, _ in trials}) == 20
    lookup = dict(zip(ids, spk))
    assert all((lookup[e] == lookup[t]) == tgt for e, t, tgt in trials)
    assert trials == ev.make_trials(ids, spk, 20, seed=1)


def test_make_trials_too_many():
    with pytest.raises(DegenerateTrials):
        ev.make_trials(["a", "b", "c"], [0, 0, 1], 6, seed=0)


def test_score_trials_matches_cosine():
    rng = np.random.default_rng(0)
    emb = {k: rng.normal(size=5) for k in "abcd"}
    trials = [(e, t, e < t) for e, t in itertools.combinations("abcd", 2)]
    scores = ev.score_trials(trials, emb)
    for (e, t, _), s in zip(trials, scores):
        ref = emb[e] @ emb[t] / np.linalg.norm(emb[e]) / np.linalg.norm(emb[t])
        assert s == pytest.approx(ref, abs=1e-12)
    with pytest.raises(KeyError):
        ev.score_trials([("a", "z", True)], emb)
