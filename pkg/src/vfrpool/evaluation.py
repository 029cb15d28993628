"""Verification scoring: cosine similarity, EER and McNemar's test."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTrials, DimensionMismatch, LengthMismatch, ZeroVector

CHI2_1DOF_05 = 3.841


@dataclass
class DecisionSet:
    decisions: np.ndarray  # bool, accept
    threshold: float


@dataclass
class McNemarResult:
    statistic: float
    significant_at_05: bool
    n01: int  # A wrong, B right
    n10: int  # A right, B wrong


def _vec(x):
    return np.asarray(getattr(x, "vector", x), dtype=np.float64)


def cosine_score(a, b):
    a, b = _vec(a), _vec(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"embedding shapes differ: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cannot score an all-zero embedding")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def score_trials(trials, embeddings):
    """Cosine score for every ``(enroll, test, is_target)`` trial.

    ``embeddings`` maps utterance id to vector.
    """
    missing = {u for e, t, _ in trials for u in (e, t)} - set(embeddings)
    if missing:
        raise KeyError(f"no embedding for {len(missing)} utterances, e.g. {sorted(missing)[0]}")
    return np.array([cosine_score(embeddings[e], embeddings[t]) for e, t, _ in trials])


def _labels(trials):
    if len(trials) and isinstance(trials[0], tuple):
        return np.array([bool(t[2]) for t in trials])
    return np.asarray(trials, dtype=bool)


def _split(trials, scores):
    labels = _labels(trials)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape:
        raise LengthMismatch(f"{labels.size} trials but {scores.size} scores")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    tar, non = scores[labels], scores[~labels]
    if tar.size == 0 or non.size == 0:
        raise DegenerateTrials("EER needs at least one target and one nontarget trial")
    return tar, non


def operating_points(trials, scores):
    """(thresholds, FAR, FRR) at every distinct score plus one point above the maximum.

    FAR(th) is the fraction of nontargets scoring >= th, FRR(th) the fraction
    of targets scoring < th.
    """
    tar, non = _split(trials, scores)
    th = np.unique(np.concatenate([tar, non]))
    th = np.append(th, np.nextafter(th[-1], np.inf))
    tar_s, non_s = np.sort(tar), np.sort(non)
    far = 1.0 - np.searchsorted(non_s, th, side="left") / non.size
    frr = np.searchsorted(tar_s, th, side="left") / tar.size
    return th, far, frr


def compute_eer(trials, scores):
    """Equal error rate and its threshold.

    ``trials`` is a list of ``(enroll, test, is_target)`` tuples or a boolean
    label array. When FAR and FRR never tie, both curves are interpolated
    linearly between the two operating points that bracket the crossing.
    """
    th, far, frr = operating_points(trials, scores)
    k = int(np.argmax(frr >= far))  # exists: the last point has FAR = 0
    if frr[k] == far[k]:
        return float(far[k]), float(th[k])
    d_prev = far[k - 1] - frr[k - 1]
    d_next = frr[k] - far[k]
    lam = d_prev / (d_prev + d_next)
    eer = far[k - 1] + lam * (far[k] - far[k - 1])
    return float(eer), float(th[k - 1] + lam * (th[k] - th[k - 1]))


def decisions_at_eer(trials, scores):
    _, threshold = compute_eer(trials, scores)
    return DecisionSet(np.asarray(scores, dtype=np.float64) >= threshold, threshold)


def mcnemar(a, b, truth):
    """McNemar's test (no continuity correction) on paired accept/reject decisions."""
    da = np.asarray(getattr(a, "decisions", a), dtype=bool)
    db = np.asarray(getattr(b, "decisions", b), dtype=bool)
    labels = _labels(truth)
    if not (da.shape == db.shape == labels.shape):
        raise LengthMismatch(f"decision sets {da.shape}, {db.shape} vs {labels.shape} trials")
    a_ok = da == labels
    b_ok = db == labels
    n01 = int(np.sum(~a_ok & b_ok))
    n10 = int(np.sum(a_ok & ~b_ok))
    if n01 + n10 == 0:
        return McNemarResult(0.0, False, n01, n10)
    stat = (n01 - n10) ** 2 / (n01 + n10)
    return McNemarResult(float(stat), bool(stat > CHI2_1DOF_05), n01, n10)


def make_trials(utt_ids, speakers, n_trials, seed):
    """Balanced random trial list over distinct utterance pairs.

    Half the trials (rounded up) are same-speaker pairs. Pairs are drawn
    without replacement.
    """
    rng = np.random.default_rng(seed)
    utt_ids = list(utt_ids)
    speakers = np.asarray(speakers)
    idx = np.arange(len(utt_ids))
    i, j = np.triu_indices(len(utt_ids), k=1)
    same = speakers[i] == speakers[j]
    n_tar = (n_trials + 1) // 2
    n_non = n_trials - n_tar
    tar_pairs = np.flatnonzero(same)
    non_pairs = np.flatnonzero(~same)
    if tar_pairs.size < n_tar or non_pairs.size < n_non:
        raise DegenerateTrials(
            f"cannot draw {n_tar} target / {n_non} nontarget pairs from {idx.size} utterances"
        )
    picked = np.concatenate([rng.choice(tar_pairs, n_tar, replace=False),
                             rng.choice(non_pairs, n_non, replace=False)])
    picked = picked[rng.permutation(picked.size)]
    return [(utt_ids[i[p]], utt_ids[j[p]], bool(same[p])) for p in picked]
