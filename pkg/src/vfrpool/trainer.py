"""Desk-scale speaker-classification training: chunked minibatches, Adam."""

import csv
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import network
from .errors import EmptyDataset, InvalidConfig, LabelOutOfRange, MalformedFile, ShapeMismatch
from .formats import read_key_values, read_spf, write_spf
from .vfr import align_conditioning

log = logging.getLogger(__name__)

MODEL_KEYS = ("frame_dim", "pool_dim", "embed_dim", "attention_dim")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    epochs: int = 20
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    chunk_len_frames: int = 200
    chunks_per_utt: int = 1
    seed: int = 0

    def validate(self):
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")
        if self.chunk_len_frames < 15:
            raise InvalidConfig("chunk_len_frames must be >= 15 (network receptive field)")
        if self.epochs < 0 or self.chunks_per_utt < 1:
            raise InvalidConfig("epochs must be >= 0 and chunks_per_utt >= 1")
        if self.learning_rate < 0:
            raise InvalidConfig("learning_rate must be non-negative")
        return self


def load_train_config(path):
    """Read a ``key = value`` config file.

    Returns ``(TrainConfig, model_overrides)``; model keys are
    ``frame_dim``, ``pool_dim``, ``embed_dim`` and ``attention_dim``.
    Unknown keys are an error.
    """
    raw = read_key_values(path)
    types = {f.name: f.type for f in fields(TrainConfig)}
    train_kw, model_kw = {}, {}
    for key, value in raw.items():
        try:
            if key in types:
                train_kw[key] = float(value) if types[key] in (float, "float") else int(value)
            elif key in MODEL_KEYS:
                model_kw[key] = int(value)
            else:
                raise InvalidConfig(f"{path}: unknown config key {key!r}")
        except ValueError:
            raise InvalidConfig(f"{path}: bad value {value!r} for {key!r}") from None
    return TrainConfig(**train_kw).validate(), model_kw


@dataclass
class Utterance:
    feats: np.ndarray  # (T, D)
    cond: np.ndarray  # raw VFR conditioning, roughly T values
    speaker: int
    utt_id: str
    style: str = ""


@dataclass
class Dataset:
    utterances: list
    speakers: list = field(default_factory=list)

    def __len__(self):
        return len(self.utterances)

    @property
    def n_speakers(self):
        return len(self.speakers)

    def validate(self, min_frames=15):
        if not self.utterances:
            raise EmptyDataset("dataset has no utterances")
        ids = sorted({u.speaker for u in self.utterances})
        if ids != list(range(len(self.speakers))):
            raise InvalidConfig("speaker ids must be dense 0..S-1 and match the speaker table")
        short = [u.utt_id for u in self.utterances if u.feats.shape[0] < min_frames]
        if short:
            raise InvalidConfig(f"{len(short)} utterances shorter than {min_frames} frames, e.g. {short[0]}")
        return self


@dataclass
class Batch:
    feats: np.ndarray  # (B, L, D)
    cond: np.ndarray  # (B, L)
    labels: np.ndarray  # (B,)
    chunks: list  # (utterance index, offset)


def chunk(utt, offset, length):
    T = utt.feats.shape[0]
    c = align_conditioning(utt.cond, T)
    return utt.feats[offset: offset + length], c[offset: offset + length]


def make_batches(data, cfg, epoch):
    """Fixed-length random chunks, shuffled deterministically from (seed, epoch)."""
    if len(data) == 0:
        raise EmptyDataset("dataset has no utterances")
    L = cfg.chunk_len_frames
    rng = np.random.default_rng([cfg.seed, epoch])
    refs = []
    for i, utt in enumerate(data.utterances):
        T = utt.feats.shape[0]
        if T < L:
            raise InvalidConfig(f"utterance {utt.utt_id} has {T} frames, chunk length is {L}")
        for _ in range(cfg.chunks_per_utt):
            refs.append((i, int(rng.integers(0, T - L + 1))))
    order = rng.permutation(len(refs))
    batches = []
    for start in range(0, len(refs), cfg.batch_size):
        sel = [refs[k] for k in order[start: start + cfg.batch_size]]
        pieces = [chunk(data.utterances[i], off, L) for i, off in sel]
        batches.append(Batch(
            feats=np.stack([f for f, _ in pieces]),
            cond=np.stack([c for _, c in pieces]),
            labels=np.array([data.utterances[i].speaker for i, _ in sel]),
            chunks=sel,
        ))
    return batches


def log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits, label):
    """Negative log-softmax of the true class.

    For a (B, S) batch with B labels the per-example losses are returned.
    """
    logits = np.asarray(logits, dtype=np.float64)
    label = np.asarray(label)
    S = logits.shape[-1]
    if np.any(label < 0) or np.any(label >= S):
        raise LabelOutOfRange(f"label out of range for {S} classes")
    lsm = log_softmax(logits)
    if logits.ndim == 1:
        return float(-lsm[int(label)])
    return -lsm[np.arange(logits.shape[0]), label]


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params, grads, state, cfg):
    """One bias-corrected Adam update, applied in place to ``params``.

    Returns ``(params, state)``. Only names present in ``grads`` are touched.
    """
    state.step += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
    return params, state


def train(data, cfg, model, checkpoint=None, loss_log=None):
    """Train a copy of ``model``; returns ``(model, history)``.

    ``history`` holds one ``(epoch, mean_loss, train_accuracy)`` row per
    epoch, computed on the chunks seen during that epoch. When given,
    ``checkpoint`` is rewritten after every epoch and ``loss_log`` receives
    the history as CSV.
    """
    cfg.validate()
    data.validate(min_frames=cfg.chunk_len_frames)
    if data.n_speakers != model.config.n_speakers:
        raise InvalidConfig(
            f"dataset has {data.n_speakers} speakers, model expects {model.config.n_speakers}"
        )
    model = model.copy()
    state = AdamState()
    history = []
    for epoch in range(cfg.epochs):
        total_loss, correct, seen = 0.0, 0, 0
        for batch in make_batches(data, cfg, epoch):
            logits, cache = network.forward(batch.feats, batch.cond, model)
            losses = cross_entropy(logits, batch.labels)
            grads = network.backward(cache, batch.labels, model)
            adam_step(model.params, grads, state, cfg)
            total_loss += float(losses.sum())
            correct += int((logits.argmax(axis=1) == batch.labels).sum())
            seen += len(batch.labels)
        row = (epoch, total_loss / seen, correct / seen)
        history.append(row)
        log.info("epoch %d loss %.4f acc %.3f", *row)
        if checkpoint is not None:
            network.save_model(checkpoint, model)
    if loss_log is not None:
        write_loss_log(loss_log, history)
    return model, history


def write_loss_log(path, history):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "mean_loss", "train_accuracy"])
        for epoch, loss, acc in history:
            w.writerow([epoch, repr(loss), repr(acc)])


def batch_loss(model, feats, cond, labels):
    logits, _ = network.forward(feats, cond, model)
    return float(np.mean(cross_entropy(np.atleast_2d(logits), np.atleast_1d(labels))))


# --- dataset tree ----------------------------------------------------------------
# DIR/manifest.tsv : utt_id <tab> speaker <tab> style <tab> split
# DIR/feats/<utt_id>.spf, DIR/cond/<utt_id>.spf

MANIFEST = "manifest.tsv"


def save_dataset(root, data, split="train", append=False):
    root = Path(root)
    (root / "feats").mkdir(parents=True, exist_ok=True)
    (root / "cond").mkdir(parents=True, exist_ok=True)
    mode = "a" if append else "w"
    with open(root / MANIFEST, mode) as f:
        if not append:
            f.write("utt_id\tspeaker\tstyle\tsplit\n")
        for u in data.utterances:
            write_spf(root / "feats" / f"{u.utt_id}.spf", u.feats)
            write_spf(root / "cond" / f"{u.utt_id}.spf", u.cond)
            f.write(f"{u.utt_id}\t{data.speakers[u.speaker]}\t{u.style}\t{split}\n")


def load_dataset(root, split="train"):
    """Load one split of a dataset tree; speaker ids are assigned in sorted name order."""
    root = Path(root)
    rows = []
    with open(root / MANIFEST) as f:
        header = f.readline().rstrip("\n").split("\t")
        if header != ["utt_id", "speaker", "style", "split"]:
            raise MalformedFile(f"{root / MANIFEST}: unexpected header {header}")
        for line in f:
            if line.strip():
                rows.append(line.rstrip("\n").split("\t"))
    rows = [r for r in rows if split is None or r[3] == split]
    if not rows:
        raise EmptyDataset(f"{root}: no utterances in split {split!r}")
    speakers = sorted({r[1] for r in rows})
    index = {s: i for i, s in enumerate(speakers)}
    utts = []
    for utt_id, spk, style, _ in rows:
        feats = read_spf(root / "feats" / f"{utt_id}.spf")
        cond = read_spf(root / "cond" / f"{utt_id}.spf")[:, 0]
        utts.append(Utterance(feats, cond, index[spk], utt_id, style))
    return Dataset(utts, speakers)
