"""Command-line entry point: ``python -m vfrpool <command> ...``.

Exit status is 0 on success, 2 on usage errors and 1 on I/O or domain
errors, which are reported on one line as ``error: <ErrorName>: <message>``.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import dsp, evaluation, formats, network, synth, trainer, vfr
from .errors import InvalidConfig, VfrPoolError
from .pooling import POOLING_MODES


def _is_csv(path):
    return str(path).lower().endswith(".csv")


def _write_features(path, matrix):
    if _is_csv(path):
        formats.write_matrix_csv(path, matrix)
    else:
        formats.write_spf(path, matrix)


def _inputs(wav, out, suffix):
    """Pair each input WAV with an output path; directories map file by file."""
    wav, out = Path(wav), Path(out)
    if wav.is_dir():
        out.mkdir(parents=True, exist_ok=True)
        return [(w, out / (w.stem + suffix)) for w in sorted(wav.glob("*.wav"))]
    return [(wav, out)]


def features_for_audio(audio, normalize=True):
    """MFCCs and aligned conditioning, rounded as their SPF1 archives would be."""
    feats = dsp.extract_mfcc(audio, normalize=normalize).frames
    cond = vfr.conditioning_for_audio(audio, feats.shape[0])
    return _f32(feats), _f32(cond)


def _f32(x):
    return np.asarray(x, dtype=np.float32).astype(np.float64)


# --- commands ---------------------------------------------------------------------

def cmd_extract(args):
    for wav, out in _inputs(args.wav, args.out, ".spf"):
        feats = dsp.extract_mfcc(dsp.load_wav(wav), normalize=not args.no_norm)
        _write_features(out, feats.frames)


def cmd_vfr(args):
    audio = dsp.load_wav(args.wav)
    result = vfr.analyze(audio)
    n_mfcc = dsp.num_frames(audio.samples.size, dsp.MFCC_FRAMES.frame_len(audio.sample_rate_hz),
                            dsp.MFCC_FRAMES.hop(audio.sample_rate_hz))
    cond = vfr.align_conditioning(result.conditioning, max(n_mfcc, 1))
    if _is_csv(args.cond):
        formats.write_csv(args.cond, ["frame", "c"], ([i, int(v)] for i, v in enumerate(cond)))
    else:
        formats.write_spf(args.cond, cond)
    if args.entropy_csv:
        formats.write_csv(args.entropy_csv, ["time_ms", "H"],
                          ([repr(float(t)), repr(float(h))]
                           for t, h in zip(result.curve.times_ms, result.curve.values)))
    if args.mask_csv:
        formats.write_csv(args.mask_csv, ["index", "bit"], ([i, int(b)] for i, b in enumerate(result.mask)))


def cmd_synth(args):
    out = Path(args.out)
    train = synth.synth_dataset(args.speakers, args.utts, args.frames, args.seed)
    trainer.save_dataset(out, train, "train")
    if args.heldout:
        test = synth.synth_dataset(args.speakers, args.heldout, args.frames, args.seed + 1,
                                   speaker_seed=args.seed, prefix="test")
        trainer.save_dataset(out, test, "test", append=True)
        if args.trials:
            trials = evaluation.make_trials([u.utt_id for u in test.utterances],
                                            [u.speaker for u in test.utterances],
                                            args.trials, args.seed)
            formats.write_trials(out / "trials.txt", trials)
    elif args.trials:
        raise InvalidConfig("--trials needs --heldout utterances to draw from")


def cmd_train(args):
    data = trainer.load_dataset(args.data, "train")
    cfg, model_kw = trainer.load_train_config(args.config)
    if args.seed is not None:
        cfg = trainer.TrainConfig(**{**cfg.__dict__, "seed": args.seed})
    mcfg = network.ModelConfig(n_speakers=data.n_speakers, variant=args.variant,
                               input_dim=data.utterances[0].feats.shape[1], **model_kw)
    model = network.init_model(mcfg, cfg.seed)
    log_path = args.log or str(args.out) + ".loss.csv"
    trainer.train(data, cfg, model, checkpoint=args.out, loss_log=log_path)
    if cfg.epochs == 0:
        network.save_model(args.out, model)


def _embedding_rows(args, model):
    if args.data:
        data = trainer.load_dataset(args.data, args.split)
        for u in data.utterances:
            cond = vfr.align_conditioning(u.cond, u.feats.shape[0])
            yield u.utt_id, network.extract_embedding(u.feats, cond, model).vector
    elif args.feats:
        if not args.cond:
            raise InvalidConfig("--feats needs --cond")
        feats = formats.read_spf(args.feats)
        cond = vfr.align_conditioning(formats.read_spf(args.cond)[:, 0], feats.shape[0])
        yield args.utt_id or Path(args.feats).stem, network.extract_embedding(feats, cond, model).vector
    else:
        wav = Path(args.wav)
        files = sorted(wav.glob("*.wav")) if wav.is_dir() else [wav]
        for w in files:
            feats, cond = features_for_audio(dsp.load_wav(w), normalize=not args.no_norm)
            utt = args.utt_id if (args.utt_id and not wav.is_dir()) else w.stem
            yield utt, network.extract_embedding(feats, cond, model).vector


def cmd_embed(args):
    model = network.load_model(args.model)
    rows = list(_embedding_rows(args, model))
    header = ["utterance_id"] + [f"e{j}" for j in range(model.config.embed_dim)]
    formats.write_csv(args.out, header, ([u] + [repr(float(v)) for v in vec] for u, vec in rows))


def read_embeddings(path):
    path = Path(path)
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    table = {}
    for f in files:
        _, rows = formats.read_csv(f)
        for row in rows:
            table[row[0]] = np.array([float(v) for v in row[1:]])
    return table


def cmd_score(args):
    trials = formats.read_trials(args.trials)
    scores = evaluation.score_trials(trials, read_embeddings(args.embeds))
    formats.write_scores(args.out, trials, scores)


def _aligned_scores(trials, path):
    table = formats.read_scores(path)
    missing = [(e, t) for e, t, _ in trials if (e, t) not in table]
    if missing:
        raise KeyError(f"{path}: no score for trial {missing[0][0]} {missing[0][1]}")
    return np.array([table[(e, t)] for e, t, _ in trials])


def cmd_eer(args):
    trials = formats.read_trials(args.trials)
    eer, threshold = evaluation.compute_eer(trials, _aligned_scores(trials, args.scores))
    print(f"EER {eer:.6f} THRESHOLD {threshold:.6f}")


def cmd_mcnemar(args):
    trials = formats.read_trials(args.trials)
    da = evaluation.decisions_at_eer(trials, _aligned_scores(trials, args.scores_a))
    db = evaluation.decisions_at_eer(trials, _aligned_scores(trials, args.scores_b))
    res = evaluation.mcnemar(da, db, trials)
    verdict = "significant" if res.significant_at_05 else "not-significant"
    print(f"STATISTIC {res.statistic:.6f} N01 {res.n01} N10 {res.n10} {verdict}")


# --- parser -------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="vfrpool", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="MFCCs from a WAV file (SPF1, or CSV if OUT ends in .csv)")
    p.add_argument("--wav", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-norm", action="store_true", help="skip sliding-window mean normalization")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("vfr", help="VFR conditioning vector of a WAV file")
    p.add_argument("--wav", required=True)
    p.add_argument("--cond", required=True)
    p.add_argument("--entropy-csv")
    p.add_argument("--mask-csv")
    p.set_defaults(func=cmd_vfr)

    p = sub.add_parser("synth", help="write a synthetic dataset tree")
    p.add_argument("--speakers", type=int, required=True)
    p.add_argument("--utts", type=int, required=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--heldout", type=int, default=0, help="held-out utterances per speaker")
    p.add_argument("--trials", type=int, default=0, help="trials drawn from the held-out set")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model on a dataset tree")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--variant", required=True, choices=POOLING_MODES)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--log", help="loss log CSV (default: OUT.loss.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="speaker embeddings as CSV")
    p.add_argument("--model", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--wav", help="WAV file or directory of WAV files")
    src.add_argument("--feats", help="SPF1 feature archive (with --cond)")
    src.add_argument("--data", help="dataset tree")
    p.add_argument("--cond", help="SPF1 conditioning archive for --feats")
    p.add_argument("--split", default="test", help="dataset split for --data")
    p.add_argument("--utt-id")
    p.add_argument("--no-norm", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("score", help="cosine-score a trial list")
    p.add_argument("--trials", required=True)
    p.add_argument("--embeds", required=True, help="embedding CSV or directory of CSVs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eer", help="equal error rate of a score file")
    p.add_argument("--trials", required=True)
    p.add_argument("--scores", required=True)
    p.set_defaults(func=cmd_eer)

    p = sub.add_parser("mcnemar", help="McNemar's test between two systems at their EER points")
    p.add_argument("--trials", required=True)
    p.add_argument("--scores-a", required=True)
    p.add_argument("--scores-b", required=True)
    p.set_defaults(func=cmd_mcnemar)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        args.func(args)
    except VfrPoolError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
