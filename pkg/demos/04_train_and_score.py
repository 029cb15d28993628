"""Train two small speaker-embedding models on synthetic speakers and
compare them on a held-out trial list: EER for each, McNemar between them.

Takes about a minute on one core.

Run:  python3 demos/04_train_and_score.py
"""
import numpy as np

from vfrpool import evaluation, network, synth, trainer

train_set = synth.synth_dataset(6, 6, 400, seed=0)
test_set = synth.synth_dataset(6, 6, 400, seed=1, speaker_seed=0, prefix="test")
trials = evaluation.make_trials([u.utt_id for u in test_set.utterances],
                                [u.speaker for u in test_set.utterances], 120, seed=0)
print(f"{len(train_set)} training utterances, {len(trials)} trials")

cfg = trainer.TrainConfig(batch_size=16, epochs=10, chunk_len_frames=200, chunks_per_utt=2, seed=0)
decisions, scores_by = {}, {}
for variant in ("none", "combined_a"):
    mcfg = network.ModelConfig(n_speakers=6, variant=variant, frame_dim=48, pool_dim=128,
                               embed_dim=48, attention_dim=24)
    model, hist = trainer.train(train_set, cfg, network.init_model(mcfg, seed=0))
    print(f"[{variant}] final epoch: loss {hist[-1][1]:.3f}, train accuracy {hist[-1][2]:.2%}")

    emb = {u.utt_id: network.extract_embedding(u.feats, u.cond, model).vector
           for u in test_set.utterances}
    scores = evaluation.score_trials(trials, emb)
    eer, th = evaluation.compute_eer(trials, scores)
    print(f"[{variant}] EER {eer:.2%} at cosine threshold {th:.3f}")
    decisions[variant] = evaluation.decisions_at_eer(trials, scores)

res = evaluation.mcnemar(decisions["none"], decisions["combined_a"], trials)
print(f"McNemar: statistic {res.statistic:.3f} (n01={res.n01}, n10={res.n10}), "
      f"{'significant' if res.significant_at_05 else 'not significant'} at p < 0.05")
