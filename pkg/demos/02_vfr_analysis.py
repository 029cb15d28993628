"""Variable frame rate analysis on a signal with two entropy levels.

Noise blocks alternate with a steady 400 Hz tone. The tone sits at the
entropy floor and is picked at the slowest rate (every 5th oversampled
frame); the noise blocks, whose entropy wanders around the median, are
picked noticeably more often. Buffers that straddle a block edge see both
levels, which pulls the tone blocks' average spacing a little below 5.

Run:  python3 demos/02_vfr_analysis.py
"""
import numpy as np

from vfrpool import dsp, synth, vfr

audio = synth.two_level_audio(seed=0, n_blocks=4, block_s=0.3)
res = vfr.analyze(audio)
th = res.thresholds

print(f"entropy curve: {len(res.curve)} points, one per 15 ms")
print(f"  max {th.m_max:.2f}  median {th.m_med:.2f}  min {th.m_min:.2f}")
print(f"  thresholds T1 {th.t1:.2f}  T2 {th.t2:.2f}  T3 {th.t3:.2f}")

block = int(0.3 * 1000 / 2.5)  # oversampled frames per block
for b in range(4):
    seg = res.mask[b * block:(b + 1) * block]
    kind = "noise" if b % 2 == 0 else "tone "
    print(f"block {b} ({kind}): {seg.sum():3d} picks in {seg.size} frames, "
          f"one every {seg.size / seg.sum():.1f}")

c = res.conditioning
print("conditioning vector (picks per 10 ms), first 40 values:")
print(" ", c[:40].astype(int))
print("values used:", sorted(set(c.astype(int).tolist())))

# Aligned to the MFCC grid, ready to feed the network.
feats = dsp.extract_mfcc(audio)
aligned = vfr.align_conditioning(c, feats.frames.shape[0])
print(f"{feats.frames.shape[0]} MFCC frames, {aligned.size} conditioning values")
assert np.all(aligned >= 0) and np.all(aligned <= 4)
