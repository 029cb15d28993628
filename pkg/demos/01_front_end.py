"""Front end walk-through: WAV in, mean-normalized MFCCs out.

Run:  python3 demos/01_front_end.py
"""
import tempfile
from pathlib import Path

import numpy as np

from vfrpool import dsp, synth

# A two-second mix of tones, chirps, noise bursts and near silence, written
# as 16-bit PCM and read back the way a real recording would be.
tmp = Path(tempfile.mkdtemp())
dsp.save_wav(tmp / "mix.wav", synth.random_audio(seed=7))
audio = dsp.load_wav(tmp / "mix.wav")
print(f"{audio.samples.size} samples at {audio.sample_rate_hz} Hz")

# 25 ms Hamming frames every 10 ms -> 30 mel bands -> log -> DCT.
mel = dsp.mel_spectrogram(audio, dsp.MFCC_FRAMES)
print("mel energies:", mel.frames.shape, "(frames x bands)")

raw = dsp.mfcc(mel)
norm = dsp.sliding_mean_normalize(raw)
print("MFCCs:", norm.frames.shape)

# c0 tracks loudness, so it swings between the silent and loud segments.
print("c0 range before normalization: %.2f .. %.2f" % (raw.frames[:, 0].min(), raw.frames[:, 0].max()))
print("mean of c0 after 3 s sliding normalization: %.3g" % norm.frames[:, 0].mean())

# The same features through the one-call helper.
assert np.allclose(dsp.extract_mfcc(audio).frames, norm.frames)
print("extract_mfcc agrees with the step-by-step pipeline")
