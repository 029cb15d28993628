import math
import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vfrpool import dsp
from vfrpool.errors import (
    AudioTooShort,
    DimensionMismatch,
    EmptyAudio,
    MalformedHeader,
    UnsupportedEncoding,
)


def write_pcm16(path, pcm, rate=16000, channels=1):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(np.asarray(pcm, dtype="<i2").tobytes())


# --- load_wav -------------------------------------------------------------------

def test_load_zero_second(tmp_path):
    write_pcm16(tmp_path / "z.wav", np.zeros(16000, dtype=np.int16))
    audio = dsp.load_wav(tmp_path / "z.wav")
    assert audio.sample_rate_hz == 16000
    assert audio.samples.shape == (16000,)
    assert not audio.samples.any()


def test_load_max_amplitude(tmp_path):
    write_pcm16(tmp_path / "m.wav", np.full(100, 32767, dtype=np.int16))
    audio = dsp.load_wav(tmp_path / "m.wav")
    assert np.all(audio.samples == 32767 / 32768)


def test_sine_roundtrip_is_bit_exact(tmp_path):
    t = np.arange(16000) / 16000
    quantized = np.round(0.8 * np.sin(2 * np.pi * 440 * t) * 32768) / 32768
    dsp.save_wav(tmp_path / "s.wav", dsp.AudioBuffer(quantized))
    back = dsp.load_wav(tmp_path / "s.wav")
    assert np.array_equal(back.samples, quantized)
    dsp.save_wav(tmp_path / "s2.wav", back)
    assert (tmp_path / "s.wav").read_bytes() == (tmp_path / "s2.wav").read_bytes()


def test_load_errors(tmp_path):
    (tmp_path / "junk.wav").write_bytes(b"not a riff file at all")
    with pytest.raises(MalformedHeader):
        dsp.load_wav(tmp_path / "junk.wav")

    write_pcm16(tmp_path / "stereo.wav", np.zeros(200, dtype=np.int16), channels=2)
    with pytest.raises(UnsupportedEncoding):
        dsp.load_wav(tmp_path / "stereo.wav")

    with wave.open(str(tmp_path / "8bit.wav"), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(1)
        w.setframerate(16000)
        w.writeframes(bytes(100))
    with pytest.raises(UnsupportedEncoding):
        dsp.load_wav(tmp_path / "8bit.wav")

    # IEEE float format tag (3)
    fmt = struct.pack("<HHIIHH", 3, 1, 16000, 64000, 4, 32)
    data = struct.pack("<f", 0.5) * 10
    riff = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(data)) + data
    (tmp_path / "float.wav").write_bytes(b"RIFF" + struct.pack("<I", len(riff)) + riff)
    with pytest.raises(UnsupportedEncoding):
        dsp.load_wav(tmp_path / "float.wav")

    write_pcm16(tmp_path / "empty.wav", np.zeros(0, dtype=np.int16))
    with pytest.raises(EmptyAudio):
        dsp.load_wav(tmp_path / "empty.wav")


# --- framing --------------------------------------------------------------------------

def test_frame_counts():
    spec = dsp.FrameSpec(25, 10)
    assert dsp.frame_signal(dsp.AudioBuffer(np.ones(400)), spec).shape == (1, 400)
    assert dsp.frame_signal(dsp.AudioBuffer(np.ones(560)), spec).shape == (2, 400)
    with pytest.raises(AudioTooShort):
        dsp.frame_signal(dsp.AudioBuffer(np.ones(399)), spec)


@settings(max_examples=60, deadline=None)
@given(st.integers(400, 5000), st.sampled_from([10.0, 2.5, 25.0]))
def test_frame_count_formula(n, hop_ms):
    spec = dsp.FrameSpec(25, hop_ms, "rectangular")
    audio = dsp.AudioBuffer(np.arange(n, dtype=float))
    frames = dsp.frame_signal(audio, spec)
    hop = int(hop_ms * 16)
    assert frames.shape[0] == (n - 400) // hop + 1
    # frame i covers samples [i*hop, i*hop + 400)
    i = frames.shape[0] - 1
    assert frames[i, 0] == i * hop and frames[i, -1] == i * hop + 399


def test_hamming_coefficients():
    frames = dsp.frame_signal(dsp.AudioBuffer(np.ones(400)), dsp.FrameSpec(25, 10, "hamming"))
    n = np.arange(400)
    np.testing.assert_allclose(frames[0], 0.54 - 0.46 * np.cos(2 * np.pi * n / 399), rtol=0, atol=1e-15)


def test_constant_signal_rectangular_frames_identical():
    frames = dsp.frame_signal(dsp.AudioBuffer(np.full(3000, 0.25)), dsp.FrameSpec(25, 2.5, "rectangular"))
    assert np.all(frames == frames[0])


# --- mel spectrogram ----------------------------------------------------------------------

def naive_band_energies(frame, sample_rate, n_mels, n_fft):
    """Direct DFT summation and scalar triangular weights."""
    edges_mel = np.linspace(2595 * math.log10(1 + 20 / 700), 2595 * math.log10(1 + sample_rate / 2 / 700), n_mels + 2)
    edges = [700 * (10 ** (m / 2595) - 1) for m in edges_mel]
    x = np.zeros(n_fft)
    x[: frame.size] = frame
    out = np.zeros(n_mels)
    n = np.arange(n_fft)
    for k in range(n_fft // 2 + 1):
        re = float(np.sum(x * np.cos(2 * np.pi * k * n / n_fft)))
        im = float(np.sum(x * np.sin(2 * np.pi * k * n / n_fft)))
        power = re * re + im * im
        f = k * sample_rate / n_fft
        for b in range(n_mels):
            lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
            if lo < f <= mid:
                out[b] += power * (f - lo) / (mid - lo)
            elif mid < f < hi:
                out[b] += power * (hi - f) / (hi - mid)
    return out


def test_silence_gives_zero_energies():
    mel = dsp.mel_spectrogram(dsp.AudioBuffer(np.zeros(1600)), dsp.MFCC_FRAMES, 30)
    assert np.all(mel.frames == 0)


@pytest.mark.parametrize("band", [8, 15, 22, 27])
def test_tone_at_band_center_peaks_in_that_band(band):
    center = dsp.mel_band_edges(30, 16000)[band + 1]
    t = np.arange(1600) / 16000
    audio = dsp.AudioBuffer(0.5 * np.sin(2 * np.pi * center * t))
    mel = dsp.mel_spectrogram(audio, dsp.MFCC_FRAMES, 30)
    assert np.all(mel.frames.argmax(axis=1) == band)
    frame = dsp.frame_signal(audio, dsp.MFCC_FRAMES)[0]
    oracle = naive_band_energies(frame, 16000, 30, 512)
    assert oracle.argmax() == band
    np.testing.assert_allclose(mel.frames[0], oracle, rtol=1e-9, atol=1e-9)


def test_doubling_amplitude_quadruples_energy():
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.4, 0.4, 2000)
    a = dsp.mel_spectrogram(dsp.AudioBuffer(x), dsp.VFR_FRAMES, 30).frames
    b = dsp.mel_spectrogram(dsp.AudioBuffer(2 * x), dsp.VFR_FRAMES, 30).frames
    np.testing.assert_allclose(b, 4 * a, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_mel_nonnegative_and_mfcc_finite(seed, amp):
    x = amp * np.random.default_rng(seed).uniform(-1, 1, 1200)
    mel = dsp.mel_spectrogram(dsp.AudioBuffer(x), dsp.MFCC_FRAMES, 30)
    assert np.all(mel.frames >= 0)
    assert np.all(np.isfinite(dsp.mfcc(mel).frames))


def test_filterbank_needs_two_bands():
    with pytest.raises(ValueError):
        dsp.mel_filterbank(1, 512, 16000)


# --- MFCC -------------------------------------------------------------------------------

def naive_dct_ortho(x):
    K = x.size
    out = np.zeros(K)
    for k in range(K):
        s = sum(x[n] * math.cos(math.pi * k * (2 * n + 1) / (2 * K)) for n in range(K))
        out[k] = s * math.sqrt((1 if k == 0 else 2) / K)
    return out


def test_mfcc_matches_naive_dct():
    rng = np.random.default_rng(3)
    mel = dsp.MelSpectrogram(rng.uniform(1e-3, 50, size=(4, 30)), 10.0)
    got = dsp.mfcc(mel).frames
    for row, energies in zip(got, mel.frames):
        ref = naive_dct_ortho(np.log(energies))
        assert np.max(np.abs(row - ref)) <= 1e-9 * np.max(np.abs(ref))


def test_mfcc_constant_energies():
    e = 3.5
    got = dsp.mfcc(dsp.MelSpectrogram(np.full((2, 30), e), 10.0)).frames
    np.testing.assert_allclose(got[:, 0], math.sqrt(30) * math.log(e), rtol=1e-12)
    np.testing.assert_allclose(got[:, 1:], 0, atol=1e-12)


def test_mfcc_of_silence_is_finite_and_constant():
    mel = dsp.mel_spectrogram(dsp.AudioBuffer(np.zeros(3000)), dsp.MFCC_FRAMES, 30)
    feats = dsp.mfcc(mel).frames
    assert np.all(np.isfinite(feats))
    assert np.all(feats == feats[0])
    assert feats.shape[1] == 30


def test_mfcc_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        dsp.mfcc(dsp.MelSpectrogram(np.ones((3, 20)), 10.0), 30)


# --- sliding mean normalization -----------------------------------------------------------------

def test_short_utterance_is_globally_centered():
    rng = np.random.default_rng(1)
    feats = dsp.MfccMatrix(rng.normal(size=(250, 30)))
    out = dsp.sliding_mean_normalize(feats)
    assert out.normalized
    np.testing.assert_allclose(out.frames.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(out.frames, feats.frames - feats.frames.mean(axis=0), atol=1e-12)


def test_constant_features_normalize_to_zero():
    out = dsp.sliding_mean_normalize(dsp.MfccMatrix(np.full((700, 30), 2.5)))
    np.testing.assert_allclose(out.frames, 0, atol=1e-12)


def test_ramp_uses_centered_window():
    ramp = np.repeat(np.arange(600, dtype=float)[:, None], 30, axis=1)
    out = dsp.sliding_mean_normalize(dsp.MfccMatrix(ramp)).frames
    expected = ramp[300] - ramp[150:451].mean(axis=0)
    np.testing.assert_allclose(out[300], expected, atol=1e-9)
    # near the start the window is shifted inside the utterance, not padded
    np.testing.assert_allclose(out[10], ramp[10] - ramp[0:301].mean(axis=0), atol=1e-9)


def test_normalization_idempotent_on_short_inputs():
    rng = np.random.default_rng(2)
    once = dsp.sliding_mean_normalize(dsp.MfccMatrix(rng.normal(size=(120, 30))))
    twice = dsp.sliding_mean_normalize(once)
    assert np.max(np.abs(twice.frames - once.frames)) <= 1e-12


def test_normalization_matches_direct_windowed_mean():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(450, 3))
    out = dsp.sliding_mean_normalize(dsp.MfccMatrix(x), window_s=1.0).frames
    half = 50
    for t in (0, 49, 50, 200, 399, 400, 449):
        start = min(max(t - half, 0), 450 - 101)
        np.testing.assert_allclose(out[t], x[t] - x[start:start + 101].mean(axis=0), atol=1e-12)


def test_extract_mfcc_shape():
    audio = dsp.AudioBuffer(np.random.default_rng(0).uniform(-0.5, 0.5, 16000))
    feats = dsp.extract_mfcc(audio)
    assert feats.frames.shape == ((16000 - 400) // 160 + 1, 30)
    assert feats.normalized and feats.hop_ms == 10.0
