"""Audio ingestion and cepstral front end.

Two framings share this code: 25 ms / 10 ms for the network MFCCs and
25 ms / 2.5 ms ("oversampled") for the mel spectra the VFR analysis reads.
"""

import wave
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct

from .errors import (
    AudioTooShort,
    DimensionMismatch,
    EmptyAudio,
    MalformedHeader,
    UnsupportedEncoding,
)

N_MELS = 30
N_CEPS = 30
LOG_FLOOR = 1e-10
MEL_FMIN_HZ = 20.0
PCM_SCALE = 32768.0


@dataclass
class AudioBuffer:
    samples: np.ndarray
    sample_rate_hz: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise EmptyAudio("audio buffer must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio samples must be finite")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class FrameSpec:
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    window_kind: str = "hamming"

    def __post_init__(self):
        if self.frame_len_ms <= 0 or self.hop_ms <= 0:
            raise ValueError("frame length and hop must be positive")
        if self.hop_ms > self.frame_len_ms:
            raise ValueError("hop must not exceed the frame length")
        if self.window_kind not in ("hamming", "rectangular"):
            raise ValueError(f"unknown window kind {self.window_kind!r}")

    def frame_len(self, sample_rate_hz):
        n = int(round(self.frame_len_ms * sample_rate_hz / 1000.0))
        if n < 1:
            raise ValueError("frame shorter than one sample")
        return n

    def hop(self, sample_rate_hz):
        n = int(round(self.hop_ms * sample_rate_hz / 1000.0))
        if n < 1:
            raise ValueError("hop shorter than one sample")
        return n


MFCC_FRAMES = FrameSpec(25.0, 10.0, "hamming")
VFR_FRAMES = FrameSpec(25.0, 2.5, "hamming")


@dataclass
class MelSpectrogram:
    frames: np.ndarray  # (N, K)
    hop_ms: float

    @property
    def n_mels(self):
        return self.frames.shape[1]

    def __len__(self):
        return self.frames.shape[0]


@dataclass
class MfccMatrix:
    frames: np.ndarray  # (T, D)
    hop_ms: float = 10.0
    normalized: bool = False

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise DimensionMismatch("MFCC matrix must be T x D with T >= 1")

    def __len__(self):
        return self.frames.shape[0]


# --- WAV I/O -----------------------------------------------------------------

def load_wav(path):
    """Read a mono PCM16 RIFF/WAVE file into an :class:`AudioBuffer`."""
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except wave.Error as exc:
        if "unknown format" in str(exc):
            raise UnsupportedEncoding(f"{path}: {exc}") from exc
        raise MalformedHeader(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise MalformedHeader(f"{path}: truncated header") from exc
    if width != 2:
        raise UnsupportedEncoding(f"{path}: {8 * width}-bit samples, need 16-bit PCM")
    if channels != 1:
        raise UnsupportedEncoding(f"{path}: {channels} channels, need mono")
    if rate <= 0:
        raise MalformedHeader(f"{path}: sample rate {rate}")
    pcm = np.frombuffer(raw, dtype="<i2")
    if pcm.size == 0:
        raise EmptyAudio(f"{path}: no samples")
    return AudioBuffer(pcm.astype(np.float64) / PCM_SCALE, rate)


def save_wav(path, audio):
    """Write ``audio`` as mono PCM16. Samples are clipped to the int16 range."""
    pcm = np.clip(np.round(audio.samples * PCM_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(audio.sample_rate_hz))
        w.writeframes(pcm.tobytes())


# --- framing and spectra -----------------------------------------------------

def num_frames(n_samples, frame_len, hop):
    if n_samples < frame_len:
        return 0
    return (n_samples - frame_len) // hop + 1


def window(kind, length):
    if kind == "rectangular":
        return np.ones(length)
    if length == 1:
        return np.ones(1)
    n = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))


def frame_signal(audio, spec):
    """Cut ``audio`` into windowed frames; returns an (n_frames, frame_len) array.

    Frame ``i`` covers samples ``[i*hop, i*hop + frame_len)``. A trailing
    partial frame is dropped.
    """
    flen = spec.frame_len(audio.sample_rate_hz)
    hop = spec.hop(audio.sample_rate_hz)
    n = num_frames(audio.samples.size, flen, hop)
    if n == 0:
        raise AudioTooShort(
            f"{audio.samples.size} samples is shorter than one {flen}-sample frame"
        )
    frames = sliding_window_view(audio.samples, flen)[::hop][:n]
    return frames * window(spec.window_kind, flen)


def next_pow2(n):
    return 1 << max(0, int(n - 1).bit_length())


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_edges(n_mels, sample_rate_hz, fmin=MEL_FMIN_HZ):
    """Return the n_mels + 2 corner frequencies (Hz), equally spaced in mel."""
    mels = np.linspace(hz_to_mel(fmin), hz_to_mel(sample_rate_hz / 2.0), n_mels + 2)
    return mel_to_hz(mels)


def mel_filterbank(n_mels, n_fft, sample_rate_hz, fmin=MEL_FMIN_HZ):
    """Triangular filters sampled at the rFFT bin frequencies, shape (n_mels, n_fft//2+1)."""
    if n_mels < 2:
        raise ValueError("need at least two mel bands")
    edges = mel_band_edges(n_mels, sample_rate_hz, fmin)
    freqs = np.arange(n_fft // 2 + 1) * sample_rate_hz / n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def mel_spectrogram(audio, spec=VFR_FRAMES, n_mels=N_MELS):
    frames = frame_signal(audio, spec)
    n_fft = next_pow2(frames.shape[1])
    power = np.abs(np.fft.rfft(frames, n_fft, axis=1)) ** 2
    fb = mel_filterbank(n_mels, n_fft, audio.sample_rate_hz)
    return MelSpectrogram(power @ fb.T, spec.hop_ms)


def mfcc(mel, n_coeffs=N_CEPS):
    """Orthonormal DCT-II of floored log mel energies, first ``n_coeffs`` kept."""
    if n_coeffs > mel.n_mels:
        raise DimensionMismatch(f"{n_coeffs} coefficients requested from {mel.n_mels} bands")
    logmel = np.log(np.maximum(mel.frames, LOG_FLOOR))
    ceps = dct(logmel, type=2, axis=1, norm="ortho")[:, :n_coeffs]
    return MfccMatrix(ceps, mel.hop_ms, normalized=False)


def sliding_mean_normalize(feats, window_s=3.0):
    """Subtract a per-dimension running mean over a centered window.

    The window spans ``window_s`` seconds (``2*half + 1`` frames). Near the
    edges it is shifted, never padded, so it stays inside the utterance;
    utterances shorter than the window use their global mean.
    """
    if window_s <= 0:
        raise ValueError("window_s must be positive")
    x = feats.frames
    T = x.shape[0]
    half = int(round(window_s * 1000.0 / feats.hop_ms / 2.0))
    width = 2 * half + 1
    if T <= width:
        out = x - x.mean(axis=0)
    else:
        csum = np.vstack([np.zeros((1, x.shape[1])), np.cumsum(x, axis=0)])
        start = np.clip(np.arange(T) - half, 0, T - width)
        means = (csum[start + width] - csum[start]) / width
        out = x - means
    return MfccMatrix(out, feats.hop_ms, normalized=True)


def extract_mfcc(audio, normalize=True, window_s=3.0):
    feats = mfcc(mel_spectrogram(audio, MFCC_FRAMES, N_MELS), N_CEPS)
    return sliding_mean_normalize(feats, window_s) if normalize else feats
