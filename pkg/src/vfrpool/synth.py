"""Synthetic stand-ins for speech corpora.

Speakers are Gaussian sources in the 30-dim cepstral space. Each speaker
talks in two styles: "fast" draws a fresh frame every 10 ms, "slow" holds
every draw for two frames. The conditioning vector of a synthetic utterance
comes from the regular VFR analysis run on mel energies reconstructed from
its cepstra (inverse DCT, exp), each frame held for four 2.5 ms steps.
"""

import numpy as np
from scipy.fft import idct

from . import dsp, vfr
from .errors import InvalidConfig
from .trainer import Dataset, Utterance

STYLES = ("fast", "slow")


def pseudo_mel(feats, hold=vfr.GROUP):
    """Mel energies on the 2.5 ms grid implied by 10 ms cepstral frames."""
    logmel = idct(np.asarray(feats, dtype=np.float64), type=2, axis=1, norm="ortho")
    return dsp.MelSpectrogram(np.repeat(np.exp(logmel), hold, axis=0), vfr.OVERSAMPLED_HOP_MS)


def conditioning_from_features(feats):
    T = feats.shape[0]
    return vfr.align_conditioning(vfr.analyze_mel(pseudo_mel(feats)).conditioning, T)


def speaker_sources(n_speakers, dim, seed):
    rng = np.random.default_rng([seed, 0])
    means = rng.uniform(-1.0, 1.0, size=(n_speakers, dim))
    stds = rng.uniform(0.5, 1.5, size=(n_speakers, dim))
    return means, stds


def style_frames(rng, mean, std, n_frames, style):
    if style == "fast":
        return mean + std * rng.standard_normal((n_frames, mean.size))
    draws = mean + std * rng.standard_normal((-(-n_frames // 2), mean.size))
    return np.repeat(draws, 2, axis=0)[:n_frames]


def synth_dataset(n_speakers, utts_per_speaker, frames_per_utt, seed,
                  speaker_seed=None, prefix="utt", dim=dsp.N_CEPS):
    """Build a :class:`Dataset` of synthetic utterances.

    ``speaker_seed`` (default ``seed``) fixes the speaker sources, so a
    held-out set for the same speakers is drawn by changing only ``seed``.
    Utterances alternate fast / slow style.
    """
    if min(n_speakers, utts_per_speaker, frames_per_utt) < 1:
        raise InvalidConfig("speaker, utterance and frame counts must all be >= 1")
    if frames_per_utt < vfr.BUFFER_FRAMES:
        raise InvalidConfig(f"need at least {vfr.BUFFER_FRAMES} frames per utterance")
    means, stds = speaker_sources(n_speakers, dim, seed if speaker_seed is None else speaker_seed)
    rng = np.random.default_rng([seed, 1])
    utts = []
    for s in range(n_speakers):
        for j in range(utts_per_speaker):
            style = STYLES[j % 2]
            feats = style_frames(rng, means[s], stds[s], frames_per_utt, style)
            cond = conditioning_from_features(feats)
            utts.append(Utterance(feats, cond, s, f"spk{s:03d}_{prefix}{j:03d}", style))
    return Dataset(utts, [f"spk{s:03d}" for s in range(n_speakers)])


# --- synthetic audio -----------------------------------------------------------------

def random_audio(seed, duration_s=2.0, sample_rate_hz=16000):
    """Random concatenation of tones, noise bursts, chirps and near-silence."""
    rng = np.random.default_rng(seed)
    n_total = int(duration_s * sample_rate_hz)
    out = []
    n = 0
    while n < n_total:
        seg = int(rng.uniform(0.05, 0.3) * sample_rate_hz)
        t = np.arange(seg) / sample_rate_hz
        kind = rng.integers(4)
        amp = rng.uniform(0.05, 0.6)
        if kind == 0:
            x = amp * np.sin(2 * np.pi * rng.uniform(100, 3000) * t + rng.uniform(0, 2 * np.pi))
        elif kind == 1:
            x = amp * rng.standard_normal(seg) / 3.0
        elif kind == 2:
            f0, f1 = rng.uniform(100, 4000, size=2)
            x = amp * np.sin(2 * np.pi * (f0 * t + 0.5 * (f1 - f0) * t * t / t[-1]))
        else:
            x = 1e-3 * rng.standard_normal(seg)
        out.append(x)
        n += seg
    samples = np.clip(np.concatenate(out)[:n_total], -1.0, 1.0)
    return dsp.AudioBuffer(samples, sample_rate_hz)


def tone(freq_hz, duration_s, amplitude=0.5, sample_rate_hz=16000):
    t = np.arange(int(duration_s * sample_rate_hz)) / sample_rate_hz
    return dsp.AudioBuffer(amplitude * np.sin(2 * np.pi * freq_hz * t), sample_rate_hz)


def two_level_audio(seed, n_blocks=6, block_s=0.3, sample_rate_hz=16000):
    """Alternating blocks of a steady 400 Hz tone and white noise.

    The tone's period divides the 2.5 ms hop, so its oversampled spectra are
    constant and its entropy sits at the floor; the noise blocks are high
    entropy.
    """
    rng = np.random.default_rng(seed)
    n = int(block_s * sample_rate_hz)
    t = np.arange(n) / sample_rate_hz
    blocks = []
    for b in range(n_blocks):
        if b % 2 == 0:
            blocks.append(0.3 * rng.standard_normal(n).clip(-3, 3) / 3.0)
        else:
            blocks.append(0.5 * np.sin(2 * np.pi * 400.0 * t))
    return dsp.AudioBuffer(np.concatenate(blocks), sample_rate_hz)
