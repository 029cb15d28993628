"""Entropy-driven variable frame rate analysis.

Pipeline: oversampled mel spectra (2.5 ms hop) -> entropy curve (one value
per 15 ms, 30 ms buffers) -> per-utterance thresholds -> binary pick mask on
the 2.5 ms grid -> per-10 ms pick counts (the conditioning vector, 0..4).
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import dsp
from .errors import AudioTooShort, EmptyCurve

OVERSAMPLED_HOP_MS = 2.5
BUFFER_FRAMES = 12  # 30 ms of 2.5 ms frames
CURVE_HOP_FRAMES = 6  # 15 ms
GROUP = 4  # oversampled frames per 10 ms feature frame
TRACE_FLOOR = 1e-10

# Threshold weights 0.7, 0.8, 0.5 held as tenths so each threshold is a
# single correctly rounded division.
W1_TENTHS, W2_TENTHS, W3_TENTHS = 7, 8, 5
W1, W2, W3 = W1_TENTHS / 10, W2_TENTHS / 10, W3_TENTHS / 10
RATES = (2, 3, 4, 5)

LN_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class EntropyCurve:
    values: np.ndarray
    n_mels: int
    buffer_frames: int = BUFFER_FRAMES
    hop_frames: int = CURVE_HOP_FRAMES
    frame_hop_ms: float = OVERSAMPLED_HOP_MS

    def __len__(self):
        return self.values.size

    @property
    def times_ms(self):
        """Start time of each curve point's buffer."""
        return np.arange(self.values.size) * self.hop_frames * self.frame_hop_ms


@dataclass(frozen=True)
class Thresholds:
    t1: float
    t2: float
    t3: float
    m_max: float
    m_med: float
    m_min: float


def gaussian_entropy_from_trace(trace, k):
    """K*ln(sqrt(2*pi)) + ln(Tr Sigma), with the trace floored."""
    return k * LN_SQRT_2PI + np.log(np.maximum(trace, TRACE_FLOOR))


def entropy_curve(mel):
    if not np.isclose(mel.hop_ms, OVERSAMPLED_HOP_MS):
        raise ValueError(f"entropy curve needs {OVERSAMPLED_HOP_MS} ms spectra, got {mel.hop_ms}")
    x = mel.frames
    if x.shape[0] < BUFFER_FRAMES:
        raise AudioTooShort(
            f"{x.shape[0]} oversampled frames; one 30 ms buffer needs {BUFFER_FRAMES}"
        )
    # (n_points, K, BUFFER_FRAMES)
    buffers = sliding_window_view(x, BUFFER_FRAMES, axis=0)[::CURVE_HOP_FRAMES]
    trace = buffers.var(axis=2).sum(axis=1)
    return EntropyCurve(gaussian_entropy_from_trace(trace, x.shape[1]), x.shape[1])


def lower_median(values):
    s = np.sort(np.asarray(values, dtype=np.float64))
    return float(s[(s.size - 1) // 2])


def compute_thresholds(curve):
    h = curve.values if isinstance(curve, EntropyCurve) else np.asarray(curve, dtype=np.float64)
    if h.size == 0:
        raise EmptyCurve("entropy curve is empty")
    m_max, m_med, m_min = float(h.max()), lower_median(h), float(h.min())
    t1 = (W1_TENTHS * m_max + (10 - W1_TENTHS) * m_med) / 10
    t2 = ((10 - W2_TENTHS) * m_max + W2_TENTHS * m_med) / 10
    t3 = ((10 - W3_TENTHS) * m_med + W3_TENTHS * m_min) / 10
    # Clamp away last-ulp rounding so a constant curve gives T1 = T2 = T3 = h
    # and the ordering T1 >= T2 >= T3 always holds.
    t1 = min(max(t1, m_med), m_max)
    t2 = min(max(t2, m_med), t1)
    t3 = min(max(t3, m_min), m_med)
    return Thresholds(t1, t2, t3, m_max, m_med, m_min)


def picking_rate(h, th):
    """Map entropy values to frame-picking rates 2 (busiest) .. 5 (calmest)."""
    h = np.asarray(h, dtype=np.float64)
    return np.select([h >= th.t1, h >= th.t2, h >= th.t3], [2, 3, 4], default=5)


def hold_curve(curve, n_oversampled):
    """Zero-order hold of the curve onto the oversampled grid.

    Point ``i`` covers frames ``[6i, 6i+6)``; the final point is extended to
    the end of the grid.
    """
    h = curve.values if isinstance(curve, EntropyCurve) else np.asarray(curve, dtype=np.float64)
    if h.size == 0:
        raise EmptyCurve("entropy curve is empty")
    hop = curve.hop_frames if isinstance(curve, EntropyCurve) else CURVE_HOP_FRAMES
    idx = np.minimum(np.arange(n_oversampled) // hop, h.size - 1)
    return h[idx]


def scan_picks(rates):
    """Left-to-right picker: frame 0 is picked, then any frame whose distance
    from the previous pick has reached the local rate."""
    mask = np.zeros(len(rates), dtype=np.int8)
    if mask.size == 0:
        return mask
    last = 0
    mask[0] = 1
    for pos in range(1, mask.size):
        if pos - last >= rates[pos]:
            mask[pos] = 1
            last = pos
    return mask


def pick_frames(curve, th, n_oversampled):
    if n_oversampled < 1:
        raise ValueError("n_oversampled must be >= 1")
    rates = picking_rate(hold_curve(curve, n_oversampled), th)
    return scan_picks(rates.tolist())


def conditioning_vector(mask):
    """Sum the mask over consecutive groups of four (last group may be partial)."""
    z = np.asarray(mask, dtype=np.float64)
    if z.size == 0:
        raise ValueError("empty pick mask")
    n_groups = -(-z.size // GROUP)
    padded = np.zeros(n_groups * GROUP)
    padded[: z.size] = z
    return padded.reshape(n_groups, GROUP).sum(axis=1)


def align_conditioning(c, t_frames, offset=0):
    """Return ``t_frames`` values, ``out[j] = c[j + offset]``.

    Indices past the end repeat the final value; extra values are dropped.
    Use ``offset=7`` with ``t_frames = T - 14`` to pick the context-center
    value for each pooled frame of the TDNN.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.size == 0:
        raise ValueError("empty conditioning vector")
    if t_frames < 1:
        raise ValueError("t_frames must be >= 1")
    idx = np.minimum(np.arange(t_frames) + offset, c.size - 1)
    return c[idx]


@dataclass
class VfrAnalysis:
    curve: EntropyCurve
    thresholds: Thresholds
    mask: np.ndarray
    conditioning: np.ndarray


def analyze_mel(mel):
    curve = entropy_curve(mel)
    th = compute_thresholds(curve)
    mask = pick_frames(curve, th, len(mel))
    return VfrAnalysis(curve, th, mask, conditioning_vector(mask))


def analyze(audio):
    """Run the full VFR analysis on an audio buffer."""
    return analyze_mel(dsp.mel_spectrogram(audio, dsp.VFR_FRAMES, dsp.N_MELS))


def conditioning_for_audio(audio, t_frames=None):
    c = analyze(audio).conditioning
    return c if t_frames is None else align_conditioning(c, t_frames)
