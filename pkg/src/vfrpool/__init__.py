"""Entropy-based VFR conditioning of self-attentive speaker-embedding pooling."""

from .dsp import AudioBuffer, FrameSpec, MelSpectrogram, MfccMatrix, extract_mfcc, load_wav, save_wav
from .errors import VfrPoolError
from .network import Model, ModelConfig, extract_embedding, forward, init_model, load_model, save_model
from .pooling import POOLING_MODES, VARIANTS
from .trainer import Dataset, TrainConfig, train
from .vfr import analyze, conditioning_vector, entropy_curve

__version__ = "0.1.0"
