"""Synthetic micro-Doppler spectrograms of vibrating metal sheets and a small CNN to classify them."""

from .dsp import Spectrogram, StftConfig, Window, fft, render_spectrogram, stft, to_db
from .estimators import ContrastEqualizer, HOGFeatures, ImageResizer, SpectrogramCNNClassifier, SpectrogramImager
from .imaging import (
    AugmentationSpec,
    HogParams,
    Peak,
    augment,
    detect_peaks,
    enhance_contrast,
    hog,
    read_pgm,
    resize_bilinear,
    to_grayscale,
    write_pgm,
)
from .metrics import ClassMetrics, ConfusionMatrix, confusion, f1, precision, recall, report
from .synth import (
    CLASS_NAMES,
    IQSignal,
    Material,
    MaterialProfile,
    RadarParams,
    RotationSpec,
    doppler_shift,
    material_profile,
    read_iq,
    rotational_micro_doppler,
    sideband_amplitudes,
    synthesize_return,
    vibration_displacement,
    write_iq,
)

__version__ = "0.1.0"
