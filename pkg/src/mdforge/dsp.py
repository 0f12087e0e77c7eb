"""FFT, STFT and spectrogram rendering."""

import enum
from dataclasses import dataclass

import numpy as np

from .imaging import resize_bilinear


class Window(enum.Enum):
    RECTANGULAR = "rectangular"
    HANN = "hann"
    HAMMING = "hamming"


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


def fft(x):
    """Unnormalized DFT along the last axis via iterative radix-2 decimation in time.

    Leading axes are batched, so a stack of STFT frames is transformed in one call.
    """
    a = np.asarray(x, dtype=np.complex128)
    n = a.shape[-1]
    if not _is_pow2(n):
        raise ValueError(f"fft length must be a power of two, got {n}")
    if n == 1:
        return a.copy()
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    out = a[..., rev]
    lead = out.shape[:-1]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = out.reshape(*lead, n // size, size)
        even = blocks[..., :half]
        odd = blocks[..., half:] * twiddle
        blocks = np.concatenate([even + odd, even - odd], axis=-1)
        out = blocks.reshape(*lead, n)
        size *= 2
    return out


def naive_dft(x):
    """O(N^2) reference DFT."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    k = np.arange(n)
    return x @ np.exp(-2j * np.pi * np.outer(k, k) / n).T


@dataclass(frozen=True)
class StftConfig:
    window_length: int = 512
    hop: int = 128
    fft_length: int = 512
    window_kind: Window = Window.HANN

    def __post_init__(self):
        object.__setattr__(self, "window_kind", Window(self.window_kind))
        if not 0 < self.hop <= self.window_length <= self.fft_length:
            raise ValueError("need 0 < hop <= window_length <= fft_length")
        if not _is_pow2(self.fft_length):
            raise ValueError(f"fft_length must be a power of two, got {self.fft_length}")

    def window(self):
        n = np.arange(self.window_length)
        if self.window_kind is Window.RECTANGULAR:
            return np.ones(self.window_length)
        # periodic (DFT-even) forms
        c = np.cos(2.0 * np.pi * n / self.window_length)
        if self.window_kind is Window.HANN:
            return 0.5 - 0.5 * c
        return 0.54 - 0.46 * c


@dataclass
class Spectrogram:
    """Centered STFT magnitudes, shape ``(fft_length, n_frames)``.

    Row ``zero_bin_index`` holds 0 Hz; row 0 is the most negative frequency.
    """

    values: np.ndarray
    bin_spacing: float
    frame_spacing: float
    zero_bin_index: int

    @property
    def frequencies(self):
        rows = np.arange(self.values.shape[0])
        return (rows - self.zero_bin_index) * self.bin_spacing

    def row_for(self, frequency):
        return self.zero_bin_index + int(np.floor(frequency / self.bin_spacing + 0.5))


def stft(signal, cfg=StftConfig()):
    x = signal.samples
    if x.size < cfg.window_length:
        raise ValueError(f"signal has {x.size} samples, shorter than window {cfg.window_length}")
    n_frames = (x.size - cfg.window_length) // cfg.hop + 1
    starts = np.arange(n_frames) * cfg.hop
    frames = x[starts[:, None] + np.arange(cfg.window_length)] * cfg.window()
    if cfg.fft_length > cfg.window_length:
        frames = np.pad(frames, ((0, 0), (0, cfg.fft_length - cfg.window_length)))
    spectra = np.abs(fft(frames))
    # rotate so 0 Hz lands on row fft_length/2
    centered = np.roll(spectra, cfg.fft_length // 2, axis=1).T
    return Spectrogram(
        values=np.ascontiguousarray(centered),
        bin_spacing=signal.sample_rate / cfg.fft_length,
        frame_spacing=cfg.hop / signal.sample_rate,
        zero_bin_index=cfg.fft_length // 2,
    )


def to_db(spec, floor_db=-80.0):
    """Amplitude dB relative to the maximum, clamped below at ``floor_db``."""
    if not floor_db < 0:
        raise ValueError("floor_db must be negative")
    values = spec.values if isinstance(spec, Spectrogram) else np.asarray(spec, dtype=np.float64)
    vmax = values.max() if values.size else 0.0
    if vmax <= 0:
        return np.full(values.shape, float(floor_db))
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(values / vmax)
    db = np.maximum(db, floor_db)
    db[values == vmax] = 0.0
    return db


def crop_band(db_matrix, zero_bin_index, half_rows):
    """Rows ``[zero - half_rows, zero + half_rows)``; 0 Hz stays on the middle row."""
    lo = zero_bin_index - half_rows
    hi = zero_bin_index + half_rows
    if half_rows < 1 or lo < 0 or hi > db_matrix.shape[0]:
        raise ValueError(f"band of +-{half_rows} rows does not fit the spectrogram")
    return db_matrix[lo:hi]


def quantize_db(db_matrix, floor_db=-80.0):
    scaled = (np.asarray(db_matrix, dtype=np.float64) - floor_db) * (255.0 / -floor_db)
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def render_spectrogram(db_matrix, width=256, height=256, floor_db=-80.0):
    """8-bit image of a dB matrix: floor -> 0, 0 dB -> 255, then bilinear resize.

    Frequency runs down the rows, time across the columns.
    """
    img = quantize_db(db_matrix, floor_db)
    if img.shape != (height, width):
        img = resize_bilinear(img, width, height)
    return img
