"""Grayscale image operations.

Images are 2-D ``uint8`` numpy arrays of shape ``(height, width)``, row-major.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .seeding import make_rng


def check_gray(img):
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a 2-D grayscale image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if np.any((arr < 0) | (arr > 255)):
            raise ValueError("grayscale intensities must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def to_grayscale(rgb):
    """Luma ``0.299 R + 0.587 G + 0.114 B`` of an ``(H, W, 3)`` image or ``(R, G, B)`` tuple."""
    if isinstance(rgb, (tuple, list)):
        if len(rgb) != 3:
            raise ValueError("need exactly three channels")
        r, g, b = (np.asarray(c, dtype=np.float64) for c in rgb)
        if not (r.shape == g.shape == b.shape):
            raise ValueError("channel shapes differ")
    else:
        arr = np.asarray(rgb, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) input, got {arr.shape}")
        r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    luma = 0.299 * r + 0.587 * g + 0.114 * b
    return np.clip(_round_half_up(luma), 0, 255).astype(np.uint8)


def enhance_contrast(img):
    """Global histogram equalization: level v maps to floor(cdf(v) * 255)."""
    img = check_gray(img)
    if img.min() == img.max():
        return img.copy()
    hist = np.bincount(img.ravel(), minlength=256)
    cdf = np.cumsum(hist) / img.size
    lut = np.floor(cdf * 255.0 + 1e-9).astype(np.uint8)
    return lut[img]


def _sample_bilinear(src, ys, xs, fill=None):
    """Bilinear samples of float image ``src`` at pixel-center coordinates.

    With ``fill=None`` coordinates are clamped to the border; otherwise points
    farther than half a pixel outside the image get ``fill``.
    """
    h, w = src.shape
    outside = None
    if fill is not None:
        outside = (ys < -0.5) | (ys > h - 0.5) | (xs < -0.5) | (xs > w - 0.5)
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = ys - y0
    fx = xs - x0
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bottom = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    out = top * (1 - fy) + bottom * fy
    if outside is not None:
        out = np.where(outside, fill, out)
    return out


def resize_bilinear(img, new_width, new_height):
    """Half-pixel-center bilinear resize with round-half-up to 8 bits."""
    img = check_gray(img)
    if new_width < 1 or new_height < 1:
        raise ValueError("target size must be >= 1")
    h, w = img.shape
    if (h, w) == (new_height, new_width):
        return img.copy()
    ys = (np.arange(new_height) + 0.5) * (h / new_height) - 0.5
    xs = (np.arange(new_width) + 0.5) * (w / new_width) - 0.5
    out = _sample_bilinear(img.astype(np.float64), ys[:, None], xs[None, :])
    return np.clip(_round_half_up(out), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class Peak:
    row: int
    column: int
    intensity: int


def detect_peaks(img, min_intensity=128, neighborhood=3):
    """Strict local maxima of a ``neighborhood``-square window at or above ``min_intensity``.

    Windows are clipped at the borders. Ties inside a window (plateaus) are not peaks.
    Sorted by descending intensity, then row-major.
    """
    img = check_gray(img)
    if neighborhood < 3 or neighborhood % 2 == 0:
        raise ValueError("neighborhood must be odd and >= 3")
    r = neighborhood // 2
    h, w = img.shape
    padded = np.pad(img.astype(np.int16), r, constant_values=-1)
    is_peak = img >= min_intensity
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dy == 0 and dx == 0:
                continue
            shifted = padded[r + dy : r + dy + h, r + dx : r + dx + w]
            is_peak &= img > shifted
    rows, cols = np.nonzero(is_peak)
    vals = img[rows, cols]
    order = np.lexsort((cols, rows, -vals.astype(np.int32)))
    return [Peak(int(rows[i]), int(cols[i]), int(vals[i])) for i in order]


@dataclass(frozen=True)
class HogParams:
    cell_size: int = 8
    block_size: int = 2
    block_stride: int = 1
    bin_count: int = 9
    signed: bool = False

    def __post_init__(self):
        if self.cell_size < 2 or self.block_size < 1 or self.bin_count < 2:
            raise ValueError("invalid HOG parameters")
        if not 1 <= self.block_stride <= self.block_size:
            raise ValueError("block_stride must lie in [1, block_size]")


HOG_EPS = 1e-6
HOG_CLIP = 0.2


def _l2(v):
    return v / math.sqrt(float(v @ v) + HOG_EPS**2)


def hog(img, params=HogParams()):
    """Histogram-of-oriented-gradients descriptor with L2-Hys block normalization.

    Bin ``b`` is centered on ``b * span / bin_count`` (span 180 or 360 degrees);
    votes are split linearly between the two nearest centers, with wraparound.
    """
    img = check_gray(img).astype(np.float64)
    h, w = img.shape
    cs = params.cell_size
    if h % cs or w % cs:
        raise ValueError(f"image {w}x{h} is not divisible by cell_size {cs}")
    padded = np.pad(img, 1, mode="edge")
    gx = padded[1:-1, 2:] - padded[1:-1, :-2]
    gy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    mag = np.hypot(gx, gy)
    span = 360.0 if params.signed else 180.0
    ang = np.mod(np.degrees(np.arctan2(gy, gx)), span)

    nb = params.bin_count
    pos = ang / (span / nb)
    lo = np.floor(pos).astype(np.int64)
    frac = pos - lo
    lo %= nb
    hi = (lo + 1) % nb

    cy, cx = h // cs, w // cs
    cell_id = (np.arange(h)[:, None] // cs) * cx + (np.arange(w)[None, :] // cs)
    hist = np.zeros(cy * cx * nb)
    np.add.at(hist, (cell_id * nb + lo).ravel(), (mag * (1 - frac)).ravel())
    np.add.at(hist, (cell_id * nb + hi).ravel(), (mag * frac).ravel())
    hist = hist.reshape(cy, cx, nb)

    bs, st = params.block_size, params.block_stride
    if cy < bs or cx < bs:
        raise ValueError("image too small for one HOG block")
    blocks = []
    for by in range(0, cy - bs + 1, st):
        for bx in range(0, cx - bs + 1, st):
            v = hist[by : by + bs, bx : bx + bs].ravel()
            v = np.minimum(_l2(v), HOG_CLIP)
            blocks.append(_l2(v))
    return np.concatenate(blocks)


def hog_length(width, height, params=HogParams()):
    cx, cy = width // params.cell_size, height // params.cell_size
    bx = (cx - params.block_size) // params.block_stride + 1
    by = (cy - params.block_size) // params.block_stride + 1
    return bx * by * params.block_size**2 * params.bin_count


# -- geometric augmentation ---------------------------------------------------


def flip_horizontal(img):
    return check_gray(img)[:, ::-1].copy()


def affine_warp(img, matrix, offset=(0.0, 0.0), fill=0):
    """Warp about the image center: output point p samples source ``M^-1 (p - c - t) + c``.

    ``matrix`` acts on (row, col) vectors; ``offset`` is (dy, dx). Uncovered
    pixels are set to ``fill``.
    """
    img = check_gray(img)
    h, w = img.shape
    inv = np.linalg.inv(np.asarray(matrix, dtype=np.float64))
    c = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    rr, cc = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    py = rr - c[0] - offset[0]
    px = cc - c[1] - offset[1]
    sy = inv[0, 0] * py + inv[0, 1] * px + c[0]
    sx = inv[1, 0] * py + inv[1, 1] * px + c[1]
    out = _sample_bilinear(img.astype(np.float64), sy, sx, fill=float(fill))
    return np.clip(_round_half_up(out), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class RotateSmall:
    max_degrees: float = 10.0

    def apply(self, img, rng):
        theta = math.radians(rng.uniform(-self.max_degrees, self.max_degrees))
        c, s = math.cos(theta), math.sin(theta)
        return affine_warp(img, [[c, -s], [s, c]])


@dataclass(frozen=True)
class FlipHorizontal:
    def apply(self, img, rng):
        return flip_horizontal(img)


@dataclass(frozen=True)
class TranslatePixels:
    max_dx: int = 8
    max_dy: int = 8

    def apply(self, img, rng):
        dx = int(rng.integers(-self.max_dx, self.max_dx + 1))
        dy = int(rng.integers(-self.max_dy, self.max_dy + 1))
        return affine_warp(img, np.eye(2), offset=(dy, dx))


@dataclass(frozen=True)
class ScaleFactor:
    low: float = 0.9
    high: float = 1.1

    def apply(self, img, rng):
        s = rng.uniform(self.low, self.high)
        return affine_warp(img, [[s, 0.0], [0.0, s]])


DEFAULT_POOL = (RotateSmall(), FlipHorizontal(), TranslatePixels(), ScaleFactor())


@dataclass(frozen=True)
class AugmentationSpec:
    per_original: int = 10
    transform_pool: tuple = DEFAULT_POOL
    output_resolutions: tuple = (64, 96, 128, 256)
    seed: int = 0

    def __post_init__(self):
        if self.per_original < 1:
            raise ValueError("per_original must be >= 1")
        if not self.output_resolutions or any(r < 8 for r in self.output_resolutions):
            raise ValueError("output_resolutions must be nonempty with each size >= 8")
        if not self.transform_pool:
            raise ValueError("transform_pool is empty")


def augment(img, spec=AugmentationSpec(), image_index=0):
    """``spec.per_original`` transformed copies of ``img`` (the original is not included).

    Variant ``i`` draws one transform from the pool with a generator seeded by
    ``(spec.seed, image_index, i)`` and is resized to the ``i``-th resolution
    in the cycle.
    """
    img = check_gray(img)
    out = []
    for i in range(spec.per_original):
        rng = make_rng(spec.seed, "augment", image_index, i)
        transform = spec.transform_pool[int(rng.integers(len(spec.transform_pool)))]
        variant = transform.apply(img, rng)
        size = spec.output_resolutions[i % len(spec.output_resolutions)]
        out.append(resize_bilinear(variant, size, size))
    return out


# -- PGM (P5) ------------------------------------------------------------------


def write_pgm(path, img):
    img = check_gray(img)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(blob[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    pos += 1  # single whitespace byte after maxval
    data = np.frombuffer(blob, dtype=np.uint8, count=w * h, offset=pos)
    return data.reshape(h, w).copy()
