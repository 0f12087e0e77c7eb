"""Dependency-free line charts rendered straight into 8-bit grayscale arrays."""

import math

import numpy as np

TRAIN_SHADE = 0
VAL_SHADE = 128
AXIS_SHADE = 64
WIDTH, HEIGHT = 400, 300
LEFT, RIGHT, TOP, BOTTOM = 44, 12, 12, 28

# 3x5 bitmap glyphs for tick labels
_GLYPHS = {
    "0": ["111", "101", "101", "101", "111"],
    "1": ["010", "110", "010", "010", "111"],
    "2": ["111", "001", "111", "100", "111"],
    "3": ["111", "001", "111", "001", "111"],
    "4": ["101", "101", "111", "001", "001"],
    "5": ["111", "100", "111", "001", "111"],
    "6": ["111", "100", "111", "101", "111"],
    "7": ["111", "001", "010", "010", "010"],
    "8": ["111", "101", "111", "101", "111"],
    "9": ["111", "101", "111", "001", "111"],
    ".": ["000", "000", "000", "000", "010"],
    "-": ["000", "000", "111", "000", "000"],
}


def _text(canvas, x, y, s, shade=AXIS_SHADE):
    for ch in s:
        glyph = _GLYPHS.get(ch)
        if glyph is not None:
            for r, bits in enumerate(glyph):
                for c, bit in enumerate(bits):
                    if bit == "1" and 0 <= y + r < canvas.shape[0] and 0 <= x + c < canvas.shape[1]:
                        canvas[y + r, x + c] = shade
        x += 4


def _line(canvas, x0, y0, x1, y1, shade):
    # Bresenham
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        canvas[y0, x0] = shade
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _fmt(v):
    return f"{v:.2f}" if abs(v) < 10 else f"{v:.0f}"


def line_chart(series, y_range=None, width=WIDTH, height=HEIGHT):
    """Render ``[(values, shade), ...]`` against x = 1..len(values).

    NaN values are skipped. Returns a ``(height, width)`` uint8 array with a
    white background, axes, tick marks with labels, and a 3x3 marker per point.
    """
    canvas = np.full((height, width), 255, dtype=np.uint8)
    n = max(len(v) for v, _ in series)
    finite = [x for v, _ in series for x in v if math.isfinite(x)]
    if y_range is None:
        hi = max(finite) if finite else 1.0
        y_range = (0.0, hi * 1.05 if hi > 0 else 1.0)
    ylo, yhi = y_range
    x0, x1 = LEFT, width - RIGHT - 1
    y0, y1 = height - BOTTOM - 1, TOP

    def px(i):
        if n == 1:
            return (x0 + x1) // 2
        return int(round(x0 + (x1 - x0) * i / (n - 1)))

    def py(v):
        frac = (min(max(v, ylo), yhi) - ylo) / (yhi - ylo)
        return int(round(y0 + (y1 - y0) * frac))

    canvas[y1 : y0 + 1, x0 - 1] = AXIS_SHADE
    canvas[y0 + 1, x0 - 1 : x1 + 1] = AXIS_SHADE
    for t in range(5):
        v = ylo + (yhi - ylo) * t / 4
        yy = py(v)
        canvas[yy, x0 - 5 : x0 - 1] = AXIS_SHADE
        _text(canvas, 2, yy - 2, _fmt(v))
    step = max(1, math.ceil(n / 10))
    for i in range(0, n, step):
        xx = px(i)
        canvas[y0 + 2 : y0 + 6, xx] = AXIS_SHADE
        _text(canvas, xx - 2, y0 + 8, str(i + 1))

    for values, shade in series:
        prev = None
        for i, v in enumerate(values):
            if not math.isfinite(v):
                prev = None
                continue
            pt = (px(i), py(v))
            if prev is not None:
                _line(canvas, prev[0], prev[1], pt[0], pt[1], shade)
            canvas[pt[1] - 1 : pt[1] + 2, pt[0] - 1 : pt[0] + 2] = shade
            prev = pt
    return canvas


def history_charts(history):
    """``(accuracy_chart, loss_chart)`` for a :class:`TrainHistory`; validation is drawn first."""
    acc = line_chart(
        [(history.column("val_acc"), VAL_SHADE), (history.column("train_acc"), TRAIN_SHADE)],
        y_range=(0.0, 1.0),
    )
    loss = line_chart([(history.column("val_loss"), VAL_SHADE), (history.column("train_loss"), TRAIN_SHADE)])
    return acc, loss
