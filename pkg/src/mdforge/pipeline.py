"""End-to-end pipeline stages behind the CLI subcommands.

All stages read and write under one output directory::

    <out>/synth/{class}_{i}.iq, .pgm, manifest.csv
    <out>/dataset/*.pgm, manifest.csv
    <out>/model.mdnn, history.csv
    <out>/metrics.csv, confusion.csv, predictions.csv
    <out>/accuracy.pgm, loss.pgm
"""

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .dsp import crop_band, render_spectrogram, stft, to_db
from .imaging import augment, enhance_contrast, read_pgm, write_pgm
from .metrics import confusion, report
from .nn import images_to_batch, load_checkpoint, reference_spec, save_checkpoint, train
from .nn.train import TrainHistory
from .plotting import history_charts
from .seeding import derive_seed, make_rng
from .synth import CLASS_NAMES, Material, synthesize_return, write_iq

log = logging.getLogger(__name__)

MANIFEST_FIELDS = ["file_path", "class_label", "origin", "parent_index", "variant_index", "split", "resolution"]
SPLITS = ("train", "val", "test")


class PreconditionError(RuntimeError):
    """A stage's inputs are missing (CLI exit code 4)."""


class FormatError(ValueError):
    """An input file exists but cannot be parsed."""


def worker_count():
    try:
        return max(1, int(os.environ.get("MDFORGE_THREADS", "") or os.cpu_count() or 1))
    except ValueError:
        return 1


def _pmap(fn, items):
    n = worker_count()
    if n == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# -- spectrogram images ---------------------------------------------------------


def spectrogram_image(signal, cfg):
    """STFT -> dB -> optional +-display_max_hz band -> 8-bit image of stft.image_size."""
    spec = stft(signal, cfg.stft)
    db = to_db(spec, cfg["stft.floor_db"])
    max_hz = cfg["stft.display_max_hz"]
    if max_hz > 0:
        half = int(round(max_hz / spec.bin_spacing))
        half = min(half, spec.zero_bin_index)
        db = crop_band(db, spec.zero_bin_index, half)
    size = cfg["stft.image_size"]
    return render_spectrogram(db, size, size, cfg["stft.floor_db"])


def frequency_row(frequency, cfg):
    """Fractional image row on which ``frequency`` (Hz) lands in :func:`spectrogram_image`."""
    stft_cfg = cfg.stft
    bin_spacing = cfg["radar.sample_rate"] / stft_cfg.fft_length
    zero = stft_cfg.fft_length // 2
    max_hz = cfg["stft.display_max_hz"]
    if max_hz > 0:
        half = min(int(round(max_hz / bin_spacing)), zero)
        rows, offset = 2 * half, half
    else:
        rows, offset = stft_cfg.fft_length, zero
    src_row = offset + frequency / bin_spacing
    return (src_row + 0.5) * cfg["stft.image_size"] / rows - 0.5


# -- manifests -------------------------------------------------------------------


@dataclass
class ManifestEntry:
    file_path: str
    class_label: str
    origin: str
    parent_index: int
    variant_index: int
    split: str
    resolution: int

    @property
    def class_index(self):
        return int(Material.parse(self.class_label))


def write_manifest(path, entries):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_FIELDS)
        for e in entries:
            writer.writerow([getattr(e, f) if getattr(e, f) is not None else "" for f in MANIFEST_FIELDS])


def read_manifest(path):
    path = Path(path)
    if not path.exists():
        raise PreconditionError(f"missing manifest {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != MANIFEST_FIELDS:
        raise FormatError(f"{path}: bad manifest header")
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(MANIFEST_FIELDS):
            raise FormatError(f"{path}:{lineno}: expected {len(MANIFEST_FIELDS)} fields")
        try:
            e = ManifestEntry(
                row[0], row[1], row[2],
                int(row[3]) if row[3] else -1,
                int(row[4]) if row[4] else -1,
                row[5], int(row[6]),
            )
            Material.parse(e.class_label)
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
        if e.origin not in ("original", "augmented") or e.split not in ("",) + SPLITS:
            raise FormatError(f"{path}:{lineno}: bad origin or split")
        entries.append(e)
    return entries


# -- stages ----------------------------------------------------------------------


def _stem(material, index):
    return f"{material.name.lower()}_{index:02d}"


def cmd_synth(cfg, out):
    """Write ``synth.per_class`` IQ recordings and spectrogram PGMs per class."""
    out = Path(out)
    synth_dir = out / "synth"
    synth_dir.mkdir(parents=True, exist_ok=True)
    radar = cfg.radar
    jobs = [(m, i) for m in Material for i in range(cfg["synth.per_class"])]

    def one(job):
        m, i = job
        seed = derive_seed(cfg.master_seed, "synth", int(m), i)
        signal = synthesize_return(cfg.material(m), radar, cfg["synth.duration"], seed)
        img = spectrogram_image(signal, cfg)
        stem = _stem(m, i)
        write_iq(synth_dir / f"{stem}.iq", signal)
        write_pgm(synth_dir / f"{stem}.pgm", img)
        return ManifestEntry(f"synth/{stem}.pgm", m.label, "original", i, -1, "", img.shape[0])

    entries = _pmap(one, jobs)
    write_manifest(synth_dir / "manifest.csv", entries)
    log.info("synthesized %d spectrograms into %s", len(entries), synth_dir)
    return entries


def assign_splits(entries, cfg):
    """Seeded split of ``entries`` in place; stratified per class by default."""
    split = cfg.split
    groups = {}
    if split.stratified:
        for idx, e in enumerate(entries):
            groups.setdefault(e.class_index, []).append(idx)
    else:
        groups[-1] = list(range(len(entries)))
    for key in sorted(groups):
        members = groups[key]
        order = make_rng(cfg.master_seed, "split", key).permutation(len(members))
        n_train, n_val, _ = split.counts(len(members))
        for rank, j in enumerate(order):
            idx = members[j]
            entries[idx].split = "train" if rank < n_train else "val" if rank < n_train + n_val else "test"
    return entries


def cmd_dataset(cfg, out):
    """Contrast-enhance originals, augment them, split, and write the dataset manifest."""
    out = Path(out)
    originals = read_manifest(out / "synth" / "manifest.csv")
    for e in originals:
        if not (out / e.file_path).exists():
            raise PreconditionError(f"missing original spectrogram {out / e.file_path}")
    data_dir = out / "dataset"
    data_dir.mkdir(parents=True, exist_ok=True)
    spec = cfg.augmentation

    def one(args):
        g, e = args
        img = read_pgm(out / e.file_path)
        if cfg["dataset.enhance_contrast"]:
            img = enhance_contrast(img)
        stem = Path(e.file_path).stem
        write_pgm(data_dir / f"{stem}.pgm", img)
        rows = [ManifestEntry(f"dataset/{stem}.pgm", e.class_label, "original", e.parent_index, -1, "", img.shape[0])]
        for v, aug in enumerate(augment(img, spec, image_index=g)):
            name = f"{stem}_aug{v:02d}.pgm"
            write_pgm(data_dir / name, aug)
            rows.append(ManifestEntry(f"dataset/{name}", e.class_label, "augmented", e.parent_index, v, "", aug.shape[0]))
        return rows

    entries = [row for rows in _pmap(one, list(enumerate(originals))) for row in rows]
    assign_splits(entries, cfg)
    write_manifest(data_dir / "manifest.csv", entries)
    counts = {s: sum(e.split == s for e in entries) for s in SPLITS}
    log.info("dataset: %d images, split %s", len(entries), counts)
    return entries


def load_split(out, entries, split, size):
    chosen = [e for e in entries if e.split == split]
    images = []
    for e in chosen:
        path = Path(out) / e.file_path
        if not path.exists():
            raise PreconditionError(f"missing image {path}")
        images.append(read_pgm(path))
    return images_to_batch(images, size), np.array([e.class_index for e in chosen], dtype=np.int64)


def cmd_train(cfg, out):
    """Train the reference CNN; writes ``model.mdnn`` and ``history.csv``."""
    out = Path(out)
    entries = read_manifest(out / "dataset" / "manifest.csv")
    tc = cfg.train
    x_train, y_train = load_split(out, entries, "train", tc.canonical_input)
    x_val, y_val = load_split(out, entries, "val", tc.canonical_input)
    if y_train.size == 0:
        raise PreconditionError("training split is empty")
    val = (x_val, y_val) if y_val.size else None

    def progress(r):
        log.info(
            "epoch %3d  loss %.4f  acc %.3f  val_loss %.4f  val_acc %.3f",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc,
        )

    with threadpool_limits(worker_count()):
        net, history = train(reference_spec(tc.canonical_input, len(Material)), (x_train, y_train), tc, val, callback=progress)
    save_checkpoint(out / "model.mdnn", net)
    history.to_csv(out / "history.csv")
    return net, history


def write_evaluation(out, y_true, y_pred):
    """Write ``metrics.csv`` and ``confusion.csv`` for label / prediction arrays."""
    cm = confusion(y_true, y_pred, len(CLASS_NAMES), CLASS_NAMES)
    metrics = report(cm)
    metrics.to_csv(Path(out) / "metrics.csv")
    cm.to_csv(Path(out) / "confusion.csv")
    if metrics.undefined:
        log.warning("zero-denominator precision/recall for: %s", ", ".join(metrics.undefined))
    return metrics, cm


def cmd_eval(cfg, out, checkpoint=None):
    """Evaluate a checkpoint on the test split."""
    out = Path(out)
    checkpoint = Path(checkpoint) if checkpoint else out / "model.mdnn"
    if not checkpoint.exists():
        raise PreconditionError(f"missing checkpoint {checkpoint}")
    tc = cfg.train
    net = load_checkpoint(checkpoint, expected_spec=reference_spec(tc.canonical_input, len(Material)))
    entries = read_manifest(out / "dataset" / "manifest.csv")
    x_test, y_test = load_split(out, entries, "test", tc.canonical_input)
    if y_test.size == 0:
        raise PreconditionError("test split is empty")
    with threadpool_limits(worker_count()):
        probs = net.predict_proba(x_test)
    y_pred = np.argmax(probs, axis=1)
    test_entries = [e for e in entries if e.split == "test"]
    with open(out / "predictions.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["file_path", "true", "predicted"] + [f"p_{n}" for n in CLASS_NAMES])
        for e, t, p, row in zip(test_entries, y_test, y_pred, probs):
            writer.writerow([e.file_path, CLASS_NAMES[t], CLASS_NAMES[p]] + [f"{v:.6f}" for v in row])
    metrics, _ = write_evaluation(out, y_test, y_pred)
    log.info("test accuracy %.4f on %d images", metrics.accuracy, y_test.size)
    return metrics


def cmd_report(history_path, out):
    """Render accuracy and loss charts from a history CSV."""
    history_path = Path(history_path)
    if not history_path.exists():
        raise PreconditionError(f"missing history {history_path}")
    history = TrainHistory.from_csv(history_path)
    if not len(history):
        raise FormatError(f"{history_path}: no epochs recorded")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    acc, loss = history_charts(history)
    write_pgm(out / "accuracy.pgm", acc)
    write_pgm(out / "loss.pgm", loss)
    return acc, loss
