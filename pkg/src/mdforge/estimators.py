"""scikit-learn compatible wrappers, so the pieces drop into ``Pipeline`` and ``GridSearchCV``.

    >>> from sklearn.pipeline import make_pipeline
    >>> clf = make_pipeline(SpectrogramImager(), ContrastEqualizer(), SpectrogramCNNClassifier(epochs=10))
    >>> clf.fit(signals, labels)                       # doctest: +SKIP
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted

from .dsp import StftConfig, Window, crop_band, render_spectrogram, stft, to_db
from .imaging import HogParams, check_gray, enhance_contrast, hog, resize_bilinear
from .nn import Network, TrainConfig, images_to_batch, reference_spec, train
from .synth import IQSignal


def _image_list(X):
    """Accept an (n, H, W) array or a sequence of 2-D images (sizes may differ)."""
    if isinstance(X, np.ndarray) and X.ndim == 3:
        X = check_array(X, allow_nd=True, dtype=None, ensure_all_finite=True)
        return [check_gray(img) for img in X]
    images = [check_gray(img) for img in X]
    if not images:
        raise ValueError("no images given")
    return images


def _stack(images):
    shapes = {img.shape for img in images}
    if len(shapes) == 1:
        return np.stack(images)
    return images


class SpectrogramImager(TransformerMixin, BaseEstimator):
    """IQ signals -> 8-bit spectrogram images (stateless).

    ``X`` is a sequence of :class:`~mdforge.synth.IQSignal`, or a 2-D complex
    array of equal-length recordings sampled at ``sample_rate``.
    """

    def __init__(self, window_length=512, hop=128, fft_length=512, window_kind="hann",
                 floor_db=-80.0, display_max_hz=1024.0, image_size=256, sample_rate=8192.0):
        self.window_length = window_length
        self.hop = hop
        self.fft_length = fft_length
        self.window_kind = window_kind
        self.floor_db = floor_db
        self.display_max_hz = display_max_hz
        self.image_size = image_size
        self.sample_rate = sample_rate

    def fit(self, X, y=None):
        self.stft_config_ = StftConfig(self.window_length, self.hop, self.fft_length, Window(self.window_kind))
        return self

    def transform(self, X):
        check_is_fitted(self, "stft_config_")
        if isinstance(X, np.ndarray):
            X = np.atleast_2d(X)
            signals = [IQSignal(row, self.sample_rate) for row in X]
        else:
            signals = list(X)
        out = np.empty((len(signals), self.image_size, self.image_size), dtype=np.uint8)
        for i, sig in enumerate(signals):
            spec = stft(sig, self.stft_config_)
            db = to_db(spec, self.floor_db)
            if self.display_max_hz > 0:
                half = min(int(round(self.display_max_hz / spec.bin_spacing)), spec.zero_bin_index)
                db = crop_band(db, spec.zero_bin_index, half)
            out[i] = render_spectrogram(db, self.image_size, self.image_size, self.floor_db)
        return out


class ContrastEqualizer(TransformerMixin, BaseEstimator):
    """Per-image global histogram equalization (stateless)."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return _stack([enhance_contrast(img) for img in _image_list(X)])


class ImageResizer(TransformerMixin, BaseEstimator):
    """Bilinear resize of every image to ``size`` x ``size``."""

    def __init__(self, size=64):
        self.size = size

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return np.stack([resize_bilinear(img, self.size, self.size) for img in _image_list(X)])


class HOGFeatures(TransformerMixin, BaseEstimator):
    """Images -> HOG descriptor rows; images are first resized to ``size`` when given."""

    def __init__(self, cell_size=8, block_size=2, block_stride=1, bin_count=9, signed=False, size=64):
        self.cell_size = cell_size
        self.block_size = block_size
        self.block_stride = block_stride
        self.bin_count = bin_count
        self.signed = signed
        self.size = size

    def fit(self, X, y=None):
        self.params_ = HogParams(self.cell_size, self.block_size, self.block_stride, self.bin_count, self.signed)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        rows = []
        for img in _image_list(X):
            if self.size is not None and img.shape != (self.size, self.size):
                img = resize_bilinear(img, self.size, self.size)
            rows.append(hog(img, self.params_))
        return np.vstack(rows)


class SpectrogramCNNClassifier(ClassifierMixin, BaseEstimator):
    """The reference convolutional network as a scikit-learn classifier.

    Images of any size are resized to ``canonical_input`` and scaled to [0, 1].
    ``fit`` accepts optional ``validation_data=(X_val, y_val)`` which is scored
    after every epoch and recorded in ``history_``.
    """

    def __init__(self, epochs=30, batch_size=16, learning_rate=1e-3, optimizer="adam",
                 beta1=0.9, beta2=0.999, epsilon=1e-8, seed=0, canonical_input=64):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.seed = seed
        self.canonical_input = canonical_input

    def _train_config(self):
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, learning_rate=self.learning_rate,
            optimizer=self.optimizer, beta1=self.beta1, beta2=self.beta2, epsilon=self.epsilon,
            seed=self.seed, canonical_input=self.canonical_input,
        )

    def fit(self, X, y, validation_data=None):
        images = _image_list(X)
        y = np.asarray(y)
        if y.shape[0] != len(images):
            raise ValueError(f"{len(images)} images but {y.shape[0]} labels")
        check_classification_targets(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        cfg = self._train_config()
        x = images_to_batch(images, cfg.canonical_input)
        val = None
        if validation_data is not None:
            xv, yv = validation_data
            index = {c: i for i, c in enumerate(self.classes_)}
            val = (images_to_batch(_image_list(xv), cfg.canonical_input), np.array([index[v] for v in yv]))
        spec = reference_spec(cfg.canonical_input, len(self.classes_))
        self.network_, self.history_ = train(spec, (x, encoded), cfg, val)
        return self

    @classmethod
    def from_network(cls, network, classes=None, **params):
        """Wrap an already trained :class:`~mdforge.nn.Network` (e.g. from a checkpoint)."""
        est = cls(canonical_input=network.spec.input_size, **params)
        est.network_ = network
        est.classes_ = np.asarray(classes if classes is not None else np.arange(network.spec.n_classes))
        return est

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        net: Network = self.network_
        return net.predict_proba(images_to_batch(_image_list(X), net.spec.input_size, net.dtype))

    def predict(self, X):
        check_is_fitted(self, "network_")
        # argmax picks the lowest index on ties
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
