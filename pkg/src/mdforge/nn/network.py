"""Sequential CNN: model spec, parameters, forward and backward passes."""

from dataclasses import dataclass, field

import numpy as np

from ..seeding import make_rng
from . import layers as L


@dataclass(frozen=True)
class ModelSpec:
    input_size: int
    layers: tuple
    in_channels: int = 1

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        self.shapes()

    def shapes(self):
        """Per-layer output shapes (without batch axis); raises on a bad chain."""
        shape = (self.in_channels, self.input_size, self.input_size)
        out = []
        for i, layer in enumerate(self.layers):
            if isinstance(layer, (L.Conv, L.MaxPool)):
                if len(shape) != 3:
                    raise ValueError(f"layer {i} ({layer.describe()}) needs a 3-D input, got {shape}")
                if isinstance(layer, L.Conv):
                    k, s, p, ch = layer.kernel, layer.stride, layer.padding, layer.filters
                else:
                    k, s, p, ch = layer.window, layer.stride, 0, shape[0]
                h = L.conv_output_size(shape[1], k, s, p)
                w = L.conv_output_size(shape[2], k, s, p)
                if h < 1 or w < 1:
                    raise ValueError(f"layer {i} ({layer.describe()}) shrinks {shape} to nothing")
                shape = (ch, h, w)
            elif isinstance(layer, L.Flatten):
                shape = (int(np.prod(shape)),)
            elif isinstance(layer, L.Dense):
                if len(shape) != 1:
                    raise ValueError(f"layer {i} (dense) needs flattened input, got {shape}")
                shape = (layer.units,)
            out.append(shape)
        if len(self.layers) < 2 or not isinstance(self.layers[-1], L.Softmax):
            raise ValueError("model must end with Dense(n_classes) + Softmax")
        if not isinstance(self.layers[-2], L.Dense):
            raise ValueError("the layer before Softmax must be Dense")
        if any(isinstance(layer, L.Softmax) for layer in self.layers[:-1]):
            raise ValueError("Softmax may only appear last")
        return out

    @property
    def n_classes(self):
        return self.layers[-2].units

    def describe(self):
        lines = [f"input {self.input_size} {self.in_channels}"]
        lines += [layer.describe() for layer in self.layers]
        return "\n".join(lines)

    @classmethod
    def parse(cls, text):
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("input "):
            raise ValueError("architecture descriptor must start with an 'input' line")
        head = lines[0].split()
        return cls(int(head[1]), tuple(L.parse_layer(ln) for ln in lines[1:]), int(head[2]))


def reference_spec(input_size=64, n_classes=3):
    """Conv-BN-ReLU-Pool x2, dropout, dense head."""
    return ModelSpec(
        input_size,
        (
            L.Conv(16, 3, 1, 1), L.BatchNorm(), L.ReLU(), L.MaxPool(2, 2),
            L.Conv(32, 3, 1, 1), L.BatchNorm(), L.ReLU(), L.MaxPool(2, 2),
            L.Dropout(0.25), L.Flatten(),
            L.Dense(64), L.ReLU(), L.Dropout(0.5),
            L.Dense(n_classes), L.Softmax(),
        ),
    )


@dataclass
class ForwardCache:
    entries: list
    probabilities: np.ndarray
    training: bool
    extra: dict = field(default_factory=dict)


class Network:
    """Parameters plus forward/backward for a :class:`ModelSpec`.

    ``params[i]`` is a dict for layer ``i``: ``w``/``b`` for Conv and Dense,
    ``gamma``/``beta``/``running_mean``/``running_var`` for BatchNorm. Only
    ``trainable_keys`` receive gradients.
    """

    trainable_keys = ("w", "b", "gamma", "beta")

    def __init__(self, spec, seed=0, dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.params = self._init_params(make_rng(seed, "init"))

    def _init_params(self, rng):
        params = []
        shape = (self.spec.in_channels, self.spec.input_size, self.spec.input_size)
        for layer, out_shape in zip(self.spec.layers, self.spec.shapes()):
            p = {}
            if isinstance(layer, L.Conv):
                fan_in = shape[0] * layer.kernel**2
                limit = np.sqrt(6.0 / fan_in)
                p["w"] = rng.uniform(-limit, limit, (layer.filters, shape[0], layer.kernel, layer.kernel))
                p["b"] = np.zeros(layer.filters)
            elif isinstance(layer, L.Dense):
                limit = np.sqrt(6.0 / shape[0])
                p["w"] = rng.uniform(-limit, limit, (shape[0], layer.units))
                p["b"] = np.zeros(layer.units)
            elif isinstance(layer, L.BatchNorm):
                ch = shape[0]
                p["gamma"] = np.ones(ch)
                p["beta"] = np.zeros(ch)
                p["running_mean"] = np.zeros(ch)
                p["running_var"] = np.ones(ch)
            params.append({k: v.astype(self.dtype) for k, v in p.items()})
            shape = out_shape
        return params

    def astype(self, dtype):
        clone = Network.__new__(Network)
        clone.spec = self.spec
        clone.dtype = np.dtype(dtype)
        clone.params = [{k: v.astype(dtype) for k, v in p.items()} for p in self.params]
        return clone

    def n_parameters(self):
        return sum(v.size for p in self.params for k, v in p.items() if k in self.trainable_keys)

    def _check_input(self, x):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 3:
            x = x[:, None]
        expected = (self.spec.in_channels, self.spec.input_size, self.spec.input_size)
        if x.ndim != 4 or x.shape[1:] != expected:
            raise ValueError(f"batch shape {x.shape} does not match model input (N, *{expected})")
        return x

    def forward(self, batch, training=False, rng=None, dropout_masks=None):
        """Return ``(probabilities, cache)``.

        In training mode dropout masks come from ``dropout_masks`` (layer index ->
        mask) when given, else from ``rng``; with neither, dropout is identity.
        """
        x = self._check_input(batch)
        entries = []
        logits = None
        for i, (layer, p) in enumerate(zip(self.spec.layers, self.params)):
            cache = None
            if isinstance(layer, L.Conv):
                x, cache = L.conv_forward(x, p["w"], p["b"], layer.stride, layer.padding)
            elif isinstance(layer, L.BatchNorm):
                x, cache = L.batchnorm_forward(
                    x, p["gamma"], p["beta"], p["running_mean"], p["running_var"], layer, training
                )
            elif isinstance(layer, L.ReLU):
                cache = x > 0
                x = x * cache
            elif isinstance(layer, L.MaxPool):
                x, cache = L.maxpool_forward(x, layer.window, layer.stride)
            elif isinstance(layer, L.Dropout):
                if training and layer.rate > 0:
                    if dropout_masks is not None and i in dropout_masks:
                        mask = dropout_masks[i]
                    elif rng is not None:
                        keep = rng.random(x.shape) >= layer.rate
                        mask = keep.astype(self.dtype) / (1.0 - layer.rate)
                    else:
                        mask = None
                    if mask is not None:
                        x = x * mask
                    cache = mask
            elif isinstance(layer, L.Flatten):
                cache = x.shape
                x = x.reshape(x.shape[0], -1)
            elif isinstance(layer, L.Dense):
                cache = x
                x = x @ p["w"] + p["b"]
            elif isinstance(layer, L.Softmax):
                logits = x
                x = L.softmax(x)
            entries.append(cache)
        fc = ForwardCache(entries, x, training)
        fc.extra["logits"] = logits
        return x, fc

    def loss(self, probabilities, labels):
        """Mean cross-entropy."""
        labels = np.asarray(labels)
        picked = probabilities[np.arange(labels.size), labels]
        return float(-np.mean(np.log(np.maximum(picked, np.finfo(probabilities.dtype).tiny))))

    def backward(self, cache, labels):
        """Gradients of the mean cross-entropy, as a list of per-layer dicts."""
        labels = np.asarray(labels)
        probs = cache.probabilities
        n = probs.shape[0]
        if labels.shape != (n,):
            raise ValueError("need one label per sample")
        grads = [dict() for _ in self.spec.layers]
        dx = probs.copy()
        dx[np.arange(n), labels] -= 1.0
        dx /= n
        for i in range(len(self.spec.layers) - 2, -1, -1):
            layer, p, c = self.spec.layers[i], self.params[i], cache.entries[i]
            if isinstance(layer, L.Dense):
                grads[i]["w"] = c.T @ dx
                grads[i]["b"] = dx.sum(axis=0)
                dx = dx @ p["w"].T
            elif isinstance(layer, L.Flatten):
                dx = dx.reshape(c)
            elif isinstance(layer, L.Dropout):
                if c is not None:
                    dx = dx * c
            elif isinstance(layer, L.MaxPool):
                dx = L.maxpool_backward(dx, c, layer.window, layer.stride)
            elif isinstance(layer, L.ReLU):
                dx = dx * c
            elif isinstance(layer, L.BatchNorm):
                if not cache.training:
                    raise ValueError("backward needs a training-mode forward cache")
                dx, grads[i]["gamma"], grads[i]["beta"] = L.batchnorm_backward(dx, p["gamma"], c)
            elif isinstance(layer, L.Conv):
                dx, grads[i]["w"], grads[i]["b"] = L.conv_backward(dx, p["w"], c, layer.stride, layer.padding)
        return grads

    def predict_proba(self, batch, batch_size=64):
        x = self._check_input(batch)
        out = [self.forward(x[i : i + batch_size])[0] for i in range(0, x.shape[0], batch_size)]
        return np.concatenate(out, axis=0)


def gradient_check(spec_or_net, x, labels, step=1e-4, seed=0):
    """Max relative error between backprop and central finite differences.

    Runs in float64 with training-mode BatchNorm and dropout forced to identity.
    Relative error per parameter is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    if isinstance(spec_or_net, ModelSpec):
        net = Network(spec_or_net, seed=seed, dtype=np.float64)
    else:
        net = spec_or_net.astype(np.float64)
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    # BN running stats must not drift between the perturbed passes
    frozen = [{k: v.copy() for k, v in p.items()} for p in net.params]

    def loss_at():
        probs, _ = net.forward(x, training=True)
        for p, f in zip(net.params, frozen):
            for key in ("running_mean", "running_var"):
                if key in p:
                    p[key][...] = f[key]
        return net.loss(probs, labels)

    _, cache = net.forward(x, training=True)
    grads = net.backward(cache, labels)
    worst = 0.0
    for p, g in zip(net.params, grads):
        for key, analytic in g.items():
            param = p[key]
            flat = param.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                up = loss_at()
                flat[j] = orig - step
                down = loss_at()
                flat[j] = orig
                numeric = (up - down) / (2 * step)
                a = analytic.reshape(-1)[j]
                err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
                worst = max(worst, err)
    return worst

