"""Encoder-decoder LSTM with a per-timestep dense head.

The encoder stack reads the T input days; the top encoder layer's final
hidden state is fed as the input of every decoder step (repeat-vector
style, decoder state starting at zero). The decoder's top hidden sequence
goes through the dense head (ReLU hidden layers, linear output) with shared
weights at every step, giving one RUL estimate per day.

Network outputs pass through a fixed affine map ``shift + scale * raw``
(set from the training targets by :func:`diskrul.seqnet.train.train`, and
identity for a fresh model) so the head can work at unit scale.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import DomainError
from .lstm import LSTMCellParams, layer_backward, layer_forward

DEFAULT_DENSE = (64, 32, 16, 8, 1)

# (units per layer, encoder layers, decoder layers)
REFERENCE_CONFIGS = (
    (50, 1, 1),
    (100, 1, 1),
    (200, 1, 1),
    (100, 1, 3),
    (100, 3, 1),
    (100, 2, 2),
)

_DTYPES = {"single": np.float32, "double": np.float64}


@dataclass(frozen=True)
class EncoderDecoderConfig:
    units_per_layer: int
    encoder_layers: int
    decoder_layers: int
    input_features: int
    timesteps: int
    dense_widths: tuple[int, ...] = DEFAULT_DENSE

    def __post_init__(self):
        object.__setattr__(self, "dense_widths", tuple(int(w) for w in self.dense_widths))
        for name in ("units_per_layer", "encoder_layers", "decoder_layers", "input_features", "timesteps"):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} must be a positive integer")
        if not self.dense_widths or any(w < 1 for w in self.dense_widths) or self.dense_widths[-1] != 1:
            raise DomainError(f"dense widths must be positive and end in 1, got {self.dense_widths}")

    @classmethod
    def from_row(cls, row, input_features, timesteps, dense_widths=DEFAULT_DENSE):
        units, enc, dec = row
        return cls(units, enc, dec, input_features, timesteps, dense_widths)

    def to_dict(self):
        d = asdict(self)
        d["dense_widths"] = list(self.dense_widths)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**{**d, "dense_widths": tuple(d.get("dense_widths", DEFAULT_DENSE))})

    def layer_inputs(self):
        """Input width of every LSTM layer: encoder layers then decoder layers."""
        H = self.units_per_layer
        enc = [self.input_features] + [H] * (self.encoder_layers - 1)
        dec = [H] * self.decoder_layers
        return enc, dec

    def parameter_count(self) -> int:
        H = self.units_per_layer
        enc, dec = self.layer_inputs()
        lstm = sum(4 * (H * H + H * i + H) for i in enc + dec)
        dense, fan_in = 0, H
        for w in self.dense_widths:
            dense += fan_in * w + w
            fan_in = w
        return lstm + dense


class EncoderDecoderModel:
    """Parameters live in ``self.params`` (ordered name -> array).

    Layer views (``encoder``, ``decoder``, ``dense``) reference the same
    arrays, so in-place optimizer updates are visible everywhere.
    """

    def __init__(self, config: EncoderDecoderConfig, params: dict, output_shift=0.0,
                 output_scale=1.0, target_transform="identity"):
        self.config = config
        self.params = params
        self.output_shift = float(output_shift)
        self.output_scale = float(output_scale)
        if target_transform not in ("identity", "log1p"):
            raise DomainError(f"unknown target transform {target_transform!r}")
        self.target_transform = target_transform
        self.version = 0
        self.optimizer_state = None
        self.epoch = 0
        expected = self._shapes()
        if list(params) != [n for n, _ in expected]:
            raise DomainError("parameter names do not match the configuration")
        for name, shape in expected:
            if params[name].shape != shape:
                raise DomainError(f"{name} has shape {params[name].shape}, expected {shape}")
            if not np.isfinite(params[name]).all():
                raise DomainError(f"{name} contains non-finite values")

    def _shapes(self):
        cfg = self.config
        H = cfg.units_per_layer
        enc, dec = cfg.layer_inputs()
        shapes = []
        for prefix, ins in (("enc", enc), ("dec", dec)):
            for k, n_in in enumerate(ins):
                shapes += [
                    (f"{prefix}{k}.W", (4 * H, H)),
                    (f"{prefix}{k}.U", (4 * H, n_in)),
                    (f"{prefix}{k}.b", (4 * H,)),
                ]
        fan_in = H
        for k, w in enumerate(cfg.dense_widths):
            shapes += [(f"dense{k}.W", (w, fan_in)), (f"dense{k}.b", (w,))]
            fan_in = w
        return shapes

    # construction -----------------------------------------------------------
    @classmethod
    def init(cls, config, seed=0, precision="double"):
        dtype = _dtype(precision)
        rng = np.random.default_rng(seed)
        params = {}
        H = config.units_per_layer
        enc, dec = config.layer_inputs()
        for prefix, ins in (("enc", enc), ("dec", dec)):
            for k, n_in in enumerate(ins):
                p = LSTMCellParams.init(n_in, H, rng, dtype)
                params[f"{prefix}{k}.W"], params[f"{prefix}{k}.U"], params[f"{prefix}{k}.b"] = p.W, p.U, p.b
        fan_in = H
        for k, w in enumerate(config.dense_widths):
            bound = 1.0 / np.sqrt(fan_in)
            params[f"dense{k}.W"] = rng.uniform(-bound, bound, size=(w, fan_in)).astype(dtype)
            params[f"dense{k}.b"] = np.zeros(w, dtype)
            fan_in = w
        return cls(config, params)

    @classmethod
    def zeros(cls, config, precision="double"):
        dtype = _dtype(precision)
        model = cls.init(config, 0, precision)
        for k in model.params:
            model.params[k] = np.zeros_like(model.params[k], dtype=dtype)
        return model

    def copy(self, precision=None):
        dtype = self.dtype if precision is None else _dtype(precision)
        params = {k: v.astype(dtype, copy=True) for k, v in self.params.items()}
        return EncoderDecoderModel(
            self.config, params, self.output_shift, self.output_scale, self.target_transform
        )

    # views ------------------------------------------------------------------
    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    @property
    def precision(self):
        return "single" if self.dtype == np.float32 else "double"

    def _lstm(self, prefix, k):
        p = self.params
        return LSTMCellParams(p[f"{prefix}{k}.W"], p[f"{prefix}{k}.U"], p[f"{prefix}{k}.b"])

    @property
    def encoder(self):
        return [self._lstm("enc", k) for k in range(self.config.encoder_layers)]

    @property
    def decoder(self):
        return [self._lstm("dec", k) for k in range(self.config.decoder_layers)]

    @property
    def dense(self):
        return [
            (self.params[f"dense{k}.W"], self.params[f"dense{k}.b"])
            for k in range(len(self.config.dense_widths))
        ]

    def parameter_count(self):
        return sum(v.size for v in self.params.values())

    def touch(self):
        """Mark parameters as changed so older forward caches become stale."""
        self.version += 1


def _dtype(precision):
    try:
        return _DTYPES[precision]
    except KeyError:
        raise DomainError(f"precision must be 'single' or 'double', got {precision!r}") from None


@dataclass
class ForwardCache:
    model_id: int
    version: int
    shape: tuple
    enc: list
    dec: list
    dense_in: list  # activations entering each dense layer, (T*B, width)
    dense_pre: list  # pre-activations of each dense layer
    yhat: np.ndarray


def forward(model: EncoderDecoderModel, X):
    """Predict a RUL sequence for every window in ``X`` (B, T, F).

    Returns ``(Yhat, cache)`` with ``Yhat`` of shape (B, T).
    """
    cfg = model.config
    X = np.asarray(X)
    if X.ndim != 3 or X.shape[1:] != (cfg.timesteps, cfg.input_features):
        raise DomainError(
            f"input shape {X.shape} does not match (B, {cfg.timesteps}, {cfg.input_features})"
        )
    B, T, _ = X.shape
    seq = np.ascontiguousarray(X.transpose(1, 0, 2), dtype=model.dtype)
    enc_caches = []
    for layer in model.encoder:
        seq, c = layer_forward(layer, seq)
        enc_caches.append(c)
    context = np.ascontiguousarray(seq[-1])
    dec_caches = []
    seq = context
    for k, layer in enumerate(model.decoder):
        seq, c = layer_forward(layer, seq, T=T) if k == 0 else layer_forward(layer, seq)
        dec_caches.append(c)
    a = seq.reshape(T * B, -1)
    dense_in, dense_pre = [], []
    layers = model.dense
    for k, (W, b) in enumerate(layers):
        dense_in.append(a)
        z = a @ W.T + b
        dense_pre.append(z)
        a = np.maximum(z, 0) if k < len(layers) - 1 else z
    raw = a.reshape(T, B).T
    yhat = model.output_shift + model.output_scale * raw
    cache = ForwardCache(id(model), model.version, X.shape, enc_caches, dec_caches, dense_in, dense_pre, yhat)
    return yhat, cache


def backward(model: EncoderDecoderModel, cache: ForwardCache, Y):
    """Gradients of ``mean((Yhat - Y)**2)`` for every parameter.

    Returns ``(loss, grads)`` with ``grads`` keyed like ``model.params``.
    """
    if cache.model_id != id(model) or cache.version != model.version:
        raise DomainError("forward cache is stale or belongs to a different model")
    Y = np.asarray(Y, dtype=np.float64)
    B, T, _ = cache.shape
    if Y.shape != (B, T):
        raise DomainError(f"targets have shape {Y.shape}, expected {(B, T)}")
    diff = cache.yhat - Y
    loss = float(np.mean(diff * diff))
    dtype = model.dtype
    draw = (2.0 * model.output_scale / (B * T)) * diff  # (B, T)
    da = np.ascontiguousarray(draw.T, dtype=dtype).reshape(T * B, 1)
    grads = {}
    layers = model.dense
    for k in range(len(layers) - 1, -1, -1):
        W, _ = layers[k]
        dz = da if k == len(layers) - 1 else da * (cache.dense_pre[k] > 0)
        grads[f"dense{k}.W"] = dz.T @ cache.dense_in[k]
        grads[f"dense{k}.b"] = dz.sum(axis=0)
        da = dz @ W
    dhs = np.ascontiguousarray(da.reshape(T, B, -1))
    dec = model.decoder
    for k in range(len(dec) - 1, -1, -1):
        dW, dU, db, dx = layer_backward(dec[k], cache.dec[k], dhs)
        grads[f"dec{k}.W"], grads[f"dec{k}.U"], grads[f"dec{k}.b"] = dW, dU, db
        dhs = dx
    # dx of decoder layer 0 is already summed over the T repeated steps
    d_context = dhs
    H = model.config.units_per_layer
    dhs = np.zeros((T, B, H), dtype)
    dhs[-1] = d_context
    enc = model.encoder
    for k in range(len(enc) - 1, -1, -1):
        dW, dU, db, dx = layer_backward(enc[k], cache.enc[k], dhs, need_dx=k > 0)
        grads[f"enc{k}.W"], grads[f"enc{k}.U"], grads[f"enc{k}.b"] = dW, dU, db
        dhs = dx
    return loss, {name: grads[name] for name in model.params}


def copy_params(params):
    return {k: v.copy() for k, v in params.items()}


__all__ = [
    "DEFAULT_DENSE",
    "REFERENCE_CONFIGS",
    "EncoderDecoderConfig",
    "EncoderDecoderModel",
    "ForwardCache",
    "forward",
    "backward",
    "copy_params",
]
