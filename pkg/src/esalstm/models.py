"""The four compared architectures behind one forward/backward/predict
interface: selective-attention LSTM, vanilla LSTM, stacked (cascaded) LSTM,
and flattened-window FCNN baselines.

Every model maps one (window_len, n_input_channels) window to a single
scalar, the target channel's value at the window's final depth sample.
Construction is deterministic in the seed; layers shared between
architectures draw their initial values from per-role seed streams, so a
selective model at ratio 1.0 and a vanilla LSTM built from the same seed
start bit-identical on their common layers.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

from .layers import (
    AttentionParams,
    LstmCellParams,
    LstmSequence,
    PositionalEncoding,
    SelfAttention,
)
from .nn import Linear, Parameter, Tanh, require_finite
from .select import RouteLayer, SelectConfig, top_k_indices

ARCHS = ("esa_lstm", "lstm", "cascaded_lstm", "fcnn")

CHECKPOINT_MAGIC = "esalstm-checkpoint v1"

# Fixed per-role seed streams. Roles shared between architectures must keep
# the same stream id or the degenerate-equivalence guarantees break.
_STREAM = {
    "input_fc": 1,
    "out_fc": 2,
    "lstm": 3,          # +layer index
    "attention": 16,
    "pre_proj": 17,
    "post_proj": 18,
    "fcnn": 32,         # +layer index
}


def _rng(seed: int, role: str, offset: int = 0) -> np.random.Generator:
    return np.random.default_rng((seed, _STREAM[role] + offset))


@dataclass
class ModelConfig:
    arch: str = "esa_lstm"
    hidden_dim: int = 30
    n_heads: int = 8
    select: SelectConfig = field(default_factory=SelectConfig)
    lstm_layers: int = 2
    fcnn_depth: int = 4
    window_len: int = 64
    n_input_channels: int = 3
    seed: int = 0

    @property
    def d_model(self) -> int:
        """Attention width: smallest multiple of n_heads >= hidden_dim."""
        return self.n_heads * int(np.ceil(self.hidden_dim / self.n_heads))

    def validate(self) -> None:
        if self.arch not in ARCHS:
            raise ValueError(f"unknown arch {self.arch!r}, expected one of {ARCHS}")
        if self.hidden_dim < 1:
            raise ValueError(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if self.n_heads < 1:
            raise ValueError(f"n_heads must be >= 1, got {self.n_heads}")
        if self.window_len < 1:
            raise ValueError(f"window_len must be >= 1, got {self.window_len}")
        if self.n_input_channels < 1:
            raise ValueError(f"n_input_channels must be >= 1, got {self.n_input_channels}")
        if self.arch == "cascaded_lstm" and self.lstm_layers < 1:
            raise ValueError(f"lstm_layers must be >= 1, got {self.lstm_layers}")
        if self.arch == "fcnn" and self.fcnn_depth < 1:
            raise ValueError(f"fcnn_depth must be >= 1, got {self.fcnn_depth}")


class Model:
    """Common forward/backward/predict surface over one window."""

    def __init__(self, config: ModelConfig):
        config.validate()
        self.config = config

    # subclasses populate these
    def parameters(self) -> list[Parameter]:
        raise NotImplementedError

    def forward_batch(self, windows: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward_batch(self, dpred: np.ndarray) -> None:
        raise NotImplementedError

    def _check_input(self, windows: np.ndarray) -> np.ndarray:
        w = np.asarray(windows, dtype=np.float64)
        expected = (self.config.window_len, self.config.n_input_channels)
        if w.ndim == 2:
            w = w[None]
        if w.ndim != 3 or w.shape[1:] != expected:
            raise ValueError(
                f"window shape {windows.shape} does not match configured {expected}"
            )
        require_finite(w, "model input")
        return w

    def forward(self, window: np.ndarray) -> float:
        return float(self.forward_batch(np.asarray(window)[None])[0])

    def backward(self, dloss: float) -> None:
        self.backward_batch(np.array([dloss], dtype=np.float64))

    def predict(self, window: np.ndarray) -> float:
        return self.forward(window)

    def predict_batch(self, windows: np.ndarray) -> np.ndarray:
        return self.forward_batch(windows)

    def zero_grads(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def param_count(self) -> int:
        return sum(p.value.size for p in self.parameters())

    @property
    def lstm_step_count(self) -> int:
        return 0

    def get_values(self) -> list[np.ndarray]:
        return [p.value.copy() for p in self.parameters()]

    def set_values(self, values) -> None:
        for p, v in zip(self.parameters(), values):
            if p.value.shape != v.shape:
                raise ValueError(f"{p.name}: cannot load shape {v.shape} into {p.value.shape}")
            p.value[...] = v


class LstmModel(Model):
    """Input FC -> LSTM -> positional encoding -> output FC on the final row.

    The positional term on the final row is a fixed additive constant; it is
    kept so that the selective model at ratio 1.0 computes the exact same
    function graph.
    """

    def __init__(self, config: ModelConfig, n_layers: int = 1):
        super().__init__(config)
        c, h, L = config.n_input_channels, config.hidden_dim, config.window_len
        self.input_fc = Linear(c, h, _rng(config.seed, "input_fc"), "input_fc")
        self.lstms = [
            LstmSequence(LstmCellParams(h, h, _rng(config.seed, "lstm", i), f"lstm{i}"))
            for i in range(n_layers)
        ]
        self.pe = PositionalEncoding(L, h)
        self.out_fc = Linear(h, 1, _rng(config.seed, "out_fc"), "out_fc")

    def parameters(self) -> list[Parameter]:
        out = self.input_fc.params()
        for seq in self.lstms:
            out += seq.params()
        return out + self.out_fc.params()

    @property
    def lstm_step_count(self) -> int:
        return sum(seq.step_count for seq in self.lstms)

    def forward_batch(self, windows: np.ndarray) -> np.ndarray:
        w = self._check_input(windows)
        a = self.input_fc.forward(w)
        for seq in self.lstms:
            a = seq.forward(a)
        y = self.pe.add(a, np.arange(self.config.window_len))
        return self.out_fc.forward(y[:, -1, :])[:, 0]

    def backward_batch(self, dpred: np.ndarray) -> None:
        dlast = self.out_fc.backward(np.asarray(dpred, dtype=np.float64)[:, None])
        da = np.zeros((dlast.shape[0], self.config.window_len, self.config.hidden_dim))
        da[:, -1, :] = dlast
        for seq in reversed(self.lstms):
            da = seq.backward(da)
        self.input_fc.backward(da)


class EsaLstmModel(Model):
    """Input FC -> attention scoring -> Top-K routing through the LSTM ->
    output FC on the final row.

    Attention here is a position scorer: its weights shape the discrete
    selection, so they receive no gradient. When the attention width differs
    from the FC width, explicit projections bridge the two.
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        c, h, L = config.n_input_channels, config.hidden_dim, config.window_len
        d = config.d_model
        seed = config.seed
        self.input_fc = Linear(c, h, _rng(seed, "input_fc"), "input_fc")
        self.pre_proj = (Linear(h, d, _rng(seed, "pre_proj"), "pre_proj")
                         if d != h else None)
        self.attn = SelfAttention(AttentionParams(d, config.n_heads, _rng(seed, "attention")))
        lstm = LstmSequence(LstmCellParams(d, h, _rng(seed, "lstm"), "lstm0"))
        post_proj = (Linear(h, d, _rng(seed, "post_proj"), "post_proj")
                     if h != d else None)
        self.pe = PositionalEncoding(L, d)
        self.route = RouteLayer(lstm, self.pe, post_proj, config.select)
        self.out_fc = Linear(d, 1, _rng(seed, "out_fc"), "out_fc")
        self.last_selection: np.ndarray | None = None
        self.last_scores: np.ndarray | None = None

    def parameters(self) -> list[Parameter]:
        out = self.input_fc.params()
        if self.pre_proj is not None:
            out += self.pre_proj.params()
        out += self.attn.params()
        out += self.route.params()
        return out + self.out_fc.params()

    def lstm_parameters(self) -> list[Parameter]:
        return self.route.lstm.params()

    @property
    def lstm_step_count(self) -> int:
        return self.route.lstm.step_count

    def route_stage(self, windows: np.ndarray):
        """Forward through selection and routing; returns (routed, selected)."""
        w = self._check_input(windows)
        a = self.input_fc.forward(w)
        x = self.pre_proj.forward(a) if self.pre_proj is not None else a
        alphas = self.attn.forward_scores(x)            # (B, H, L, L)
        scores = alphas.mean(axis=(1, 2))               # received attention
        selected = top_k_indices(scores, self.config.select.ratio)
        y = self.route.forward(x, selected)
        self.last_selection = selected
        self.last_scores = scores
        return y, selected

    def forward_batch(self, windows: np.ndarray) -> np.ndarray:
        y, _ = self.route_stage(windows)
        return self.out_fc.forward(y[:, -1, :])[:, 0]

    def backward_batch(self, dpred: np.ndarray) -> None:
        dlast = self.out_fc.backward(np.asarray(dpred, dtype=np.float64)[:, None])
        dy = np.zeros((dlast.shape[0], self.config.window_len, self.config.d_model))
        dy[:, -1, :] = dlast
        dx = self.route.backward(dy)
        # the selection itself is discrete: no gradient reaches the scorer
        da = self.pre_proj.backward(dx) if self.pre_proj is not None else dx
        self.input_fc.backward(da)


class FcnnModel(Model):
    """Row-major flattened window through fcnn_depth tanh hidden layers."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        c, h, L = config.n_input_channels, config.hidden_dim, config.window_len
        self.hidden: list[tuple[Linear, Tanh]] = []
        d_in = L * c
        for i in range(config.fcnn_depth):
            lin = Linear(d_in, h, _rng(config.seed, "fcnn", i), f"fcnn{i}")
            self.hidden.append((lin, Tanh()))
            d_in = h
        self.out_fc = Linear(h, 1, _rng(config.seed, "out_fc"), "out_fc")

    def parameters(self) -> list[Parameter]:
        out: list[Parameter] = []
        for lin, _ in self.hidden:
            out += lin.params()
        return out + self.out_fc.params()

    def forward_batch(self, windows: np.ndarray) -> np.ndarray:
        w = self._check_input(windows)
        a = w.reshape(w.shape[0], -1)
        for lin, act in self.hidden:
            a = act.forward(lin.forward(a))
        return self.out_fc.forward(a)[:, 0]

    def backward_batch(self, dpred: np.ndarray) -> None:
        da = self.out_fc.backward(np.asarray(dpred, dtype=np.float64)[:, None])
        for lin, act in reversed(self.hidden):
            da = lin.backward(act.backward(da))


def build_model(cfg: ModelConfig) -> Model:
    """Deterministic construction from the config's seed."""
    cfg.validate()
    if cfg.arch == "lstm":
        return LstmModel(cfg, n_layers=1)
    if cfg.arch == "cascaded_lstm":
        return LstmModel(cfg, n_layers=cfg.lstm_layers)
    if cfg.arch == "esa_lstm":
        return EsaLstmModel(cfg)
    return FcnnModel(cfg)


def model_forward(m: Model, window: np.ndarray) -> float:
    return m.forward(window)


def model_backward(m: Model, dloss: float) -> None:
    m.backward(dloss)


# ---------------------------------------------------------------------------
# checkpoint text format
# ---------------------------------------------------------------------------

def config_to_fields(cfg: ModelConfig) -> dict[str, str]:
    return {
        "arch": cfg.arch,
        "hidden_dim": str(cfg.hidden_dim),
        "n_heads": str(cfg.n_heads),
        "select_ratio": repr(cfg.select.ratio),
        "select_mode": cfg.select.mode,
        "lstm_layers": str(cfg.lstm_layers),
        "fcnn_depth": str(cfg.fcnn_depth),
        "window_len": str(cfg.window_len),
        "n_input_channels": str(cfg.n_input_channels),
        "seed": str(cfg.seed),
    }


def config_from_fields(fields: dict[str, str]) -> ModelConfig:
    return ModelConfig(
        arch=fields["arch"],
        hidden_dim=int(fields["hidden_dim"]),
        n_heads=int(fields["n_heads"]),
        select=SelectConfig(ratio=float(fields["select_ratio"]),
                            mode=fields["select_mode"]),
        lstm_layers=int(fields["lstm_layers"]),
        fcnn_depth=int(fields["fcnn_depth"]),
        window_len=int(fields["window_len"]),
        n_input_channels=int(fields["n_input_channels"]),
        seed=int(fields["seed"]),
    )


def save_checkpoint(model: Model, path, extras: dict[str, str] | None = None) -> None:
    """Write parameters as a text document; values round-trip exactly."""
    buf = io.StringIO()
    buf.write(CHECKPOINT_MAGIC + "\n")
    for k, v in config_to_fields(model.config).items():
        buf.write(f"{k}={v}\n")
    for k, v in (extras or {}).items():
        buf.write(f"extra {k}={v}\n")
    for p in model.parameters():
        rows, cols = p.value.shape
        buf.write(f"param {p.name} {rows} {cols}\n")
        buf.write(" ".join(repr(float(v)) for v in p.value.ravel()) + "\n")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(buf.getvalue())


def load_checkpoint(path) -> tuple[Model, dict[str, str]]:
    """Rebuild the model from a checkpoint; returns (model, extras)."""
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a recognized checkpoint file")
    fields: dict[str, str] = {}
    extras: dict[str, str] = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("param "):
        line = lines[i]
        if line.startswith("extra "):
            k, v = line[len("extra "):].split("=", 1)
            extras[k] = v
        elif "=" in line:
            k, v = line.split("=", 1)
            fields[k] = v
        i += 1
    model = build_model(config_from_fields(fields))
    loaded: dict[str, np.ndarray] = {}
    while i < len(lines):
        head = lines[i].split()
        if head[0] != "param" or len(head) != 4:
            raise ValueError(f"{path}: malformed parameter header {lines[i]!r}")
        name, rows, cols = head[1], int(head[2]), int(head[3])
        values = np.fromiter(map(float, lines[i + 1].split()), dtype=np.float64)
        if values.size != rows * cols:
            raise ValueError(f"{path}: parameter {name} has {values.size} values, "
                             f"expected {rows * cols}")
        loaded[name] = values.reshape(rows, cols)
        i += 2
    for p in model.parameters():
        if p.name not in loaded:
            raise ValueError(f"{path}: missing parameter {p.name}")
        if loaded[p.name].shape != p.value.shape:
            raise ValueError(f"{path}: parameter {p.name} has shape "
                             f"{loaded[p.name].shape}, expected {p.value.shape}")
        p.value[...] = loaded[p.name]
    return model, extras


def with_seed(cfg: ModelConfig, seed: int) -> ModelConfig:
    return replace(cfg, seed=seed)
