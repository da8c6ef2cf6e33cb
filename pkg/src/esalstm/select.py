"""Top-K position selection driven by received attention, and the routing
layer that sends only selected positions through the LSTM.

Selection is a discrete decision: gradients never flow through the scores,
and in bypass mode the LSTM parameters see gradient contributions only from
selected positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import LstmCellParams, LstmSequence, PositionalEncoding
from .nn import Linear, Parameter


@dataclass(frozen=True)
class SelectConfig:
    """Selection ratio and routing mode.

    ``ratio`` = 0 selects nothing (the LSTM is skipped entirely) and 1.0
    selects every position. Ties always break toward the lower original
    index. ``bypass`` recombines non-selected rows unchanged; ``gate`` runs
    the LSTM over all rows but closes the input gate for non-selected ones.
    """

    ratio: float = 0.3
    mode: str = "bypass"

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"selection ratio must be in [0, 1], got {self.ratio}")
        if self.mode not in ("bypass", "gate"):
            raise ValueError(f"unknown selection mode {self.mode!r}")


def selection_size(ratio: float, length: int) -> int:
    """K = 0 for ratio 0, else max(1, round(ratio * L)) with half rounded up."""
    if ratio == 0.0:
        return 0
    return min(length, max(1, int(np.floor(ratio * length + 0.5))))


@dataclass
class SelectionResult:
    """Per-position importance scores and the chosen index set."""

    scores: np.ndarray          # (L,)
    selected: np.ndarray        # (K,) ascending original indices
    k: int


def attention_scores(alpha_heads) -> np.ndarray:
    """How much attention each position receives, averaged over heads and
    query rows: score_j = mean_{h,i} alpha_h(i, j)."""
    heads = np.asarray(alpha_heads, dtype=np.float64)
    if heads.ndim == 2:
        heads = heads[None]
    if heads.size == 0:
        raise ValueError("attention_scores: empty head list")
    return heads.mean(axis=tuple(range(heads.ndim - 1)))


def top_k_indices(scores: np.ndarray, ratio: float) -> np.ndarray:
    """Batched Top-K: scores (B, L) -> ascending index array (B, K)."""
    B, L = scores.shape
    k = selection_size(ratio, L)
    if k == 0:
        return np.empty((B, 0), dtype=np.intp)
    # stable sort on -scores keeps the lower original index first on ties
    order = np.argsort(-scores, axis=1, kind="stable")
    return np.sort(order[:, :k], axis=1)


def top_k_select(scores: np.ndarray, cfg: SelectConfig) -> SelectionResult:
    """Select the Top-K positions of a single score vector."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size < 1:
        raise ValueError(f"top_k_select: expected a nonempty score vector, got shape {s.shape}")
    selected = top_k_indices(s[None], cfg.ratio)[0]
    return SelectionResult(scores=s, selected=selected, k=selected.size)


class RouteLayer:
    """Route selected positions through the LSTM and recombine.

    Bypass mode: the selected rows form a compacted subsequence run through
    the LSTM from a zero state; their outputs (projected back to the model
    width when the hidden width differs) replace the original rows, every
    other row passes through unchanged, and the sinusoidal encoding of each
    row's original position is added to the recombined sequence.

    Gate mode: the LSTM runs over all rows with the input gate forced shut
    at non-selected steps; every row then carries its (projected) hidden
    state, plus the positional encoding.
    """

    def __init__(self, lstm: LstmSequence, pe: PositionalEncoding,
                 out_proj: Linear | None, cfg: SelectConfig):
        self.lstm = lstm
        self.pe = pe
        self.out_proj = out_proj
        self.cfg = cfg
        self._cache = None

    def params(self) -> list[Parameter]:
        out = self.lstm.params()
        if self.out_proj is not None:
            out = out + self.out_proj.params()
        return out

    def forward(self, x: np.ndarray, selected: np.ndarray) -> np.ndarray:
        squeeze = x.ndim == 2
        xb = x[None] if squeeze else x
        sel = np.asarray(selected, dtype=np.intp)
        if sel.ndim == 1:
            sel = sel[None]
        B, L, d = xb.shape
        if sel.shape[0] != B:
            raise ValueError(
                f"route: selection batch {sel.shape} does not match input {xb.shape}"
            )
        k = sel.shape[1]
        positions = np.arange(L)

        if k == 0:
            y = self.pe.add(xb, positions)
        elif self.cfg.mode == "bypass":
            x_sel = np.take_along_axis(xb, sel[:, :, None], axis=1)
            h = self.lstm.forward(x_sel)
            r = self.out_proj.forward(h) if self.out_proj is not None else h
            y = xb.copy()
            np.put_along_axis(y, sel[:, :, None], r, axis=1)
            y = self.pe.add(y, positions)
        else:  # gate
            mask = np.zeros((B, L))
            np.put_along_axis(mask, sel, 1.0, axis=1)
            h = self.lstm.forward(xb, gate_mask=mask)
            r = self.out_proj.forward(h) if self.out_proj is not None else h
            y = self.pe.add(r, positions)

        self._cache = (sel, k, squeeze)
        return y[0] if squeeze else y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("route: backward called before forward")
        sel, k, squeeze = self._cache
        dyb = dy[None] if squeeze else dy

        if k == 0:
            dx = dyb
        elif self.cfg.mode == "bypass":
            dr = np.take_along_axis(dyb, sel[:, :, None], axis=1)
            dh = self.out_proj.backward(dr) if self.out_proj is not None else dr
            dx_sel = self.lstm.backward(dh)
            dx = dyb.copy()
            np.put_along_axis(dx, sel[:, :, None], dx_sel, axis=1)
        else:
            dh = self.out_proj.backward(dyb) if self.out_proj is not None else dyb
            dx = self.lstm.backward(dh)

        return dx[0] if squeeze else dx


def route_forward(X: np.ndarray, sel: SelectionResult, lstm: LstmCellParams,
                  cfg: SelectConfig, pe: PositionalEncoding,
                  out_proj: Linear | None = None) -> np.ndarray:
    """Single-sequence routing: returns the recombined (L, d_model) output."""
    layer = RouteLayer(LstmSequence(lstm), pe, out_proj, cfg)
    return layer.forward(X, sel.selected)


def selection_gradient_mask_check(model, windows: np.ndarray) -> bool:
    """True iff, with the loss contribution of every selected position
    zeroed, all LSTM parameters receive exactly zero gradient.

    ``model`` must expose ``route_stage(windows) -> (y, selected)``, the
    ``route`` layer itself, and ``lstm_parameters()``. Only meaningful in
    bypass mode, where non-selected rows must not touch the LSTM.
    """
    if windows.ndim == 2:
        windows = windows[None]
    y, selected = model.route_stage(windows)
    for p in model.lstm_parameters():
        p.zero_grad()
    dy = np.ones_like(y)
    if selected.shape[1] > 0:
        np.put_along_axis(dy, selected[:, :, None], 0.0, axis=1)
    model.route.backward(dy)
    return all(not np.any(p.grad) for p in model.lstm_parameters())
