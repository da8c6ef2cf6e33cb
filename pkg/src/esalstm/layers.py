"""Sequence primitives: recurrent cells, an unrolled LSTM with
backpropagation through time, scaled dot-product self-attention with
multiple heads, and fixed sinusoidal positional encoding.

Single-sequence inputs are (L, d) matrices. Every layer here also accepts
a leading batch axis (B, L, d); gradients then accumulate over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import (
    Parameter,
    dsigmoid_from_y,
    dtanh_from_y,
    sigmoid,
    softmax_rows,
    uniform_init,
)


# ---------------------------------------------------------------------------
# plain recurrent cell (baseline / oracle for the gated cell)
# ---------------------------------------------------------------------------

class RnnCellParams:
    """Weights of a simple recurrent cell with a linear readout."""

    def __init__(self, d_in: int, d_h: int, d_out: int, rng: np.random.Generator,
                 name: str = "rnn"):
        self.w_xh = Parameter(uniform_init(rng, (d_in, d_h), d_in), f"{name}.w_xh")
        self.w_hh = Parameter(uniform_init(rng, (d_h, d_h), d_h), f"{name}.w_hh")
        self.b_h = Parameter(np.zeros((1, d_h)), f"{name}.b_h")
        self.w_hy = Parameter(uniform_init(rng, (d_h, d_out), d_h), f"{name}.w_hy")
        self.b_y = Parameter(np.zeros((1, d_out)), f"{name}.b_y")

    def params(self) -> list[Parameter]:
        return [self.w_xh, self.w_hh, self.b_h, self.w_hy, self.b_y]


def rnn_step(x_t: np.ndarray, h_prev: np.ndarray, p: RnnCellParams):
    """One recurrent step: h_t = sigmoid(x w_xh + h_prev w_hh + b_h),
    y_t = h_t w_hy + b_y (identity readout for regression)."""
    if x_t.shape[-1] != p.w_xh.value.shape[0]:
        raise ValueError(
            f"rnn_step: input shape {x_t.shape} does not conform to "
            f"w_xh shape {p.w_xh.value.shape}"
        )
    h_t = sigmoid(x_t @ p.w_xh.value + h_prev @ p.w_hh.value + p.b_h.value)
    y_t = h_t @ p.w_hy.value + p.b_y.value
    return h_t, y_t


class RnnCell:
    """Single-step recurrent layer with explicit backward."""

    def __init__(self, p: RnnCellParams):
        self.p = p
        self._cache = None

    def forward(self, x_t: np.ndarray, h_prev: np.ndarray):
        h_t, y_t = rnn_step(x_t, h_prev, self.p)
        self._cache = (x_t, h_prev, h_t)
        return h_t, y_t

    def backward(self, dh_t: np.ndarray, dy_t: np.ndarray):
        if self._cache is None:
            raise RuntimeError("rnn cell: backward called before forward")
        x_t, h_prev, h_t = self._cache
        p = self.p
        p.w_hy.grad += h_t.T @ dy_t
        p.b_y.grad += dy_t.sum(axis=0)
        dh = dh_t + dy_t @ p.w_hy.value.T
        dpre = dh * dsigmoid_from_y(h_t)
        p.w_xh.grad += x_t.T @ dpre
        p.w_hh.grad += h_prev.T @ dpre
        p.b_h.grad += dpre.sum(axis=0)
        return dpre @ p.w_xh.value.T, dpre @ p.w_hh.value.T


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

@dataclass
class LstmState:
    """Recurrent state: hidden vector h and cell vector c."""
    h: np.ndarray
    c: np.ndarray


class LstmCellParams:
    """Gate weights acting on the concatenation [h_prev; x_t].

    The forget-gate bias starts at +1.0 so early training does not erase
    the cell state.
    """

    def __init__(self, d_in: int, d_h: int, rng: np.random.Generator, name: str = "lstm"):
        self.d_in = d_in
        self.d_h = d_h
        fan = d_h + d_in
        self.W_i = Parameter(uniform_init(rng, (fan, d_h), fan), f"{name}.W_i")
        self.W_f = Parameter(uniform_init(rng, (fan, d_h), fan), f"{name}.W_f")
        self.W_c = Parameter(uniform_init(rng, (fan, d_h), fan), f"{name}.W_c")
        self.W_o = Parameter(uniform_init(rng, (fan, d_h), fan), f"{name}.W_o")
        self.b_i = Parameter(np.zeros((1, d_h)), f"{name}.b_i")
        self.b_f = Parameter(np.full((1, d_h), 1.0), f"{name}.b_f")
        self.b_c = Parameter(np.zeros((1, d_h)), f"{name}.b_c")
        self.b_o = Parameter(np.zeros((1, d_h)), f"{name}.b_o")

    def params(self) -> list[Parameter]:
        return [self.W_i, self.W_f, self.W_c, self.W_o,
                self.b_i, self.b_f, self.b_c, self.b_o]


def lstm_step(x_t: np.ndarray, s: LstmState, p: LstmCellParams):
    """One gated step on the concatenation z = [h_prev; x_t].

    Returns the new state and h_t. Pure function, no cache; the unrolled
    sequence below owns backpropagation through time.
    """
    if x_t.shape[-1] != p.d_in:
        raise ValueError(
            f"lstm_step: input shape {x_t.shape} does not conform to d_in={p.d_in}"
        )
    z = np.concatenate([s.h, x_t], axis=-1)
    i = sigmoid(z @ p.W_i.value + p.b_i.value)
    f = sigmoid(z @ p.W_f.value + p.b_f.value)
    g = np.tanh(z @ p.W_c.value + p.b_c.value)
    o = sigmoid(z @ p.W_o.value + p.b_o.value)
    c = f * s.c + i * g
    h = o * np.tanh(c)
    return LstmState(h=h, c=c), h


class LstmSequence:
    """LSTM unrolled over a sequence, with full BPTT.

    forward takes (L, d_in) or (B, L, d_in) and returns all hidden states.
    ``gate_mask`` (same leading shape, one entry per step) forces the input
    gate to zero where the mask is 0; the cell then only forgets at those
    steps. ``step_count`` sums per-sequence step invocations so selective
    routing cost is observable.
    """

    def __init__(self, p: LstmCellParams):
        self.p = p
        self.step_count = 0
        self._cache = None

    def params(self) -> list[Parameter]:
        return self.p.params()

    def forward(self, x: np.ndarray, gate_mask: np.ndarray | None = None,
                s0: LstmState | None = None) -> np.ndarray:
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
            if gate_mask is not None:
                gate_mask = np.asarray(gate_mask)[None]
        B, L, d_in = x.shape
        if L < 1:
            raise ValueError("lstm_sequence: empty sequence")
        if d_in != self.p.d_in:
            raise ValueError(
                f"lstm_sequence: input shape {x.shape} does not conform to "
                f"d_in={self.p.d_in}"
            )
        d_h = self.p.d_h
        p = self.p
        if s0 is None:
            h = np.zeros((B, d_h))
            c = np.zeros((B, d_h))
        else:
            h = np.broadcast_to(s0.h, (B, d_h)).copy()
            c = np.broadcast_to(s0.c, (B, d_h)).copy()
        c0 = c.copy()

        # gates fused into one matmul per step, laid out [i, f, o | c]
        W_all = np.concatenate([p.W_i.value, p.W_f.value, p.W_o.value,
                                p.W_c.value], axis=1)
        b_all = np.concatenate([p.b_i.value, p.b_f.value, p.b_o.value,
                                p.b_c.value], axis=1)

        Z = np.empty((B, L, d_h + d_in))
        I_raw = np.empty((B, L, d_h))
        I = np.empty((B, L, d_h))
        F = np.empty((B, L, d_h))
        G = np.empty((B, L, d_h))
        O = np.empty((B, L, d_h))
        C = np.empty((B, L, d_h))
        TC = np.empty((B, L, d_h))
        H = np.empty((B, L, d_h))

        z = np.empty((B, d_h + d_in))
        for t in range(L):
            z[:, :d_h] = h
            z[:, d_h:] = x[:, t, :]
            pre = z @ W_all + b_all
            sig = sigmoid(pre[:, :3 * d_h])
            i_raw = sig[:, :d_h]
            f = sig[:, d_h:2 * d_h]
            o = sig[:, 2 * d_h:]
            g = np.tanh(pre[:, 3 * d_h:])
            i = i_raw if gate_mask is None else i_raw * gate_mask[:, t, None]
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            Z[:, t] = z
            I_raw[:, t] = i_raw
            I[:, t] = i
            F[:, t] = f
            G[:, t] = g
            O[:, t] = o
            C[:, t] = c
            TC[:, t] = tc
            H[:, t] = h
            self.step_count += B

        self._cache = (x, gate_mask, c0, Z, I_raw, I, F, G, O, C, TC, W_all, squeeze)
        return H[0] if squeeze else H

    def backward(self, dH: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("lstm_sequence: backward called before forward")
        x, gate_mask, c0, Z, I_raw, I, F, G, O, C, TC, W_all, squeeze = self._cache
        if squeeze:
            dH = dH[None]
        B, L, d_h = dH.shape
        p = self.p

        dx = np.zeros_like(x)
        dW_all = np.zeros_like(W_all)
        db_all = np.zeros((1, 4 * d_h))
        dh_next = np.zeros((B, d_h))
        dc_next = np.zeros((B, d_h))
        dpre = np.empty((B, 4 * d_h))
        for t in range(L - 1, -1, -1):
            dh = dH[:, t] + dh_next
            do = dh * TC[:, t]
            dc = dc_next + dh * O[:, t] * dtanh_from_y(TC[:, t])
            di = dc * G[:, t]
            dg = dc * I[:, t]
            c_prev = C[:, t - 1] if t > 0 else c0
            df = dc * c_prev

            dpre_i = di * dsigmoid_from_y(I_raw[:, t])
            if gate_mask is not None:
                dpre_i *= gate_mask[:, t, None]
            dpre[:, :d_h] = dpre_i
            dpre[:, d_h:2 * d_h] = df * dsigmoid_from_y(F[:, t])
            dpre[:, 2 * d_h:3 * d_h] = do * dsigmoid_from_y(O[:, t])
            dpre[:, 3 * d_h:] = dg * dtanh_from_y(G[:, t])

            z = Z[:, t]
            dW_all += z.T @ dpre
            db_all += dpre.sum(axis=0)
            dz = dpre @ W_all.T
            dh_next = dz[:, :d_h]
            dx[:, t] = dz[:, d_h:]
            dc_next = dc * F[:, t]

        p.W_i.grad += dW_all[:, :d_h]
        p.W_f.grad += dW_all[:, d_h:2 * d_h]
        p.W_o.grad += dW_all[:, 2 * d_h:3 * d_h]
        p.W_c.grad += dW_all[:, 3 * d_h:]
        p.b_i.grad += db_all[:, :d_h]
        p.b_f.grad += db_all[:, d_h:2 * d_h]
        p.b_o.grad += db_all[:, 2 * d_h:3 * d_h]
        p.b_c.grad += db_all[:, 3 * d_h:]
        return dx[0] if squeeze else dx


def lstm_sequence(X: np.ndarray, p: LstmCellParams,
                  s0: LstmState | None = None) -> np.ndarray:
    """Run the unrolled LSTM over one (L, d_in) sequence, returning (L, d_h)."""
    return LstmSequence(p).forward(X, s0=s0)


# ---------------------------------------------------------------------------
# multi-head self-attention
# ---------------------------------------------------------------------------

class AttentionParams:
    """Per-head query/key/value projections plus the output projection."""

    def __init__(self, d_model: int, n_heads: int, rng: np.random.Generator,
                 name: str = "attn"):
        if d_model % n_heads != 0:
            raise ValueError(f"d_model={d_model} is not divisible by n_heads={n_heads}")
        self.d_model = d_model
        self.n_heads = n_heads
        self.d_k = d_model // n_heads
        self.w_q = []
        self.w_k = []
        self.w_v = []
        for h in range(n_heads):
            self.w_q.append(Parameter(uniform_init(rng, (d_model, self.d_k), d_model),
                                      f"{name}.h{h}.w_q"))
            self.w_k.append(Parameter(uniform_init(rng, (d_model, self.d_k), d_model),
                                      f"{name}.h{h}.w_k"))
            self.w_v.append(Parameter(uniform_init(rng, (d_model, self.d_k), d_model),
                                      f"{name}.h{h}.w_v"))
        self.W_p = Parameter(
            uniform_init(rng, (n_heads * self.d_k, d_model), n_heads * self.d_k),
            f"{name}.W_p")

    def params(self) -> list[Parameter]:
        out: list[Parameter] = []
        for h in range(self.n_heads):
            out += [self.w_q[h], self.w_k[h], self.w_v[h]]
        out.append(self.W_p)
        return out


class SelfAttention:
    """Scaled dot-product self-attention over a whole sequence.

    Per head: alpha = softmax(Q K^T / sqrt(d_k)), head output = alpha V.
    Heads are concatenated and projected by W_p. ``forward_scores`` computes
    only the attention weights (the Q/K half) for callers that use attention
    purely as a position scorer.
    """

    def __init__(self, p: AttentionParams):
        self.p = p
        self._cache = None

    def params(self) -> list[Parameter]:
        return self.p.params()

    def _project_qk(self, x: np.ndarray):
        Wq = np.stack([w.value for w in self.p.w_q])   # (H, d, d_k)
        Wk = np.stack([w.value for w in self.p.w_k])
        Q = np.einsum("bld,hdk->bhlk", x, Wq)
        K = np.einsum("bld,hdk->bhlk", x, Wk)
        S = np.einsum("bhik,bhjk->bhij", Q, K) / np.sqrt(self.p.d_k)
        A = softmax_rows(S)
        return Q, K, A

    def forward(self, x: np.ndarray):
        """Return (context, alpha): context has x's shape, alpha is
        (B, H, L, L) (or (H, L, L) for a single sequence)."""
        squeeze = x.ndim == 2
        xb = x[None] if squeeze else x
        if xb.shape[-1] != self.p.d_model:
            raise ValueError(
                f"attention: input shape {x.shape} does not conform to "
                f"d_model={self.p.d_model}"
            )
        Q, K, A = self._project_qk(xb)
        Wv = np.stack([w.value for w in self.p.w_v])
        V = np.einsum("bld,hdk->bhlk", xb, Wv)
        ctx_h = np.einsum("bhij,bhjk->bhik", A, V)     # (B, H, L, d_k)
        B, H, L, d_k = ctx_h.shape
        concat = ctx_h.transpose(0, 2, 1, 3).reshape(B, L, H * d_k)
        context = concat @ self.p.W_p.value
        self._cache = (xb, Q, K, V, A, concat, squeeze)
        if squeeze:
            return context[0], A[0]
        return context, A

    def forward_scores(self, x: np.ndarray) -> np.ndarray:
        """Attention weights only; skips the value/output projections."""
        squeeze = x.ndim == 2
        xb = x[None] if squeeze else x
        _, _, A = self._project_qk(xb)
        return A[0] if squeeze else A

    def backward(self, dcontext: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("attention: backward called before forward")
        xb, Q, K, V, A, concat, squeeze = self._cache
        if squeeze:
            dcontext = dcontext[None]
        B, L, d = dcontext.shape
        H, d_k = self.p.n_heads, self.p.d_k

        self.p.W_p.grad += concat.reshape(-1, H * d_k).T @ dcontext.reshape(-1, d)
        dconcat = dcontext @ self.p.W_p.value.T
        dctx_h = dconcat.reshape(B, L, H, d_k).transpose(0, 2, 1, 3)

        dA = np.einsum("bhik,bhjk->bhij", dctx_h, V)
        dV = np.einsum("bhij,bhik->bhjk", A, dctx_h)
        # softmax backward per row
        dS = A * (dA - (dA * A).sum(axis=-1, keepdims=True))
        dS /= np.sqrt(d_k)
        dQ = np.einsum("bhij,bhjk->bhik", dS, K)
        dK = np.einsum("bhij,bhik->bhjk", dS, Q)

        Wq = np.stack([w.value for w in self.p.w_q])
        Wk = np.stack([w.value for w in self.p.w_k])
        Wv = np.stack([w.value for w in self.p.w_v])
        dx = (np.einsum("bhlk,hdk->bld", dQ, Wq)
              + np.einsum("bhlk,hdk->bld", dK, Wk)
              + np.einsum("bhlk,hdk->bld", dV, Wv))

        dWq = np.einsum("bld,bhlk->hdk", xb, dQ)
        dWk = np.einsum("bld,bhlk->hdk", xb, dK)
        dWv = np.einsum("bld,bhlk->hdk", xb, dV)
        for h in range(H):
            self.p.w_q[h].grad += dWq[h]
            self.p.w_k[h].grad += dWk[h]
            self.p.w_v[h].grad += dWv[h]
        return dx[0] if squeeze else dx


def attention_forward(X: np.ndarray, p: AttentionParams):
    """Single-sequence attention: returns (context, [alpha per head])."""
    context, A = SelfAttention(p).forward(X)
    return context, [A[h] for h in range(p.n_heads)]


# ---------------------------------------------------------------------------
# positional encoding
# ---------------------------------------------------------------------------

class PositionalEncoding:
    """Fixed sinusoidal position table; never trained.

    Even dimensions carry sin(pos / 10000^(2i/d)), odd dimensions the
    matching cos, so every position has a distinct row.
    """

    def __init__(self, l_max: int, d_model: int):
        if l_max < 1 or d_model < 1:
            raise ValueError(f"invalid positional table size ({l_max}, {d_model})")
        self.l_max = l_max
        self.d_model = d_model
        pos = np.arange(l_max, dtype=np.float64)[:, None]
        dim = np.arange(0, d_model, 2, dtype=np.float64)
        angles = pos / np.power(10000.0, dim / d_model)
        table = np.zeros((l_max, d_model))
        table[:, 0::2] = np.sin(angles)
        table[:, 1::2] = np.cos(angles[:, : d_model // 2])
        self.table = table

    def add(self, x: np.ndarray, offset_indices) -> np.ndarray:
        """Add the encoding of each row's original position.

        ``offset_indices`` holds one original position per sequence row, so
        compacted subsequences keep the encoding of where they came from.
        """
        idx = np.asarray(offset_indices, dtype=np.intp)
        if idx.size and (idx.min() < 0 or idx.max() >= self.l_max):
            raise IndexError(
                f"position index out of bounds: got {int(idx.max())}, "
                f"table holds {self.l_max} positions"
            )
        if idx.shape[0] != x.shape[-2]:
            raise ValueError(
                f"positional encoding: {idx.shape[0]} indices for {x.shape[-2]} rows"
            )
        return x + self.table[idx]


def positional_encoding_add(X: np.ndarray, offset_indices, pe: PositionalEncoding) -> np.ndarray:
    return pe.add(X, offset_indices)
