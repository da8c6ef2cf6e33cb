"""Dense numeric kernel: parameters, linear maps, activations, loss, Adam,
and a finite-difference gradient checker.

Everything runs in float64. "Matrix" throughout this package means a 2-D
C-ordered float64 ndarray; layers additionally accept a leading batch axis
wherever that is a natural generalization.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def as_matrix(a) -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite entries."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    require_finite(m, "matrix")
    return m


def require_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains NaN or Inf")


class Parameter:
    """A trainable value with a same-shaped gradient accumulator."""

    def __init__(self, value: np.ndarray, name: str):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.value.shape})"


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear:
    """Affine map y = x W + b with explicit backward.

    Accepts inputs of shape (..., d_in); the bias broadcasts over all
    leading axes. The forward input is cached for backward.
    """

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, name: str = "linear"):
        self.W = Parameter(uniform_init(rng, (d_in, d_out), d_in), f"{name}.W")
        self.b = Parameter(np.zeros((1, d_out)), f"{name}.b")
        self._x = None

    def params(self) -> list[Parameter]:
        return [self.W, self.b]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.W.value.shape[0]:
            raise ValueError(
                f"{self.W.name}: input shape {x.shape} does not conform to "
                f"weight shape {self.W.value.shape}"
            )
        self._x = x
        return x @ self.W.value + self.b.value

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError(f"{self.W.name}: backward called before forward")
        x = self._x
        self.W.grad += x.reshape(-1, x.shape[-1]).T @ dy.reshape(-1, dy.shape[-1])
        self.b.grad += dy.reshape(-1, dy.shape[-1]).sum(axis=0)
        return dy @ self.W.value.T


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically safe elementwise logistic function."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def dsigmoid_from_y(y: np.ndarray) -> np.ndarray:
    return y * (1.0 - y)


def dtanh_from_y(y: np.ndarray) -> np.ndarray:
    return 1.0 - y * y


class Sigmoid:
    """Elementwise logistic activation layer."""

    def __init__(self):
        self._y = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._y = sigmoid(x)
        return self._y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._y is None:
            raise RuntimeError("sigmoid: backward called before forward")
        return dy * dsigmoid_from_y(self._y)


class Tanh:
    """Elementwise hyperbolic tangent activation layer."""

    def __init__(self):
        self._y = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._y = np.tanh(x)
        return self._y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._y is None:
            raise RuntimeError("tanh: backward called before forward")
        return dy * dtanh_from_y(self._y)


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax along the last axis, stabilized by max subtraction."""
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient with respect to pred."""
    if pred.shape != target.shape:
        raise ValueError(f"mse: pred shape {pred.shape} != target shape {target.shape}")
    n = pred.size
    if n == 0:
        raise ValueError("mse: empty batch")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, (2.0 / n) * diff


class Adam:
    """Adam with bias correction. Gradients are zeroed after each step."""

    def __init__(self, params: Sequence[Parameter], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / (1.0 - b1 ** self.t)
            v_hat = self.v[i] / (1.0 - b2 ** self.t)
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.grad[...] = 0.0


def grad_check(loss_fn: Callable[[], float], params: Sequence[Parameter],
               eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn`` must be deterministic, must zero and repopulate ``param.grad``
    for every listed parameter, and must return the scalar loss. It is called
    once to harvest analytic gradients and then twice per coordinate for the
    numeric estimate.
    """
    loss0 = loss_fn()
    if not np.isfinite(loss0):
        raise ValueError(f"grad_check: loss_fn returned non-finite value {loss0}")
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    for p, g in zip(params, analytic):
        flat = p.value.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss_fn()
            flat[i] = orig - eps
            lm = loss_fn()
            flat[i] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise ValueError("grad_check: perturbed loss is non-finite")
            numeric = (lp - lm) / (2.0 * eps)
            a = g.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
            worst = max(worst, err)
    # restore the unperturbed gradient state
    loss_fn()
    return worst
