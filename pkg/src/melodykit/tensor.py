"""Reverse-mode autodiff tape plus the optimiser it feeds.

Everything is float64.  A GradientTape records each forward op together
with a closure that routes the output gradient to the inputs; backward
walks the record list once in reverse (execution order is already
topological).  Activations live in (batch, features) matrices so the same
ops serve batched training and single-lane sampling.

numpy supplies the dense array arithmetic; the tape, the loss, and the
optimiser live here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import BadTarget, EmptyInput, ShapeMismatch


class Tensor:
    """A float64 array with a lazily allocated accumulated gradient."""

    __slots__ = ("value", "grad")

    def __init__(self, value) -> None:
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.value.shape})"


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    # Copy on first write: closures may hand back views of upstream grads.
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


class GradientTape:
    """Wengert list of (output, backward closure) records.

    Ops append in execution order; backward() visits records exactly once
    in reverse, skipping outputs no gradient ever reached.  A tape built
    with record=False computes values only, which makes the same forward
    code serve inference.
    """

    def __init__(self, record: bool = True) -> None:
        self._records: list[tuple[Tensor, Callable[[np.ndarray], None]]] = []
        self._record = record

    def _push(self, out: Tensor, back: Callable[[np.ndarray], None]) -> Tensor:
        if self._record:
            self._records.append((out, back))
        return out

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
            raise ShapeMismatch(f"matmul {a.value.shape} @ {b.value.shape}")
        out = Tensor(a.value @ b.value)

        def back(g: np.ndarray) -> None:
            _accumulate(a, g @ b.value.T)
            _accumulate(b, a.value.T @ g)

        return self._push(out, back)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        out = Tensor(a.value + b.value)

        def back(g: np.ndarray) -> None:
            _accumulate(a, g)
            _accumulate(b, g)

        return self._push(out, back)

    def add_bias(self, a: Tensor, b: Tensor) -> Tensor:
        """(B, m) + (m,) with the bias gradient summed over the batch."""
        out = Tensor(a.value + b.value)

        def back(g: np.ndarray) -> None:
            _accumulate(a, g)
            _accumulate(b, g.sum(axis=0))

        return self._push(out, back)

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        out = Tensor(a.value - b.value)

        def back(g: np.ndarray) -> None:
            _accumulate(a, g)
            _accumulate(b, -g)

        return self._push(out, back)

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        out = Tensor(a.value * b.value)

        def back(g: np.ndarray) -> None:
            _accumulate(a, g * b.value)
            _accumulate(b, g * a.value)

        return self._push(out, back)

    def one_minus(self, a: Tensor) -> Tensor:
        out = Tensor(1.0 - a.value)

        def back(g: np.ndarray) -> None:
            _accumulate(a, -g)

        return self._push(out, back)

    def sigmoid(self, a: Tensor) -> Tensor:
        s = np.exp(-np.logaddexp(0.0, -a.value))
        out = Tensor(s)

        def back(g: np.ndarray) -> None:
            _accumulate(a, g * s * (1.0 - s))

        return self._push(out, back)

    def tanh(self, a: Tensor) -> Tensor:
        t = np.tanh(a.value)
        out = Tensor(t)

        def back(g: np.ndarray) -> None:
            _accumulate(a, g * (1.0 - t * t))

        return self._push(out, back)

    def concat(self, a: Tensor, b: Tensor) -> Tensor:
        """Column-wise concatenation of two (B, *) matrices."""
        na = a.value.shape[1]
        out = Tensor(np.concatenate([a.value, b.value], axis=1))

        def back(g: np.ndarray) -> None:
            _accumulate(a, g[:, :na])
            _accumulate(b, g[:, na:])

        return self._push(out, back)

    def lookup(self, table: Tensor, ids: np.ndarray) -> Tensor:
        """Gather rows of `table`; backward scatter-adds into the rows."""
        ids = np.asarray(ids, dtype=np.int64)
        out = Tensor(table.value[ids])

        def back(g: np.ndarray) -> None:
            if table.grad is None:
                table.grad = np.zeros_like(table.value)
            np.add.at(table.grad, ids, g)

        return self._push(out, back)

    def cross_entropy(self, logits: Tensor, targets: np.ndarray) -> Tensor:
        """Summed -log softmax[target] over the batch; returns a scalar Tensor."""
        targets = np.asarray(targets, dtype=np.int64)
        z = logits.value
        zmax = z.max(axis=1, keepdims=True)
        ez = np.exp(z - zmax)
        probs = ez / ez.sum(axis=1, keepdims=True)
        rows = np.arange(z.shape[0])
        loss = -np.log(probs[rows, targets]).sum()
        out = Tensor(loss)

        def back(g: np.ndarray) -> None:
            d = probs.copy()
            d[rows, targets] -= 1.0
            _accumulate(logits, g * d)

        return self._push(out, back)

    def backward(self, loss: Tensor) -> None:
        loss.grad = np.ones_like(loss.value)
        for out, back in reversed(self._records):
            if out.grad is not None:
                back(out.grad)


# Shared non-recording tape; it never mutates, so sharing is safe.
NO_TAPE = GradientTape(record=False)


def affine(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """W @ x + b for a single column vector x."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w.ndim != 2 or x.ndim != 1 or b.ndim != 1 or w.shape[1] != x.shape[0] or w.shape[0] != b.shape[0]:
        raise ShapeMismatch(f"affine: W {w.shape}, x {x.shape}, b {b.shape}")
    return w @ x + b


def softmax(z: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax of a vector."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def cross_entropy(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Loss -ln softmax[target] and its gradient w.r.t. the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    if not (0 <= target < logits.shape[0]):
        raise BadTarget(f"target {target} outside [0, {logits.shape[0]})")
    probs = softmax(logits)
    loss = -float(np.log(probs[target]))
    grad = probs.copy()
    grad[target] -= 1.0
    return loss, grad


def reduce_sum_loss(per_step_losses: Sequence[float]) -> float:
    """Sum of per-step losses; the curve later divides by batch * seq_len."""
    if len(per_step_losses) == 0:
        raise EmptyInput("no per-step losses to reduce")
    return float(sum(per_step_losses))


def clip_gradients(grads: list[np.ndarray], max_norm: float) -> list[np.ndarray]:
    """Scale all gradients by a shared factor so the global L2 norm <= max_norm."""
    total = 0.0
    for g in grads:
        total += float((g * g).sum())
    norm = np.sqrt(total)
    if norm <= max_norm or norm == 0.0:
        return [g.copy() for g in grads]
    scale = max_norm / norm
    return [g * scale for g in grads]


@dataclass
class AdamState:
    """First/second moment accumulators plus hyperparameters."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError("step counter must be >= 0")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], **kwargs) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **kwargs,
        )


def adam_step(
    params: list[np.ndarray], grads: list[np.ndarray], state: AdamState
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update; params are updated in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params, grads, and state must align")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** state.t)
        v_hat = v / (1.0 - b2 ** state.t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


def finite_diff_check(
    loss_fn: Callable[[list[np.ndarray]], tuple[float, list[np.ndarray]]],
    params: list[np.ndarray],
    h: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    loss_fn maps a parameter list to (loss, gradient list) and must be
    deterministic.  Checks every coordinate unless max_coords caps the
    sample per parameter.
    """
    _, grads = loss_fn([p.copy() for p in params])
    worst = 0.0
    for pi, p in enumerate(params):
        flat_n = p.size
        if max_coords is not None and flat_n > max_coords:
            if rng is None:
                rng = np.random.default_rng(0)
            coords = rng.choice(flat_n, size=max_coords, replace=False)
        else:
            coords = range(flat_n)
        for c in coords:
            idx = np.unravel_index(c, p.shape)

            def perturbed(delta: float) -> float:
                trial = [q.copy() for q in params]
                trial[pi][idx] += delta
                return loss_fn(trial)[0]

            numeric = (perturbed(h) - perturbed(-h)) / (2.0 * h)
            analytic = float(grads[pi][idx])
            denom = max(abs(analytic), abs(numeric), 1e-12)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst
