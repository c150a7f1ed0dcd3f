"""AdaGrad with per-coordinate accumulated squared gradients."""

from __future__ import annotations

import numpy as np

from .errors import NumericError
from .tensor import Tensor


class AdaGrad:
    """theta -= lr * g / (sqrt(G) + eps) with G accumulating g**2 per coordinate.

    Accumulators are created lazily per parameter name and are
    element-wise non-decreasing over steps.  A zero gradient leaves both
    the parameter and its accumulator untouched.
    """

    def __init__(self, learning_rate: float = 0.08, epsilon: float = 1e-8):
        if learning_rate <= 0 or epsilon <= 0:
            raise ValueError("learning_rate and epsilon must be positive")
        self.learning_rate = learning_rate
        self.epsilon = epsilon
        self.accumulators: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, Tensor]) -> None:
        """Apply one update to every parameter that has a gradient.

        All gradients are validated before anything is mutated, so a
        non-finite gradient aborts the whole step.
        """
        live = [(name, p) for name, p in params.items() if p.grad is not None]
        for name, p in live:
            if not np.all(np.isfinite(p.grad)):
                raise NumericError(f"adagrad_step: non-finite gradient for parameter {name!r}")
        for name, p in live:
            g = p.grad
            acc = self.accumulators.get(name)
            if acc is None:
                acc = self.accumulators[name] = np.zeros_like(p.data)
            acc += g * g
            p.data -= self.learning_rate * g / (np.sqrt(acc) + self.epsilon)
