"""Output layers for the transfer variants, and the stacked-weight view.

Each domain predicts through softmax(W_dc z_c + W_d z_d + b_d) where the
domain-specific term exists only for specific-shared variants.  The four
weight matrices flatten (row-major) into the columns of a single stacked
matrix, ordered (W_s, W_sc, W_t, W_tc); that stack is what the covariance
machinery regularises and reports on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import ConfigError, ShapeError
from .omega import HEAD_LABELS
from .tensor import Tensor, glorot_uniform, zeros_param


@dataclass
class OutputHeads:
    """Per-domain classification heads; w_s/w_t are None for fully-shared."""

    w_sc: Tensor
    w_tc: Tensor
    b_s: Tensor
    b_t: Tensor
    w_s: Tensor | None = None
    w_t: Tensor | None = None

    @classmethod
    def init(cls, rng: np.random.Generator, num_classes: int, q: int,
             with_specific: bool, dtype=np.float64) -> "OutputHeads":
        def w(name):
            return glorot_uniform(rng, (num_classes, q), q, num_classes, dtype, name)

        w_s = w("w_s") if with_specific else None
        w_sc = w("w_sc")
        w_t = w("w_t") if with_specific else None
        w_tc = w("w_tc")
        return cls(w_sc=w_sc, w_tc=w_tc, b_s=zeros_param((num_classes,), dtype, "b_s"),
                   b_t=zeros_param((num_classes,), dtype, "b_t"), w_s=w_s, w_t=w_t)

    @property
    def num_classes(self) -> int:
        return self.w_sc.shape[0]

    @property
    def q(self) -> int:
        return self.w_sc.shape[1]

    def stacked_order(self) -> tuple[Tensor, ...]:
        if self.w_s is None or self.w_t is None:
            raise ConfigError("stack_W needs all four head matrices "
                              "(fully-shared heads have no domain-specific weights)")
        return (self.w_s, self.w_sc, self.w_t, self.w_tc)

    def weight_tensors(self) -> list[Tensor]:
        return [t for t in (self.w_s, self.w_sc, self.w_t, self.w_tc) if t is not None]

    def named_tensors(self) -> dict[str, Tensor]:
        out = {}
        for name in ("w_s", "w_sc", "w_t", "w_tc", "b_s", "b_t"):
            t = getattr(self, name)
            if t is not None:
                out[f"heads.{name}"] = t
        return out


@dataclass
class AdvHead:
    """Two-class domain discriminator over the shared representation."""

    w_d: Tensor
    b_d: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, q: int, dtype=np.float64) -> "AdvHead":
        return cls(w_d=glorot_uniform(rng, (2, q), q, 2, dtype, "w_d"),
                   b_d=zeros_param((2,), dtype, "b_d"))

    def named_tensors(self) -> dict[str, Tensor]:
        return {"adv.w_d": self.w_d, "adv.b_d": self.b_d}


@dataclass
class LossWeights:
    """Coefficients of the combined objective; all must be non-negative."""

    lambda0: float = 0.05    # domain-entropy term
    lambda1: float = 0.0008  # covariance trace penalty
    lambda2: float = 0.0004  # L2 on the four stacked heads
    lambda3: float = 0.0004  # L2 on the shared encoder
    lambda4: float = 0.0004  # L2 on the source encoder
    lambda5: float = 0.0004  # L2 on the target encoder

    def __post_init__(self):
        for name in ("lambda0", "lambda1", "lambda2", "lambda3", "lambda4", "lambda5"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")


@dataclass
class StackedW:
    """(q*|Y|) x 4 matrix whose columns are the flattened head weights."""

    matrix: np.ndarray
    num_classes: int
    q: int
    labels: tuple[str, ...] = HEAD_LABELS

    def unstack(self) -> dict[str, np.ndarray]:
        shape = (self.num_classes, self.q)
        return {lab: self.matrix[:, k].reshape(shape)
                for k, lab in enumerate(self.labels)}


def stack_w(heads: OutputHeads) -> StackedW:
    """Flatten the four head matrices (row-major) into stacked columns."""
    mats = heads.stacked_order()
    cols = [t.data.reshape(-1) for t in mats]
    if len({c.shape for c in cols}) != 1:
        raise ShapeError("stack_W: the four head matrices must share one shape")
    return StackedW(matrix=np.stack(cols, axis=1), num_classes=heads.num_classes,
                    q=heads.q)


def stack_w_tensor(heads: OutputHeads) -> Tensor:
    """Differentiable version of stack_w, used inside the loss graph."""
    cols = [ops.reshape(t, (-1, 1)) for t in heads.stacked_order()]
    return ops.concat(cols, axis=1)


def _domain_head(heads: OutputHeads, domain: str):
    if domain == "source":
        return heads.w_sc, heads.w_s, heads.b_s
    if domain == "target":
        return heads.w_tc, heads.w_t, heads.b_t
    raise ConfigError(f"unknown domain tag {domain!r}")


def class_logits(z_c: Tensor, z_dom: Tensor | None, domain: str,
                 heads: OutputHeads) -> Tensor:
    """Logits for one domain: W_dc z_c (+ W_d z_d) + b_d, graph-aware."""
    w_shared, w_specific, bias = _domain_head(heads, domain)
    logits = ops.affine(z_c, w_shared, bias)
    if z_dom is not None:
        if w_specific is None:
            raise ConfigError(
                f"domain-specific features supplied but the {domain} head has no "
                f"specific weights (fully-shared variant)")
        logits = ops.add(logits, ops.affine(z_dom, w_specific))
    return logits


def fs_predict(z_c: np.ndarray, domain: str, heads: OutputHeads) -> np.ndarray:
    """Class distribution from the shared representation only."""
    w_shared, _, bias = _domain_head(heads, domain)
    return ops.softmax(np.asarray(z_c) @ w_shared.data.T + bias.data)


def ss_predict(z_c: np.ndarray, z_dom: np.ndarray, domain: str,
               heads: OutputHeads) -> np.ndarray:
    """Class distribution with the domain-specific term added before softmax."""
    w_shared, w_specific, bias = _domain_head(heads, domain)
    if w_specific is None:
        raise ConfigError(f"ss_predict: the {domain} head has no specific weights")
    logits = (np.asarray(z_c) @ w_shared.data.T + bias.data) \
        + np.asarray(z_dom) @ w_specific.data.T
    return ops.softmax(logits)


def adversarial_entropy_loss(src_logits: Tensor | None,
                             tgt_logits: Tensor | None) -> Tensor:
    """Per-domain mean of sum_j p log p over the domain head's predictions.

    Summed over whichever domains are present in the step; minimised when
    every prediction is uniform (each domain contributing -ln 2).
    """
    terms = []
    for logits in (src_logits, tgt_logits):
        if logits is None:
            continue
        ent = ops.entropy_term(logits)
        terms.append(ops.mean(ent) if ent.ndim > 0 else ent)
    if not terms:
        raise ConfigError("adversarial_entropy_loss: no domain logits supplied")
    return terms[0] if len(terms) == 1 else ops.add_n(terms)
