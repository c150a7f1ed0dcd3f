"""Hybrid CNN sentence-pair encoder.

Two branches over a pair of padded, embedded sentences:

* an encoding branch: per-sentence 1-D convolution (window 4, ReLU) with
  global max-over-time pooling, matched via concatenation plus
  element-wise difference and product;
* an interaction branch: a word-by-word dot-product matrix treated as a
  one-channel image and run through two conv/max-pool stages.

The concatenation of both is the pair representation z.  Either branch
can be disabled to recover the corresponding standalone baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import ConfigError
from .tensor import Tensor, glorot_uniform, zeros_param

CONV1D_WINDOW = 4

# interaction-branch stack: (kernel, stride, maps) conv then (size, stride) pool
PYR_CONV1 = (6, 1, 8)
PYR_POOL1 = (4, 4)
PYR_CONV2 = (4, 3, 16)
PYR_POOL2 = (2, 2)
PYRAMID_MIN_M = PYR_CONV1[0]


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def pyramid_output_dim(m: int) -> int:
    """Flattened size of the interaction branch for sentence length m."""
    if m < PYRAMID_MIN_M:
        raise ConfigError(
            f"interaction branch needs sentence length >= {PYRAMID_MIN_M}, got m={m}")
    h = _ceil_div(m, PYR_CONV1[1])
    h = _ceil_div(h, PYR_POOL1[1])
    h = _ceil_div(h, PYR_CONV2[1])
    h = _ceil_div(h, PYR_POOL2[1])
    return h * h * PYR_CONV2[2]


def hcnn_output_dim(m: int, feature_maps: int, use_encoding_branch: bool = True,
                    use_interaction_branch: bool = True) -> int:
    """|z| as a pure function of the shape hyperparameters."""
    if not (use_encoding_branch or use_interaction_branch):
        raise ConfigError("at least one hCNN branch must be enabled")
    dim = 0
    if use_encoding_branch:
        dim += 4 * feature_maps
    if use_interaction_branch:
        dim += pyramid_output_dim(m)
    return dim


@dataclass
class HcnnParams:
    """One encoder instance (the transfer model holds up to three)."""

    conv1_filters: Tensor | None
    conv1_bias: Tensor | None
    conv2_filters: Tensor | None  # None when the two sentences share filters
    conv2_bias: Tensor | None
    pyr_kernel1: Tensor | None
    pyr_bias1: Tensor | None
    pyr_kernel2: Tensor | None
    pyr_bias2: Tensor | None
    share_filters: bool
    use_encoding_branch: bool
    use_interaction_branch: bool

    @classmethod
    def init(cls, rng: np.random.Generator, l: int, feature_maps: int,
             share_filters: bool = False, use_encoding_branch: bool = True,
             use_interaction_branch: bool = True, dtype=np.float64) -> "HcnnParams":
        if not (use_encoding_branch or use_interaction_branch):
            raise ConfigError("at least one hCNN branch must be enabled")
        w = CONV1D_WINDOW
        c1f = c1b = c2f = c2b = None
        if use_encoding_branch:
            c1f = glorot_uniform(rng, (w, l, feature_maps), w * l, w * feature_maps, dtype)
            c1b = zeros_param((feature_maps,), dtype)
            if not share_filters:
                c2f = glorot_uniform(rng, (w, l, feature_maps), w * l, w * feature_maps, dtype)
                c2b = zeros_param((feature_maps,), dtype)
        k1 = k1b = k2 = k2b = None
        if use_interaction_branch:
            k, _, f1 = PYR_CONV1
            k1 = glorot_uniform(rng, (k, k, 1, f1), k * k * 1, k * k * f1, dtype)
            k1b = zeros_param((f1,), dtype)
            k2sz, _, f2 = PYR_CONV2
            k2 = glorot_uniform(rng, (k2sz, k2sz, f1, f2), k2sz * k2sz * f1,
                                k2sz * k2sz * f2, dtype)
            k2b = zeros_param((f2,), dtype)
        return cls(conv1_filters=c1f, conv1_bias=c1b, conv2_filters=c2f,
                   conv2_bias=c2b, pyr_kernel1=k1, pyr_bias1=k1b,
                   pyr_kernel2=k2, pyr_bias2=k2b, share_filters=share_filters,
                   use_encoding_branch=use_encoding_branch,
                   use_interaction_branch=use_interaction_branch)

    def named_tensors(self, prefix: str) -> dict[str, Tensor]:
        out = {}
        for attr in ("conv1_filters", "conv1_bias", "conv2_filters", "conv2_bias",
                     "pyr_kernel1", "pyr_bias1", "pyr_kernel2", "pyr_bias2"):
            t = getattr(self, attr)
            if t is not None:
                out[f"{prefix}.{attr}"] = t
        return out


def bcnn_encode(x1: Tensor, x2: Tensor, params: HcnnParams) -> Tensor:
    """h1 (+) h2 (+) (h1 - h2) (+) (h1 * h2) over pooled conv features."""
    f2 = params.conv1_filters if params.share_filters else params.conv2_filters
    b2 = params.conv1_bias if params.share_filters else params.conv2_bias
    h1 = ops.global_max_pool_1d(ops.conv1d(x1, params.conv1_filters, params.conv1_bias))
    h2 = ops.global_max_pool_1d(ops.conv1d(x2, f2, b2))
    return ops.concat([h1, h2, ops.sub(h1, h2), ops.mul(h1, h2)], axis=-1)


def interaction_matrix(x1: Tensor, x2: Tensor) -> Tensor:
    """Raw dot-product similarity of every word pair, as a 1-channel image."""
    return ops.interaction_matrix(x1, x2)


def pyramid_encode(m_matrix: Tensor, params: HcnnParams) -> Tensor:
    """Two conv/pool stages over the interaction image, flattened."""
    side = m_matrix.shape[-2]
    if side < PYRAMID_MIN_M:
        raise ConfigError(
            f"interaction branch needs sentence length >= {PYRAMID_MIN_M}, got m={side}")
    h = ops.conv2d(m_matrix, params.pyr_kernel1, params.pyr_bias1, stride=PYR_CONV1[1])
    h = ops.max_pool_2d(h, size=PYR_POOL1[0], stride=PYR_POOL1[1])
    h = ops.conv2d(h, params.pyr_kernel2, params.pyr_bias2, stride=PYR_CONV2[1])
    h = ops.max_pool_2d(h, size=PYR_POOL2[0], stride=PYR_POOL2[1])
    if h.ndim == 3:
        return ops.reshape(h, (-1,))
    return ops.reshape(h, (h.shape[0], -1))


def hcnn_forward(x1: Tensor, x2: Tensor, params: HcnnParams) -> Tensor:
    """Pair representation z; size is fixed by (m, feature_maps) alone."""
    parts = []
    if params.use_encoding_branch:
        parts.append(bcnn_encode(x1, x2, params))
    if params.use_interaction_branch:
        parts.append(pyramid_encode(interaction_matrix(x1, x2), params))
    if len(parts) == 1:
        return parts[0]
    return ops.concat(parts, axis=-1)
