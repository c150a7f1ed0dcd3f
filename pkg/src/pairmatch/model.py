"""Model assembly: parameters per variant, forward passes, and losses.

Variant families:

* single-domain baselines ("tgt-only", "src-only", "mixed", "fine-tune"):
  one encoder and one softmax head, trained on one (possibly combined)
  corpus;
* alternating transfer variants ("fs", "ss", "ss-adv", "drss",
  "drss-adv"): a shared encoder, optional per-domain private encoders,
  per-domain output heads, and optional trace/adversarial terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .data import Batch, EmbeddingTable, encode_text
from .errors import ConfigError
from .hcnn import HcnnParams, hcnn_forward, hcnn_output_dim
from .heads import (AdvHead, LossWeights, OutputHeads, adversarial_entropy_loss,
                    class_logits, stack_w, stack_w_tensor)
from .omega import omega_inverse
from .tensor import Tensor, glorot_uniform, zeros_param

SINGLE_VARIANTS = ("tgt-only", "src-only", "mixed", "fine-tune")
ALTERNATING_VARIANTS = ("fs", "ss", "ss-adv", "drss", "drss-adv")
VARIANTS = SINGLE_VARIANTS + ALTERNATING_VARIANTS

SS_FAMILY = ("ss", "ss-adv", "drss", "drss-adv")
DRSS_FAMILY = ("drss", "drss-adv")
ADV_VARIANTS = ("ss-adv", "drss-adv")


def canonical_variant(name: str) -> str:
    canon = name.strip().lower().replace("_", "-")
    if canon not in VARIANTS:
        raise ConfigError(f"unknown variant {name!r}; expected one of {', '.join(VARIANTS)}")
    return canon


@dataclass
class SingleHead:
    """One softmax head for the single-domain baselines."""

    w: Tensor
    b: Tensor

    @classmethod
    def init(cls, rng, num_classes: int, q: int, dtype=np.float64) -> "SingleHead":
        return cls(w=glorot_uniform(rng, (num_classes, q), q, num_classes, dtype, "w"),
                   b=zeros_param((num_classes,), dtype, "b"))

    def named_tensors(self) -> dict[str, Tensor]:
        return {"head.w": self.w, "head.b": self.b}


@dataclass
class ModelParams:
    """Everything trainable, plus the structural hyperparameters."""

    variant: str
    embedding: EmbeddingTable
    m: int
    feature_maps: int
    theta_c: HcnnParams
    heads: OutputHeads | SingleHead
    theta_s: HcnnParams | None = None
    theta_t: HcnnParams | None = None
    adv: AdvHead | None = None

    @property
    def num_classes(self) -> int:
        return self.heads.w.shape[0] if isinstance(self.heads, SingleHead) \
            else self.heads.num_classes

    def params(self) -> dict[str, Tensor]:
        """Ordered name -> leaf registry (the optimizer/gradcheck surface)."""
        out: dict[str, Tensor] = {}
        if self.embedding.trainable:
            out["embedding"] = self.embedding.matrix
        out.update(self.theta_c.named_tensors("theta_c"))
        if self.theta_s is not None:
            out.update(self.theta_s.named_tensors("theta_s"))
        if self.theta_t is not None:
            out.update(self.theta_t.named_tensors("theta_t"))
        out.update(self.heads.named_tensors())
        if self.adv is not None:
            out.update(self.adv.named_tensors())
        return out

    def encoder_for(self, domain: str) -> HcnnParams | None:
        if self.theta_s is None and self.theta_t is None:
            return None
        if domain == "source":
            return self.theta_s
        if domain == "target":
            return self.theta_t
        raise ConfigError(f"unknown domain tag {domain!r}")


def init_model(variant: str, embedding: EmbeddingTable, m: int, feature_maps: int,
               num_classes: int, rng: np.random.Generator, *,
               share_filters: bool = False, use_encoding_branch: bool = True,
               use_interaction_branch: bool = True, dtype=np.float64) -> ModelParams:
    """Build a model; encoder creation order is fixed so seeding is stable."""
    variant = canonical_variant(variant)
    q = hcnn_output_dim(m, feature_maps, use_encoding_branch, use_interaction_branch)

    def encoder():
        return HcnnParams.init(rng, embedding.l, feature_maps,
                               share_filters=share_filters,
                               use_encoding_branch=use_encoding_branch,
                               use_interaction_branch=use_interaction_branch,
                               dtype=dtype)

    theta_c = encoder()
    theta_s = theta_t = adv = None
    if variant in SINGLE_VARIANTS:
        heads: OutputHeads | SingleHead = SingleHead.init(rng, num_classes, q, dtype)
    else:
        if variant in SS_FAMILY:
            theta_s = encoder()
            theta_t = encoder()
        heads = OutputHeads.init(rng, num_classes, q,
                                 with_specific=variant in SS_FAMILY, dtype=dtype)
        if variant in ADV_VARIANTS:
            adv = AdvHead.init(rng, q, dtype)
    return ModelParams(variant=variant, embedding=embedding, m=m,
                       feature_maps=feature_maps, theta_c=theta_c, heads=heads,
                       theta_s=theta_s, theta_t=theta_t, adv=adv)


def validate_variant_params(mp: ModelParams, variant: str) -> str:
    """Reject variant/parameter mismatches up front."""
    variant = canonical_variant(variant)
    has_specific = mp.theta_s is not None or mp.theta_t is not None
    if variant in SINGLE_VARIANTS:
        if not isinstance(mp.heads, SingleHead) or has_specific or mp.adv is not None:
            raise ConfigError(f"variant {variant!r} takes one encoder and one head")
        return variant
    if isinstance(mp.heads, SingleHead):
        raise ConfigError(f"variant {variant!r} needs per-domain output heads")
    if variant == "fs":
        if has_specific or mp.heads.w_s is not None:
            raise ConfigError("fully-shared variant must not carry domain-specific "
                              "encoders or head weights")
    elif variant in SS_FAMILY:
        if mp.theta_s is None or mp.theta_t is None:
            raise ConfigError(f"variant {variant!r} needs both domain-specific encoders")
        if mp.heads.w_s is None or mp.heads.w_t is None:
            raise ConfigError(f"variant {variant!r} needs domain-specific head weights")
    if variant in ADV_VARIANTS and mp.adv is None:
        raise ConfigError(f"variant {variant!r} needs the domain-discriminator head")
    if variant not in ADV_VARIANTS and mp.adv is not None:
        raise ConfigError(f"variant {variant!r} must not carry a domain discriminator")
    return variant


def _lookup_pair(mp: ModelParams, batch: Batch) -> tuple[Tensor, Tensor]:
    return (ops.embedding_lookup(mp.embedding.matrix, batch.x1),
            ops.embedding_lookup(mp.embedding.matrix, batch.x2))


def _l2_term(tensors, coeff: float) -> Tensor | None:
    tensors = [t for t in tensors if t is not None]
    if coeff <= 0 or not tensors:
        return None
    total = ops.add_n([ops.sumsq(t) for t in tensors]) if len(tensors) > 1 \
        else ops.sumsq(tensors[0])
    return ops.scale(total, coeff / 2.0)


def _encoder_tensors(theta: HcnnParams | None) -> list[Tensor]:
    return list(theta.named_tensors("x").values()) if theta is not None else []


def step_loss(mp: ModelParams, batch: Batch, domain: str, lw: LossWeights,
              variant: str, omega_inv: np.ndarray | None = None
              ) -> tuple[Tensor, dict[str, float]]:
    """Loss for one alternating step on one domain's mini-batch.

    The cross-entropy (and the entropy term, for adversarial variants)
    sees only this batch; the trace and head-L2 regularizers touch the
    whole stacked W; the encoder L2 covers the encoders updated in this
    step (shared plus this domain's private one).
    """
    variant = validate_variant_params(mp, variant)
    if variant in SINGLE_VARIANTS:
        raise ConfigError(f"step_loss is the alternating-step surface; "
                          f"variant {variant!r} trains single-domain")
    x1, x2 = _lookup_pair(mp, batch)
    z_c = hcnn_forward(x1, x2, mp.theta_c)
    theta_dom = mp.encoder_for(domain)
    z_dom = hcnn_forward(x1, x2, theta_dom) if theta_dom is not None else None
    logits = class_logits(z_c, z_dom, domain, mp.heads)
    ce = ops.mean(ops.softmax_cross_entropy(logits, batch.labels))
    terms = [ce]
    components = {"ce": ce.item(), "adv": 0.0, "trace": 0.0, "l2": 0.0}

    if variant in ADV_VARIANTS and lw.lambda0 > 0:
        dom_logits = ops.affine(z_c, mp.adv.w_d, mp.adv.b_d)
        ent = adversarial_entropy_loss(dom_logits if domain == "source" else None,
                                       dom_logits if domain == "target" else None)
        adv = ops.scale(ent, lw.lambda0)
        terms.append(adv)
        components["adv"] = adv.item()

    if variant in DRSS_FAMILY and lw.lambda1 > 0:
        if omega_inv is None:
            raise ConfigError("DRSS step needs omega_inv for the trace penalty")
        tp = ops.scale(ops.trace_penalty(stack_w_tensor(mp.heads), omega_inv),
                       lw.lambda1 / 2.0)
        terms.append(tp)
        components["trace"] = tp.item()

    l2_parts = [
        _l2_term(mp.heads.weight_tensors(), lw.lambda2),
        _l2_term(_encoder_tensors(mp.theta_c), lw.lambda3),
    ]
    if domain == "source":
        l2_parts.append(_l2_term(_encoder_tensors(mp.theta_s), lw.lambda4))
    else:
        l2_parts.append(_l2_term(_encoder_tensors(mp.theta_t), lw.lambda5))
    for part in l2_parts:
        if part is not None:
            terms.append(part)
            components["l2"] += part.item()

    loss = terms[0] if len(terms) == 1 else ops.add_n(terms)
    return loss, components


def combined_loss(mp: ModelParams, batch_s: Batch, batch_t: Batch, omega: np.ndarray,
                  lw: LossWeights, variant: str, ridge: float = 1e-6
                  ) -> tuple[Tensor, dict[str, float]]:
    """The full two-domain objective on one source and one target batch.

    Per-domain mean cross-entropies, plus (per variant) the weighted
    entropy, trace, and L2 terms.  Used by the gradient checker and for
    loss reporting; the trainer itself takes alternating per-domain steps.
    """
    variant = validate_variant_params(mp, variant)
    if variant in SINGLE_VARIANTS:
        raise ConfigError(f"combined_loss applies to transfer variants, not {variant!r}")
    terms: list[Tensor] = []
    components: dict[str, float] = {}
    dom_logits = {}
    for batch, domain in ((batch_s, "source"), (batch_t, "target")):
        x1, x2 = _lookup_pair(mp, batch)
        z_c = hcnn_forward(x1, x2, mp.theta_c)
        theta_dom = mp.encoder_for(domain)
        z_dom = hcnn_forward(x1, x2, theta_dom) if theta_dom is not None else None
        logits = class_logits(z_c, z_dom, domain, mp.heads)
        ce = ops.mean(ops.softmax_cross_entropy(logits, batch.labels))
        terms.append(ce)
        components["ce_src" if domain == "source" else "ce_tgt"] = ce.item()
        if variant in ADV_VARIANTS:
            dom_logits[domain] = ops.affine(z_c, mp.adv.w_d, mp.adv.b_d)

    components["adv"] = components["trace"] = components["l2"] = 0.0
    if variant in ADV_VARIANTS and lw.lambda0 > 0:
        adv = ops.scale(adversarial_entropy_loss(dom_logits.get("source"),
                                                 dom_logits.get("target")), lw.lambda0)
        terms.append(adv)
        components["adv"] = adv.item()
    if variant in DRSS_FAMILY and lw.lambda1 > 0:
        omega_inv = omega_inverse(np.asarray(omega), ridge=ridge)
        tp = ops.scale(ops.trace_penalty(stack_w_tensor(mp.heads), omega_inv),
                       lw.lambda1 / 2.0)
        terms.append(tp)
        components["trace"] = tp.item()
    for part in (_l2_term(mp.heads.weight_tensors(), lw.lambda2),
                 _l2_term(_encoder_tensors(mp.theta_c), lw.lambda3),
                 _l2_term(_encoder_tensors(mp.theta_s), lw.lambda4),
                 _l2_term(_encoder_tensors(mp.theta_t), lw.lambda5)):
        if part is not None:
            terms.append(part)
            components["l2"] += part.item()
    loss = ops.add_n(terms)
    components["loss"] = loss.item()
    return loss, components


def single_step_loss(mp: ModelParams, batch: Batch, lw: LossWeights
                     ) -> tuple[Tensor, dict[str, float]]:
    """Cross-entropy plus L2 for the single-domain baselines."""
    if not isinstance(mp.heads, SingleHead):
        raise ConfigError("single_step_loss needs a single-head model")
    x1, x2 = _lookup_pair(mp, batch)
    z = hcnn_forward(x1, x2, mp.theta_c)
    logits = ops.affine(z, mp.heads.w, mp.heads.b)
    ce = ops.mean(ops.softmax_cross_entropy(logits, batch.labels))
    terms = [ce]
    components = {"ce": ce.item(), "adv": 0.0, "trace": 0.0, "l2": 0.0}
    for part in (_l2_term([mp.heads.w], lw.lambda2),
                 _l2_term(_encoder_tensors(mp.theta_c), lw.lambda3)):
        if part is not None:
            terms.append(part)
            components["l2"] += part.item()
    loss = terms[0] if len(terms) == 1 else ops.add_n(terms)
    return loss, components


def predict_proba(mp: ModelParams, batch: Batch, domain: str | None = None) -> np.ndarray:
    """Class probabilities for a batch; forward-only, safe to run concurrently."""
    domain = domain or batch.domain
    x1, x2 = _lookup_pair(mp, batch)
    if isinstance(mp.heads, SingleHead):
        z = hcnn_forward(x1, x2, mp.theta_c)
        return ops.softmax(z.data @ mp.heads.w.data.T + mp.heads.b.data)
    z_c = hcnn_forward(x1, x2, mp.theta_c)
    theta_dom = mp.encoder_for(domain)
    z_dom = hcnn_forward(x1, x2, theta_dom) if theta_dom is not None else None
    logits = class_logits(z_c, z_dom, domain, mp.heads)
    return ops.softmax(logits.data)


class PairScorer:
    """Text-level scoring facade over a trained matcher.

    Wraps tokenization, padding, and the forward pass so retrieval code
    can score (query, candidate) pairs and fetch mean-embedding sentence
    vectors without touching model internals.
    """

    def __init__(self, mp: ModelParams, domain: str = "target"):
        self.mp = mp
        self.domain = domain

    def score_pairs(self, query: str, texts: list[str]) -> np.ndarray:
        """Probability of the positive class for (query, text) pairs."""
        if not texts:
            return np.zeros(0)
        vocab, m = self.mp.embedding.vocab, self.mp.m
        q_ids = encode_text(query, vocab, m)
        batch = Batch(x1=np.stack([q_ids] * len(texts)),
                      x2=np.stack([encode_text(t, vocab, m) for t in texts]),
                      labels=np.zeros(len(texts), dtype=np.int64),
                      domain=self.domain)
        return predict_proba(self.mp, batch, domain=self.domain)[:, 1]

    def sentence_vector(self, text: str) -> np.ndarray:
        """Mean embedding of the (non-PAD) tokens; zeros when nothing is known."""
        vocab = self.mp.embedding.vocab
        ids = [vocab.encode_token(tok) for tok in text.lower().split()]
        ids = [i for i in ids if i != 0]
        if not ids:
            return np.zeros(self.mp.embedding.l)
        return self.mp.embedding.matrix.data[:, ids].mean(axis=1)
