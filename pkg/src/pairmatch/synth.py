"""Seeded synthetic transfer task for desk-scale experiments.

Both domains share one labeling rule: a pair is positive iff the Jaccard
overlap of its shared-alphabet tokens reaches tau.  Each domain also has
a private trigger token pair; with probability rho an example carries the
triggers (first trigger in s1, second in s2) and its label is flipped.
Domain-specific filler tokens never include the triggers, so the flip
rule fires exactly when the generator intends it to.  Labels are a pure
function of the token sequences, so the task is noiseless.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import PairRow, SOURCE, TARGET
from .errors import DataError


def _default_alphabet(prefix: str, size: int) -> list[str]:
    return [f"{prefix}{i:02d}" for i in range(size)]


@dataclass
class SynthSpec:
    """Knobs of the generator; alphabets may be overridden explicitly."""

    n_shared: int = 40
    n_domain: int = 12
    tau: float = 0.5
    rho: float = 0.1
    min_len: int = 6
    max_len: int = 12
    n_dev: int = 500
    n_test: int = 1000
    shared_alphabet: list[str] = field(default_factory=list)
    source_alphabet: list[str] = field(default_factory=list)
    target_alphabet: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.shared_alphabet:
            self.shared_alphabet = _default_alphabet("s", self.n_shared)
        if not self.source_alphabet:
            self.source_alphabet = _default_alphabet("a", self.n_domain)
        if not self.target_alphabet:
            self.target_alphabet = _default_alphabet("b", self.n_domain)
        shared, src, tgt = map(set, (self.shared_alphabet, self.source_alphabet,
                                     self.target_alphabet))
        if shared & src or shared & tgt or src & tgt:
            raise DataError("synth: alphabets must be pairwise disjoint")
        if not 0.0 < self.tau <= 1.0:
            raise DataError(f"synth: tau must be in (0, 1], got {self.tau}")
        if not 0.0 <= self.rho <= 1.0:
            raise DataError(f"synth: rho must be in [0, 1], got {self.rho}")
        if self.min_len < 4 or self.max_len < self.min_len:
            raise DataError("synth: need 4 <= min_len <= max_len")
        if len(self.source_alphabet) < 3 or len(self.target_alphabet) < 3:
            raise DataError("synth: domain alphabets need >= 3 tokens "
                            "(two triggers plus fillers)")
        if len(self.shared_alphabet) < 8:
            raise DataError("synth: shared alphabet needs >= 8 tokens")

    def triggers(self, domain: str) -> tuple[str, str]:
        alpha = self.source_alphabet if domain == SOURCE else self.target_alphabet
        return alpha[0], alpha[1]

    def fillers(self, domain: str) -> list[str]:
        alpha = self.source_alphabet if domain == SOURCE else self.target_alphabet
        return alpha[2:]


def shared_rule_label(s1_tokens, s2_tokens, spec: SynthSpec) -> int:
    """Base rule: 1 iff Jaccard overlap of shared-alphabet tokens >= tau."""
    shared = set(spec.shared_alphabet)
    a = set(s1_tokens) & shared
    b = set(s2_tokens) & shared
    union = a | b
    if not union:
        return 0
    return int(len(a & b) / len(union) >= spec.tau)


def rule_label(s1_tokens, s2_tokens, domain: str, spec: SynthSpec) -> int:
    """Full generative rule: base label, flipped when the trigger pair co-occurs."""
    base = shared_rule_label(s1_tokens, s2_tokens, spec)
    t1, t2 = spec.triggers(domain)
    if t1 in s1_tokens and t2 in s2_tokens:
        return 1 - base
    return base


def _sample_pair(rng: np.random.Generator, spec: SynthSpec, domain: str,
                 intended: int) -> PairRow:
    n1 = int(rng.integers(spec.min_len, spec.max_len + 1))
    n2 = int(rng.integers(spec.min_len, spec.max_len + 1))
    # keep at least one filler slot per sentence for the trigger insertion
    k1 = int(rng.integers(2, min(6, n1 - 1) + 1))
    shared_a = list(rng.choice(spec.shared_alphabet, size=k1, replace=False))
    if intended == 1:
        shared_b = list(shared_a)
        if k1 / (k1 + 1) >= spec.tau and rng.random() < 0.5 and k1 + 1 <= n2 - 1:
            extra_pool = [t for t in spec.shared_alphabet if t not in shared_a]
            shared_b.append(str(rng.choice(extra_pool)))
    else:
        pool = [t for t in spec.shared_alphabet if t not in shared_a]
        k2 = int(rng.integers(2, min(6, n2 - 1, len(pool)) + 1))
        shared_b = list(rng.choice(pool, size=k2, replace=False))
        if len(shared_a) + len(shared_b) >= 3 and 1.0 / (k1 + k2 - 1) < spec.tau \
                and rng.random() < 0.3:
            shared_b[0] = shared_a[0]

    fillers = spec.fillers(domain)

    def compose(shared_part: list[str], n: int) -> list[str]:
        toks = list(shared_part)
        toks.extend(rng.choice(fillers, size=n - len(toks), replace=True))
        rng.shuffle(toks)
        return toks

    toks1 = compose(shared_a, n1)
    toks2 = compose(shared_b, n2)
    if rng.random() < spec.rho:
        t1, t2 = spec.triggers(domain)
        # overwrite a filler slot so the shared-token sets stay intact
        slots1 = [i for i, t in enumerate(toks1) if t in fillers]
        slots2 = [i for i, t in enumerate(toks2) if t in fillers]
        toks1[int(rng.choice(slots1))] = t1
        toks2[int(rng.choice(slots2))] = t2
    label = rule_label(toks1, toks2, domain, spec)
    return PairRow(query_id="", s1=" ".join(toks1), s2=" ".join(toks2),
                   label=label, domain=domain)


def _sample_split(seed_seq: np.random.SeedSequence, spec: SynthSpec, domain: str,
                  n: int) -> list[PairRow]:
    rng = np.random.default_rng(seed_seq)
    rows = [_sample_pair(rng, spec, domain, intended=i % 2) for i in range(n)]
    if n >= 20:
        positive = sum(r.label for r in rows) / n
        if not 0.4 <= positive <= 0.6:
            raise DataError(f"synth: label balance {positive:.3f} outside [0.4, 0.6]")
    return rows


def synth_generate(seed: int, n_src: int, n_tgt: int, spec: SynthSpec | None = None
                   ) -> tuple[list[PairRow], list[PairRow], list[PairRow], list[PairRow]]:
    """Generate (source train, target train, target dev, target test).

    Byte-identical output for a fixed (seed, spec); the four splits draw
    from independent child streams so changing one size does not perturb
    the others.
    """
    spec = spec or SynthSpec()
    children = np.random.SeedSequence(seed).spawn(4)
    d_src = _sample_split(children[0], spec, SOURCE, n_src)
    d_tgt = _sample_split(children[1], spec, TARGET, n_tgt)
    d_dev = _sample_split(children[2], spec, TARGET, spec.n_dev)
    d_test = _sample_split(children[3], spec, TARGET, spec.n_test)
    return d_src, d_tgt, d_dev, d_test
