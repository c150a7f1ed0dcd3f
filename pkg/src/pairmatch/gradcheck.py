"""Finite-difference verification of the backward rules.

Compares analytic gradients against central differences at step 1e-5 on
a random subsample of coordinates (at least 50 per parameter, or all of
them when a parameter is smaller).  Meant for 64-bit mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .tensor import Graph, Tensor, zero_grads


@dataclass
class GroupReport:
    name: str
    max_rel_error: float
    worst_coord: tuple | None
    checked: int


@dataclass
class GradCheckReport:
    tolerance: float
    groups: list[GroupReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(g.max_rel_error < self.tolerance for g in self.groups)

    @property
    def max_rel_error(self) -> float:
        return max((g.max_rel_error for g in self.groups), default=0.0)

    def summary(self) -> str:
        lines = [f"gradcheck tolerance={self.tolerance:g} "
                 f"{'PASS' if self.passed else 'FAIL'}"]
        for g in self.groups:
            lines.append(f"  {g.name:<28s} max_rel_error={g.max_rel_error:.3e} "
                         f"({g.checked} coords)")
        return "\n".join(lines)


def _rel_error(a: float, n: float) -> float:
    return abs(a - n) / max(1.0, abs(a), abs(n))


def grad_check(loss_fn, params: dict[str, Tensor], *, step: float = 1e-5,
               min_coords: int = 50, tolerance: float = 1e-4,
               seed: int = 0) -> GradCheckReport:
    """Check d(loss_fn())/d(param) for every parameter in ``params``.

    ``loss_fn`` must be a deterministic pure function of the parameter
    values that returns a scalar Tensor.  It is evaluated once under a
    recording graph for the analytic gradients and twice per sampled
    coordinate for the numeric ones.
    """
    rng = np.random.default_rng(seed)
    zero_grads(params)
    with Graph() as g:
        loss = loss_fn()
        g.backward(loss)

    analytic = {}
    for name, p in params.items():
        if p.grad is None:
            analytic[name] = np.zeros_like(p.data)
        else:
            if not np.all(np.isfinite(p.grad)):
                raise NumericError(f"grad_check: non-finite analytic gradient in {name!r}")
            analytic[name] = p.grad.copy()

    report = GradCheckReport(tolerance=tolerance)
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n_coords = flat.size
        if n_coords <= min_coords:
            coords = np.arange(n_coords)
        else:
            coords = rng.choice(n_coords, size=min_coords, replace=False)
        worst = 0.0
        worst_coord = None
        for c in coords:
            original = flat[c]
            flat[c] = original + step
            f_plus = float(loss_fn().data)
            flat[c] = original - step
            f_minus = float(loss_fn().data)
            flat[c] = original
            numeric = (f_plus - f_minus) / (2.0 * step)
            if not np.isfinite(numeric):
                raise NumericError(
                    f"grad_check: non-finite numeric gradient at {name!r}[{c}]")
            err = _rel_error(float(analytic[name].reshape(-1)[c]), numeric)
            if err > worst:
                worst = err
                worst_coord = (name, int(c))
        report.groups.append(GroupReport(name=name, max_rel_error=worst,
                                         worst_coord=worst_coord,
                                         checked=len(coords)))
    return report
