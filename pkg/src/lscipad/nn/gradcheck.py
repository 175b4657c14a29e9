"""Central-difference verification of analytic gradients."""

from dataclasses import dataclass, field

import numpy as np

# below this magnitude a gradient pair counts as zero
REL_FLOOR = 1e-7


@dataclass
class GradCheckReport:
    """Max relative error per checked array.

    ``kinks`` counts elements where the one-sided slopes disagree (for
    example ReLU evaluated exactly at 0); those elements are excluded from
    ``max_rel_error`` instead of failing the check.
    """

    tolerance: float
    max_rel_error: dict = field(default_factory=dict)
    kinks: dict = field(default_factory=dict)

    @property
    def worst(self):
        return max(self.max_rel_error.values(), default=0.0)

    @property
    def passed(self):
        return self.worst < self.tolerance

    @property
    def flagged(self):
        return sum(self.kinks.values()) > 0


def relative_error(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), REL_FLOOR)


def grad_check(fragment, x, eps=1e-3, tolerance=1e-3, seed=0, check_input=True):
    """Compare ``fragment``'s backward pass against central differences.

    ``fragment`` needs ``forward(x)``, ``backward(dout)`` and ``params()``.
    The scalar objective is ``sum(forward(x) * R)`` for a fixed random ``R``,
    so every output element contributes.  Run this in float64: float32
    round-off at eps=1e-3 is of the same order as the tolerance.
    """
    rng = np.random.default_rng(seed)
    x = np.array(x, copy=True)
    out = fragment.forward(x)
    weights = rng.standard_normal(out.shape).astype(out.dtype)

    def objective():
        return float(np.sum(fragment.forward(x) * weights))

    for p in fragment.params():
        p.zero_grad()
    fragment.forward(x)
    dx = fragment.backward(weights)
    targets = [(p.name, p.value, p.grad.copy()) for p in fragment.params()]
    if check_input:
        targets.append(("input", x, dx))

    report = GradCheckReport(tolerance=tolerance)
    for name, arr, analytic in targets:
        flat = arr.reshape(-1)
        ana = analytic.reshape(-1)
        worst, kinks = 0.0, 0
        for i in range(flat.size):
            orig = flat[i]
            f0 = objective()
            flat[i] = orig + eps
            fp = objective()
            flat[i] = orig - eps
            fm = objective()
            flat[i] = orig
            d_plus, d_minus = (fp - f0) / eps, (f0 - fm) / eps
            if abs(d_plus - d_minus) > max(1e-2, 0.1 * max(abs(d_plus), abs(d_minus))):
                kinks += 1
                continue
            numeric = (fp - fm) / (2 * eps)
            worst = max(worst, float(relative_error(ana[i], numeric)))
        report.max_rel_error[name] = worst
        report.kinks[name] = kinks
    for p in fragment.params():
        p.zero_grad()
    return report
