from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(eq=False)
class Param:
    """A trainable array together with its gradient and Adam moments."""

    name: str
    value: np.ndarray
    grad: np.ndarray = field(default=None, repr=False)
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)
    step_count: int = 0

    def __post_init__(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.m is None:
            self.m = np.zeros_like(self.value)
        if self.v is None:
            self.v = np.zeros_like(self.value)

    @property
    def size(self):
        return self.value.size

    def zero_grad(self):
        self.grad[...] = 0


def adam_step(params, lr, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
    """One bias-corrected Adam update on every param, then clear gradients."""
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise NumericError(f"non-finite gradient in parameter {p.name!r}")
    for p in params:
        p.step_count += 1
        dt = p.value.dtype
        g = p.grad
        p.m *= dt.type(beta1)
        p.m += dt.type(1 - beta1) * g
        p.v *= dt.type(beta2)
        p.v += dt.type(1 - beta2) * g * g
        m_hat = p.m / dt.type(1 - beta1 ** p.step_count)
        v_hat = p.v / dt.type(1 - beta2 ** p.step_count)
        p.value -= dt.type(lr) * m_hat / (np.sqrt(v_hat) + dt.type(eps))
        p.zero_grad()
