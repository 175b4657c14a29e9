"""Check hand-written backward passes against central differences.

Builds a small conv -> relu -> pool -> linear stack in float64 and runs the
finite-difference checker on it, then does the same for a two-layer LSTM.
"""

import numpy as np

from lscipad import nn
from lscipad.nn.gradcheck import grad_check

rng = np.random.default_rng(0)
f64 = np.float64

stack = nn.Sequential([
    nn.Conv(3, 4, (3, 3), padding=1, rng=rng, dtype=f64),
    nn.ReLU(),
    nn.MaxPool((2, 2)),
    nn.Flatten(),
    nn.Linear(4 * 3 * 3, 2, rng=rng, dtype=f64),
])
x = rng.standard_normal((2, 3, 6, 6))
report = grad_check(stack, x)
for name, err in report.max_rel_error.items():
    print(f"{name:>20s}  max rel err {err:.2e}")
print("passed:", report.passed, " kinks skipped:", sum(report.kinks.values()))

# With eps=1e-3 a conv weight nudge can flip a ReLU sign or a pool argmax somewhere
# downstream, and then the difference quotient straddles a kink.  Shrinking eps
# shows whether a large error is that or a real bug.
if not report.passed:
    print("retry at eps=1e-5:", f"{grad_check(stack, x, eps=1e-5).worst:.1e}")

# recurrent layers backpropagate through time
lstm = nn.Sequential([nn.LSTM(4, 6, rng=rng, name="a", dtype=f64), nn.LSTM(6, 3, rng=rng, name="b", dtype=f64)])
rep = grad_check(lstm, rng.standard_normal((5, 2, 4)))
print("lstm worst", f"{rep.worst:.2e}", "passed:", rep.passed)

# float32 is too coarse for eps=1e-3, which is why the checks run in float64
lin32 = nn.Linear(8, 8, rng=rng)
print("float32 linear worst:", f"{grad_check(lin32, rng.standard_normal((4, 8)).astype(np.float32)).worst:.1e}")
