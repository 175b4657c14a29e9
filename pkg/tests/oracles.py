"""Independent reference implementations used as test oracles.

Everything here is written the slow, obvious way (explicit loops, exact
fractions) so it shares no code path with the library.
"""

import itertools
from fractions import Fraction

import numpy as np

from lscipad import nn


# -- convolution / pooling -------------------------------------------------

def naive_conv(x, w, b, padding, stride):
    """Direct sliding-window cross-correlation for any number of spatial axes."""
    nd = w.ndim - 2
    pad = (padding,) * nd if np.isscalar(padding) else tuple(padding)
    st = (stride,) * nd if np.isscalar(stride) else tuple(stride)
    xp = np.pad(x, [(0, 0), (0, 0)] + [(p, p) for p in pad])
    k = w.shape[2:]
    out_sp = [(xp.shape[2 + i] - k[i]) // st[i] + 1 for i in range(nd)]
    out = np.zeros((x.shape[0], w.shape[0], *out_sp))
    for n in range(x.shape[0]):
        for o in range(w.shape[0]):
            for pos in itertools.product(*(range(s) for s in out_sp)):
                sl = tuple(slice(p * s, p * s + kk) for p, s, kk in zip(pos, st, k))
                out[(n, o) + pos] = np.sum(xp[(n, slice(None)) + sl] * w[o]) + (b[o] if b is not None else 0.0)
    return out


def naive_maxpool(x, window, stride=None):
    """Max over windows on the trailing axes plus a first-max gradient mask for an all-ones upstream."""
    nd = len(window)
    stride = tuple(window) if stride is None else tuple(stride)
    lead = x.shape[:-nd]
    sp = x.shape[-nd:]
    out_sp = [(n - k) // s + 1 for n, k, s in zip(sp, window, stride)]
    out = np.zeros(lead + tuple(out_sp))
    grad = np.zeros_like(x, dtype=float)
    for li in itertools.product(*(range(n) for n in lead)):
        for pos in itertools.product(*(range(n) for n in out_sp)):
            best, best_at = -np.inf, None
            for off in itertools.product(*(range(k) for k in window)):
                at = li + tuple(p * s + o for p, s, o in zip(pos, stride, off))
                if x[at] > best:
                    best, best_at = x[at], at
            out[li + pos] = best
            grad[best_at] += 1.0
    return out, grad


# -- metrics ------------------------------------------------------------------

def brute_rates(labels, scores, thr):
    P = sum(1 for l in labels if l == 1)
    N = len(labels) - P
    fn = sum(1 for l, s in zip(labels, scores) if l == 1 and not s >= thr)
    fp = sum(1 for l, s in zip(labels, scores) if l == 0 and s >= thr)
    return fn, fp, P, N


def brute_metrics(labels, scores, threshold=0.5, target=0.05):
    """APCER, BPCER, ACER, BPCER20, AUC by exhaustive thresholds and pairs."""
    fn, fp, P, N = brute_rates(labels, scores, threshold)
    apcer = fn / P if P else None
    bpcer = fp / N if N else None
    acer = 0.5 * (apcer + bpcer) if P and N else None
    if not (P and N):
        return apcer, bpcer, acer, None, None
    # every threshold that can change a decision: each score, a point between
    # neighbours, and both extremes
    uniq = sorted(set(scores))
    cands = [-np.inf, np.inf] + uniq + [(a + b) / 2 for a, b in zip(uniq, uniq[1:])] + [uniq[-1] + 1]
    best = Fraction(1)
    for t in cands:
        fn_t, fp_t, _, _ = brute_rates(labels, scores, t)
        if Fraction(fn_t, P) <= Fraction(target).limit_denominator(10 ** 6):
            best = min(best, Fraction(fp_t, N))
    att = [s for l, s in zip(labels, scores) if l == 1]
    bon = [s for l, s in zip(labels, scores) if l == 0]
    wins = Fraction(0)
    for a in att:
        for b in bon:
            wins += 1 if a > b else Fraction(1, 2) if a == b else 0
    return apcer, bpcer, acer, float(best), float(wins / (P * N))


def brute_roc(labels, scores):
    """Set of (apcer, bpcer) pairs reachable by any threshold."""
    uniq = sorted(set(scores))
    cands = [-np.inf, np.inf] + uniq + [(a + b) / 2 for a, b in zip(uniq, uniq[1:])]
    out = set()
    for t in cands:
        fn, fp, P, N = brute_rates(labels, scores, t)
        out.add((fn / P, fp / N))
    return out


# -- gradient suite -------------------------------------------------------------

class BCEHead(nn.Layer):
    """Linear -> sigmoid -> BCE against fixed targets, exposed as a scalar-output fragment."""

    kind = "bce_head"

    def __init__(self, n_in, targets, rng):
        super().__init__("bce_head")
        self.fc = nn.Linear(n_in, 1, rng=rng, name="fc", dtype=np.float64)
        self.sig = nn.Sigmoid()
        self.targets = np.asarray(targets, dtype=np.float64)

    def params(self):
        return self.fc.params()

    def forward(self, x):
        p = self.sig.forward(self.fc.forward(x))[:, 0]
        loss, self._grad = nn.bce_loss(p, self.targets)
        return np.array([loss])

    def backward(self, dout):
        d = self.sig.backward((dout[0] * self._grad)[:, None])
        return self.fc.backward(d)


def gradient_cases():
    """(name, fragment, input) for every layer kind the classifiers use, in float64."""
    f64 = np.float64
    rng = np.random.default_rng(1234)
    r = lambda *s: rng.standard_normal(s)
    cases = [
        ("conv2d", nn.Conv(2, 3, (3, 3), padding=1, rng=rng, dtype=f64), r(2, 2, 5, 5)),
        ("conv2d_strided", nn.Conv(2, 2, (3, 3), padding=1, stride=2, rng=rng, dtype=f64), r(1, 2, 5, 5)),
        ("conv3d", nn.Conv(1, 2, (3, 3, 3), padding=1, rng=rng, dtype=f64), r(1, 1, 6, 4, 4)),
        ("maxpool2d", nn.MaxPool((2, 2)), r(1, 2, 4, 4)),
        ("maxpool3d", nn.MaxPool((2, 2, 2)), r(1, 2, 4, 4, 4)),
        ("relu", nn.ReLU(), r(3, 7)),
        ("sigmoid", nn.Sigmoid(), r(3, 7)),
        ("tanh", nn.Tanh(), r(3, 7)),
        ("linear", nn.Linear(3, 4, rng=rng, dtype=f64), r(2, 3)),
        ("lstm_2layer", nn.Sequential([nn.LSTM(4, 5, rng=rng, name="l1", dtype=f64),
                                       nn.LSTM(5, 5, rng=rng, name="l2", dtype=f64)]), r(3, 1, 4)),
        ("bce_head", BCEHead(4, [1, 0, 1, 0, 0], rng), r(5, 4)),
    ]
    # biases start at zero; perturb them so their gradients are not trivially tested at one point
    for _, frag, _ in cases:
        for p in frag.params():
            if p.name.endswith("bias"):
                p.value[...] = rng.standard_normal(p.value.shape) * 0.1
    return cases
