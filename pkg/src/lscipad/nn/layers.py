"""Stateful layer wrappers around :mod:`lscipad.nn.functional`.

A layer caches what its backward pass needs during ``forward`` and
accumulates parameter gradients into its :class:`Param` objects during
``backward``.  Only the layers used by the five classifiers exist here.
"""

import numpy as np

from . import functional as F
from .optim import Param


def uniform_init(rng, shape, fan_in, dtype=np.float32):
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Layer:
    kind = "layer"
    out_batch_axis = 0

    def __init__(self, name=""):
        self.name = name
        self.out_shape = None

    def params(self):
        return []

    def n_params(self):
        return sum(p.size for p in self.params())

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def describe(self):
        info = {"name": self.name, "type": self.kind, "params": self.n_params()}
        if self.out_shape is not None:
            info["output_shape"] = list(self.out_shape)
        return info


class Conv(Layer):
    """2-d or 3-d convolution, chosen by the length of ``kernel``."""

    def __init__(self, in_ch, out_ch, kernel, padding=0, stride=1, rng=None,
                 bias=True, name="conv", dtype=np.float32):
        super().__init__(name)
        self.nd = len(kernel)
        self.kind = f"conv{self.nd}d"
        self.padding = padding
        self.stride = stride
        rng = np.random.default_rng(0) if rng is None else rng
        shape = (out_ch, in_ch) + tuple(kernel)
        fan_in = in_ch * int(np.prod(kernel))
        self.weight = Param(f"{name}.weight", uniform_init(rng, shape, fan_in, dtype))
        self.bias = Param(f"{name}.bias", np.zeros(out_ch, dtype)) if bias else None

    def params(self):
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    def forward(self, x):
        b = self.bias.value if self.bias is not None else None
        out, self._cache = F._conv_nd(x, self.weight.value, b, self.padding, self.stride)
        return out

    def backward(self, dout):
        dx, dw, db = F._conv_nd_backward(dout, self._cache)
        self.weight.grad += dw
        if self.bias is not None:
            self.bias.grad += db
        return dx


class MaxPool(Layer):
    kind = "maxpool"

    def __init__(self, window, stride=None, padding=0, name="pool"):
        super().__init__(name)
        self.window = tuple(window)
        self.stride = stride
        self.padding = padding

    def forward(self, x):
        out, self._cache = F.maxpool(x, self.window, self.stride, self.padding)
        return out

    def backward(self, dout):
        return F.maxpool_backward(dout, self._cache)

    def describe(self):
        info = super().describe()
        info["window"] = list(self.window)
        return info


class ReLU(Layer):
    kind = "relu"

    def forward(self, x):
        out, self._x = F.relu(x)
        return out

    def backward(self, dout):
        return F.relu_backward(dout, self._x)


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x):
        out, self._out = F.sigmoid(x)
        return out

    def backward(self, dout):
        return F.sigmoid_backward(dout, self._out)


class Tanh(Layer):
    kind = "tanh"

    def forward(self, x):
        out, self._out = F.tanh(x)
        return out

    def backward(self, dout):
        return F.tanh_backward(dout, self._out)


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)


class GlobalAvgPool(Layer):
    """Mean over every axis after the channel axis."""

    kind = "global_avg_pool"

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], x.shape[1], -1).mean(axis=2)

    def backward(self, dout):
        n = int(np.prod(self._shape[2:]))
        d = np.broadcast_to((dout / n).reshape(dout.shape + (1,) * (len(self._shape) - 2)), self._shape)
        return np.ascontiguousarray(d)


class Linear(Layer):
    kind = "linear"

    def __init__(self, n_in, n_out, rng=None, name="fc", dtype=np.float32):
        super().__init__(name)
        rng = np.random.default_rng(0) if rng is None else rng
        self.weight = Param(f"{name}.weight", uniform_init(rng, (n_in, n_out), n_in, dtype))
        self.bias = Param(f"{name}.bias", np.zeros(n_out, dtype))

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        out, self._cache = F.linear(x, self.weight.value, self.bias.value)
        return out

    def backward(self, dout):
        dx, dw, db = F.linear_backward(dout, self._cache)
        self.weight.grad += dw
        self.bias.grad += db
        return dx


class Sequential(Layer):
    kind = "sequential"

    def __init__(self, layers, name=""):
        super().__init__(name)
        self.layers = list(layers)

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
            layer.out_shape = tuple(n for i, n in enumerate(x.shape) if i != layer.out_batch_axis)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def describe(self):
        info = super().describe()
        info["layers"] = [layer.describe() for layer in self.layers]
        return info


class ResidualBlock(Layer):
    """``relu(main(x) + projection(x))`` with a bias-free 1x1 projection conv."""

    kind = "residual_block"

    def __init__(self, main, projection, name="res"):
        super().__init__(name)
        self.main = main
        self.projection = projection
        self.act = ReLU(f"{name}.relu")

    def params(self):
        return self.main.params() + self.projection.params()

    def forward(self, x):
        y = self.main.forward(x) + self.projection.forward(x)
        self.projection.out_shape = y.shape[1:]
        return self.act.forward(y)

    def backward(self, dout):
        d = self.act.backward(dout)
        return self.main.backward(d) + self.projection.backward(d)

    def describe(self):
        info = super().describe()
        info["main"] = self.main.describe()
        info["projection"] = self.projection.describe()
        return info


class Concat(Layer):
    """Run branches on the same input and stack their outputs along channels."""

    kind = "concat"

    def __init__(self, branches, name="concat"):
        super().__init__(name)
        self.branches = list(branches)

    def params(self):
        return [p for b in self.branches for p in b.params()]

    def forward(self, x):
        outs = [b.forward(x) for b in self.branches]
        self._splits = np.cumsum([o.shape[1] for o in outs])[:-1]
        return np.concatenate(outs, axis=1)

    def backward(self, dout):
        parts = np.split(dout, self._splits, axis=1)
        dx = None
        for branch, d in zip(self.branches, parts):
            g = branch.backward(np.ascontiguousarray(d))
            dx = g if dx is None else dx + g
        return dx

    def describe(self):
        info = super().describe()
        info["branches"] = [b.describe() for b in self.branches]
        return info


class LSTM(Layer):
    """One LSTM layer mapping a (t, B, F) sequence to (t, B, H) hidden states."""

    kind = "lstm"
    out_batch_axis = 1

    def __init__(self, n_in, n_hidden, rng=None, name="lstm", dtype=np.float32):
        super().__init__(name)
        rng = np.random.default_rng(0) if rng is None else rng
        fan_in = n_in + n_hidden
        self.n_hidden = n_hidden
        self.w_x = Param(f"{name}.w_x", uniform_init(rng, (n_in, 4 * n_hidden), fan_in, dtype))
        self.w_h = Param(f"{name}.w_h", uniform_init(rng, (n_hidden, 4 * n_hidden), fan_in, dtype))
        self.bias = Param(f"{name}.bias", np.zeros(4 * n_hidden, dtype))

    def params(self):
        return [self.w_x, self.w_h, self.bias]

    def forward(self, xs):
        hs, _, _, self._cache = F.lstm_forward(xs, self.w_x.value, self.w_h.value, self.bias.value)
        return hs

    def backward(self, dhs):
        dxs, dwx, dwh, db, _, _ = F.lstm_backward(dhs, self._cache)
        self.w_x.grad += dwx
        self.w_h.grad += dwh
        self.bias.grad += db
        return dxs


class LastStep(Layer):
    """Select the final element of a (t, B, H) sequence."""

    kind = "last_step"

    def forward(self, xs):
        self._shape = xs.shape
        return xs[-1]

    def backward(self, dout):
        d = np.zeros(self._shape, dtype=dout.dtype)
        d[-1] = dout
        return d
