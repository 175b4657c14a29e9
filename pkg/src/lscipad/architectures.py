"""The five patch classifiers: BaseN, ResN, IncpN, Conv3 and Lstm.

2-d models read a patch as ``B x t x h x w`` (time as channels), Conv3 reads
``B x 1 x t x h x w`` and the LSTM reads a length-``t`` sequence of
``B x (h*w)`` frame vectors.  All end in a single sigmoid score per patch.
"""

import enum
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .nn.layers import (
    LSTM,
    Concat,
    Conv,
    Flatten,
    GlobalAvgPool,
    LastStep,
    Linear,
    MaxPool,
    ReLU,
    ResidualBlock,
    Sequential,
    Sigmoid,
)

SPATIAL_SWEEP = (8, 16, 32, 64)
TEMPORAL_SWEEP = (5, 10, 50, 100)
MAX_SPATIAL = 64
MAX_TEMPORAL = 1000

CHANNELS = (16, 16, 32, 32, 64, 64)
LSTM_HIDDEN = 100
INCEPTION_BRANCH = 8
CONV3_KERNEL = (5, 3, 3)


class ArchKind(str, enum.Enum):
    BASEN = "BaseN"
    RESN = "ResN"
    INCPN = "IncpN"
    CONV3 = "Conv3"
    LSTM = "Lstm"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for kind in cls:
            if kind.value.lower() == str(value).lower():
                return kind
        raise ConfigError(f"unknown architecture {value!r}; expected one of {[k.value for k in cls]}")

    @property
    def view(self):
        return {ArchKind.CONV3: "3d", ArchKind.LSTM: "sequence"}.get(self, "2d")


@dataclass(eq=False)
class Network:
    kind: ArchKind
    geometry: tuple
    body: Sequential
    seed: int = 0

    def params(self):
        return self.body.params()

    @property
    def n_params(self):
        return sum(p.size for p in self.params())

    def forward(self, x):
        return self.body.forward(x)[:, 0]

    def backward(self, dscores):
        return self.body.backward(dscores[:, None])

    def state(self):
        return {p.name: p.value.copy() for p in self.params()}

    def load_state(self, state):
        params = {p.name: p for p in self.params()}
        if set(params) != set(state):
            raise ConfigError("weight names do not match the network")
        for name, value in state.items():
            if params[name].value.shape != value.shape:
                raise ConfigError(f"shape mismatch for {name}: {value.shape} vs {params[name].value.shape}")
            params[name].value[...] = value


def _check_geometry(h, w, t):
    for name, v, hi in (("h", h, MAX_SPATIAL), ("w", w, MAX_SPATIAL), ("t", t, MAX_TEMPORAL)):
        if not isinstance(v, (int, np.integer)) or not 1 <= v <= hi:
            raise ConfigError(f"unsupported patch geometry: {name}={v!r} (must be 1..{hi})")


def _pool_positions(size, n_pools=3, floor=2):
    """Which of the pooling slots halve a dimension, skipping once it would drop below ``floor``."""
    out = []
    for _ in range(n_pools):
        if size // 2 >= floor:
            out.append(True)
            size //= 2
        else:
            out.append(False)
    return out, size


def _conv_stack_2d(t, h, w, rng, dtype):
    layers = []
    pools_h, fh = _pool_positions(h)
    pools_w, fw = _pool_positions(w)
    in_ch = t
    for i, out_ch in enumerate(CHANNELS):
        layers += [Conv(in_ch, out_ch, (3, 3), padding=1, rng=rng, name=f"conv{i + 1}", dtype=dtype),
                   ReLU(f"relu{i + 1}")]
        in_ch = out_ch
        if i % 2 == 1:
            window = (2 if pools_h[i // 2] else 1, 2 if pools_w[i // 2] else 1)
            if window != (1, 1):
                layers.append(MaxPool(window, name=f"pool{i // 2 + 1}"))
    return layers, in_ch * fh * fw


def _build_basen(t, h, w, rng, dtype):
    layers, n_feat = _conv_stack_2d(t, h, w, rng, dtype)
    return layers + [Flatten("flatten"), Linear(n_feat, 1, rng=rng, name="fc", dtype=dtype), Sigmoid("sigmoid")]


def _build_resn(t, h, w, rng, dtype):
    pools_h, fh = _pool_positions(h)
    pools_w, fw = _pool_positions(w)
    layers = []
    in_ch = t
    for b in range(3):
        out_ch = CHANNELS[2 * b]
        main = Sequential([
            Conv(in_ch, out_ch, (3, 3), padding=1, rng=rng, name=f"block{b + 1}.conv1", dtype=dtype),
            ReLU(f"block{b + 1}.relu1"),
            Conv(out_ch, out_ch, (3, 3), padding=1, rng=rng, name=f"block{b + 1}.conv2", dtype=dtype),
        ], name=f"block{b + 1}.main")
        proj = Conv(in_ch, out_ch, (1, 1), rng=rng, bias=False, name=f"block{b + 1}.proj", dtype=dtype)
        layers.append(ResidualBlock(main, proj, name=f"block{b + 1}"))
        window = (2 if pools_h[b] else 1, 2 if pools_w[b] else 1)
        if window != (1, 1):
            layers.append(MaxPool(window, name=f"pool{b + 1}"))
        in_ch = out_ch
    return layers + [Flatten("flatten"), Linear(in_ch * fh * fw, 1, rng=rng, name="fc", dtype=dtype),
                     Sigmoid("sigmoid")]


def _inception(in_ch, rng, name, dtype, n=INCEPTION_BRANCH):
    def conv(cin, k, label):
        return [Conv(cin, n, (k, k), padding=k // 2, rng=rng, name=f"{name}.{label}", dtype=dtype),
                ReLU(f"{name}.{label}.relu")]

    branches = [
        Sequential(conv(in_ch, 1, "b1x1"), name=f"{name}.branch1"),
        Sequential(conv(in_ch, 1, "b3x3_reduce") + conv(n, 3, "b3x3"), name=f"{name}.branch2"),
        Sequential(conv(in_ch, 1, "b5x5_reduce") + conv(n, 5, "b5x5"), name=f"{name}.branch3"),
        Sequential([MaxPool((3, 3), stride=1, padding=1, name=f"{name}.pool")] + conv(in_ch, 1, "pool_proj"),
                   name=f"{name}.branch4"),
    ]
    return Concat(branches, name=name), 4 * n


def _build_incpn(t, h, w, rng, dtype):
    layers = [Conv(t, 16, (3, 3), padding=1, rng=rng, name="stem", dtype=dtype), ReLU("stem.relu")]
    ch = 16
    for i in range(2):
        module, ch = _inception(ch, rng, f"inception{i + 1}", dtype)
        layers.append(module)
    return layers + [GlobalAvgPool("gap"), Linear(ch, 1, rng=rng, name="fc", dtype=dtype), Sigmoid("sigmoid")]


def _build_conv3(t, h, w, rng, dtype):
    kd = CONV3_KERNEL[0]
    pools_d, fd = _pool_positions(t, floor=kd)
    pools_h, fh = _pool_positions(h)
    pools_w, fw = _pool_positions(w)
    layers = []
    in_ch = 1
    for i, out_ch in enumerate(CHANNELS):
        layers += [Conv(in_ch, out_ch, CONV3_KERNEL, padding=(kd // 2, 1, 1), rng=rng,
                        name=f"conv{i + 1}", dtype=dtype),
                   ReLU(f"relu{i + 1}")]
        in_ch = out_ch
        if i % 2 == 1:
            j = i // 2
            window = tuple(2 if p[j] else 1 for p in (pools_d, pools_h, pools_w))
            if window != (1, 1, 1):
                layers.append(MaxPool(window, name=f"pool{j + 1}"))
    return layers + [Flatten("flatten"), Linear(in_ch * fd * fh * fw, 1, rng=rng, name="fc", dtype=dtype),
                     Sigmoid("sigmoid")]


def _build_lstm(t, h, w, rng, dtype):
    return [
        LSTM(h * w, LSTM_HIDDEN, rng=rng, name="lstm1", dtype=dtype),
        LSTM(LSTM_HIDDEN, LSTM_HIDDEN, rng=rng, name="lstm2", dtype=dtype),
        LastStep("last"),
        Linear(LSTM_HIDDEN, 1, rng=rng, name="fc", dtype=dtype),
        Sigmoid("sigmoid"),
    ]


_BUILDERS = {
    ArchKind.BASEN: _build_basen,
    ArchKind.RESN: _build_resn,
    ArchKind.INCPN: _build_incpn,
    ArchKind.CONV3: _build_conv3,
    ArchKind.LSTM: _build_lstm,
}


def build(kind, h, w, t, seed=0, dtype=np.float32):
    """Assemble a freshly initialised network for ``h x w x t`` patches."""
    kind = ArchKind.parse(kind)
    _check_geometry(h, w, t)
    rng = np.random.default_rng(seed)
    layers = _BUILDERS[kind](t, h, w, rng, dtype)
    return Network(kind, (h, w, t), Sequential(layers, name=kind.value), seed)


def input_shape(net, batch=1):
    h, w, t = net.geometry
    if net.kind.view == "2d":
        return (batch, t, h, w)
    if net.kind.view == "3d":
        return (batch, 1, t, h, w)
    return (t, batch, h * w)


def _check_view(net, x):
    h, w, t = net.geometry
    expected = input_shape(net, x.shape[1] if net.kind.view == "sequence" else x.shape[0])
    if x.shape != expected:
        raise ConfigError(f"{net.kind.value} expects input shaped {expected}, got {x.shape}")


def forward_scores(net, view):
    """Patch scores in [0, 1] for a view matching ``net.kind``.

    The layer caches are kept, so ``net.backward`` can follow directly.
    """
    if net.kind.view == "sequence" and isinstance(view, (list, tuple)):
        view = np.stack(view)
    x = np.asarray(view)
    _check_view(net, x)
    dtype = net.params()[0].value.dtype
    return net.forward(x.astype(dtype, copy=False))


def describe(net):
    """Layer-by-layer summary with output shapes and parameter counts."""
    dtype = net.params()[0].value.dtype
    net.forward(np.zeros(input_shape(net), dtype=dtype))
    layers = [layer.describe() for layer in net.body.layers]
    h, w, t = net.geometry
    return {
        "kind": net.kind.value,
        "geometry": {"h": h, "w": w, "t": t},
        "layers": layers,
        "total_params": net.n_params,
    }


def describe_json(net):
    return json.dumps(describe(net), indent=2)


def count_layers(summary, layer_type):
    """Count layers of ``layer_type`` anywhere in a :func:`describe` tree."""
    def walk(node):
        n = int(node.get("type") == layer_type)
        for key in ("layers", "branches"):
            for child in node.get(key, []):
                n += walk(child)
        for key in ("main", "projection"):
            if key in node:
                n += walk(node[key])
        return n

    return sum(walk(layer) for layer in summary["layers"])
