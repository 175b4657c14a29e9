"""Versioned flat binary for network weights.

Layout (little-endian)::

    b"LSCW" | version u16 | entry count u32
    per entry: name length u16 | name utf-8 | ndim u8 | dims u32 * ndim
    float32 payload of every entry, in table order
"""

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, TruncatedFileError

MAGIC = b"LSCW"
VERSION = 1


def dumps(state):
    table = [MAGIC, struct.pack("<HI", VERSION, len(state))]
    payload = []
    for name, value in state.items():
        raw = name.encode("utf-8")
        table.append(struct.pack("<H", len(raw)) + raw)
        table.append(struct.pack("<B", value.ndim) + struct.pack(f"<{value.ndim}I", *value.shape))
        payload.append(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return b"".join(table + payload)


def loads(buf):
    def take(fmt, pos):
        size = struct.calcsize(fmt)
        if pos + size > len(buf):
            raise TruncatedFileError("weight file ends inside its shape table")
        return struct.unpack_from(fmt, buf, pos), pos + size

    if buf[:4] != MAGIC:
        raise FormatError(f"bad weight-file magic {buf[:4]!r}")
    (version, count), pos = take("<HI", 4)
    if version != VERSION:
        raise FormatError(f"unsupported weight-file version {version}")
    entries = []
    for _ in range(count):
        (n,), pos = take("<H", pos)
        if pos + n > len(buf):
            raise TruncatedFileError("weight file ends inside a parameter name")
        name = buf[pos:pos + n].decode("utf-8")
        pos += n
        (ndim,), pos = take("<B", pos)
        shape, pos = take(f"<{ndim}I", pos)
        entries.append((name, shape))
    state = {}
    for name, shape in entries:
        size = int(np.prod(shape)) * 4
        if pos + size > len(buf):
            raise TruncatedFileError(f"weight payload for {name} is truncated")
        state[name] = np.frombuffer(buf, "<f4", int(np.prod(shape)), pos).reshape(shape).astype(np.float32)
        pos += size
    if pos != len(buf):
        raise FormatError("trailing bytes after weight payload")
    return state


def save_weights(net, path):
    Path(path).write_bytes(dumps(net.state()))


def load_weights(net, path):
    net.load_state(loads(Path(path).read_bytes()))
    return net
