import struct

import numpy as np
import pytest

from lscipad.architectures import ArchKind, build, forward_scores, input_shape
from lscipad.errors import ConfigError, FormatError, TruncatedFileError
from lscipad.weights import dumps, load_weights, loads, save_weights


@pytest.mark.parametrize("kind", list(ArchKind), ids=lambda k: k.value)
def test_reload_reproduces_scores(kind, tmp_path):
    net = build(kind, 8, 8, 5, seed=3)
    save_weights(net, tmp_path / "w.lscw")
    other = load_weights(build(kind, 8, 8, 5, seed=99), tmp_path / "w.lscw")
    x = np.random.default_rng(0).random(input_shape(net, 3)).astype(np.float32)
    assert forward_scores(net, x).tobytes() == forward_scores(other, x).tobytes()
    assert dumps(other.state()) == (tmp_path / "w.lscw").read_bytes()


def test_layout():
    buf = dumps({"a": np.ones((2, 3), np.float32)})
    assert buf[:4] == b"LSCW"
    assert struct.unpack_from("<HI", buf, 4) == (1, 1)
    assert struct.unpack_from("<H", buf, 10) == (1,)
    assert buf[12:13] == b"a"
    assert struct.unpack_from("<B2I", buf, 13) == (2, 2, 3)
    assert len(buf) == 22 + 6 * 4


def test_corrupt_files():
    buf = dumps({"w": np.arange(4, dtype=np.float32)})
    with pytest.raises(FormatError):
        loads(b"XXXX" + buf[4:])
    with pytest.raises(FormatError):
        loads(buf[:4] + struct.pack("<H", 7) + buf[6:])
    with pytest.raises(FormatError):
        loads(buf + b"\0")
    for cut in (8, 12, len(buf) - 2):
        with pytest.raises(TruncatedFileError):
            loads(buf[:cut])


def test_wrong_network_is_rejected(tmp_path):
    save_weights(build("Lstm", 8, 8, 5), tmp_path / "w.lscw")
    with pytest.raises(ConfigError):
        load_weights(build("Lstm", 16, 16, 5), tmp_path / "w.lscw")
    with pytest.raises(ConfigError):
        load_weights(build("BaseN", 8, 8, 5), tmp_path / "w.lscw")
