import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lscipad.data import LsciSample, Manifest, SampleMeta, make_synth_dataset  # noqa: E402

TINY_COUNTS = {"BonaFide": 12, "ConductivePaper": 3, "DragonSkin": 3, "SiliconeI": 3, "Transparency": 3}


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """24 small captures (32x32x12) over 6 subjects; manifest path returned."""
    out = tmp_path_factory.mktemp("tiny_ds")
    make_synth_dataset(out, TINY_COUNTS, subjects=6, seed=3, geometry=(32, 32, 12))
    return out / "manifest.json"


@pytest.fixture
def tiny_manifest(tiny_dataset):
    return Manifest.load_file(tiny_dataset)


def random_sample(rng, max_side=9, max_t=12, with_meta=True):
    h, w, t = (int(v) for v in rng.integers(1, [max_side + 1, max_side + 1, max_t + 1]))
    cube = rng.integers(0, 65536, (h, w, t), dtype=np.uint16)
    dark = rng.normal(100, 30, (h, w)).astype(np.float32)
    meta = SampleMeta(f"s{rng.integers(1e6)}", "subj000", "LeftIndex", "BonaFide") if with_meta else None
    return LsciSample(cube, dark, meta)


# ---- acceptance summary ---------------------------------------------------------------

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Callable ``(number, title, ok, detail)`` that logs one gate line and prints it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def log(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
        lines.append((number, line))
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
