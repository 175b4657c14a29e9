"""Synthetic dynamic-speckle captures.

The speckle field is the squared magnitude of a spatially Gaussian-filtered
complex Gaussian field.  The underlying field evolves as an AR(1) process
with per-frame correlation ``rho``: live fingers decorrelate quickly, overlay
attacks are almost static.  This reproduces only the property the
classifiers rely on (temporal decorrelation), not real LSCI optics.
"""

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from ..errors import ConfigError
from .manifest import Manifest, ManifestEntry
from .sample import Finger, Label, LsciSample, SampleMeta, Species, save_sample

CAPTURE_GEOMETRY = (64, 64, 1000)
N_DARK_FRAMES = 20
SENSOR_SEED = 0x15C1
MAX_CAPTURES = 3

# attack counts per species of the reference dataset
DESK_ATTACKS = {
    Species.CONDUCTIVE_PAPER: 11,
    Species.CONDUCTIVE_SILICONE: 62,
    Species.TRANSPARENCY: 26,
    Species.SILICONE_I: 13,
    Species.SILICONE_II: 79,
    Species.DRAGON_SKIN: 27,
}
DESK_BONA_FIDE = 400


@dataclass(frozen=True)
class SpeckleParams:
    corr_length: float = 2.0      # pixels, sigma of the Gaussian low-pass
    mean_intensity: float = 2000.0
    rho_bona_fide: float = 0.85
    rho_attack: float = 0.999
    read_noise: float = 20.0
    dark_level: float = 100.0
    dark_amplitude: float = 10.0

    def validate(self):
        for name in ("corr_length", "mean_intensity", "dark_level"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"speckle parameter {name} must be positive")
        for name in ("read_noise", "dark_amplitude"):
            if getattr(self, name) < 0:
                raise ConfigError(f"speckle parameter {name} must be non-negative")
        for name in ("rho_bona_fide", "rho_attack"):
            rho = getattr(self, name)
            if not 0 < rho <= 1:
                raise ConfigError(f"{name}={rho} outside (0, 1]")

    def to_dict(self):
        return asdict(self)


def default_counts(bona_fide=DESK_BONA_FIDE):
    counts = {Label.BONA_FIDE.value: bona_fide}
    counts.update({s.value: n for s, n in DESK_ATTACKS.items()})
    return counts


def _parse_class(name):
    if name == Label.BONA_FIDE.value:
        return Label.BONA_FIDE, None
    try:
        return Label.ATTACK, Species(name)
    except ValueError:
        raise ConfigError(f"unknown sample class {name!r}") from None


def _sensor_dark_field(h, w, params):
    rng = np.random.default_rng(SENSOR_SEED)
    field = ndimage.gaussian_filter(rng.standard_normal((h, w)), 4.0, mode="wrap")
    field /= max(np.abs(field).max(), 1e-12)
    return params.dark_level + params.dark_amplitude * field


def _filter_energy(h, w, sigma):
    delta = np.zeros((h, w))
    delta[0, 0] = 1.0
    return float(np.sum(ndimage.gaussian_filter(delta, sigma, mode="wrap") ** 2))


def synth_sample(label, species=None, geometry=(64, 64, 100), params=None, seed=0, meta=None):
    """Generate one capture of the requested class.

    ``rho = 1`` with ``read_noise = 0`` yields identical frames.
    """
    params = SpeckleParams() if params is None else params
    params.validate()
    label = Label(label)
    h, w, t = (int(v) for v in geometry)
    if min(h, w, t) < 1:
        raise ConfigError(f"bad geometry {geometry}")
    rho = params.rho_attack if label is Label.ATTACK else params.rho_bona_fide
    rng = np.random.default_rng(seed)

    innov = np.sqrt(max(1.0 - rho * rho, 0.0))
    z = np.empty((t, h, w), np.complex128)
    z[0] = (rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))) / np.sqrt(2)
    for k in range(1, t):
        noise = (rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))) / np.sqrt(2)
        z[k] = rho * z[k - 1] + innov * noise
    sigma = (0, params.corr_length, params.corr_length)
    field = (ndimage.gaussian_filter(z.real, sigma, mode="wrap")
             + 1j * ndimage.gaussian_filter(z.imag, sigma, mode="wrap"))
    intensity = np.abs(field) ** 2 * (params.mean_intensity / _filter_energy(h, w, params.corr_length))

    dark = _sensor_dark_field(h, w, params)
    frames = intensity + dark[None]
    if params.read_noise > 0:
        frames += rng.normal(0.0, params.read_noise, frames.shape)
    cube = np.clip(np.rint(frames), 0, 65535).astype(np.uint16).transpose(1, 2, 0)

    dark_avg = dark
    if params.read_noise > 0:
        dark_avg = dark + rng.normal(0.0, params.read_noise / np.sqrt(N_DARK_FRAMES), dark.shape)
    return LsciSample(np.ascontiguousarray(cube), dark_avg.astype(np.float32), meta)


def temporal_std(sample):
    """Mean over pixels of the per-pixel standard deviation across frames."""
    return float(sample.cube.astype(np.float64).std(axis=2).mean())


def plan_synth_manifest(counts, subjects, seed=0):
    """Metadata for a synthetic dataset, without generating any pixels.

    Samples are shuffled, then dealt round-robin over subjects; a subject's
    k-th sample goes to finger ``k % 6`` and capture ``k // 6``.
    """
    if subjects < 1:
        raise ConfigError("need at least one subject")
    classes = []
    for name, n in counts.items():
        if n < 0:
            raise ConfigError(f"negative count for {name}")
        classes += [_parse_class(name)] * int(n)
    fingers = list(Finger)
    capacity = subjects * len(fingers) * MAX_CAPTURES
    if len(classes) > capacity:
        raise ConfigError(f"{len(classes)} samples exceed the capacity of {subjects} subjects ({capacity})")
    order = np.random.default_rng(seed).permutation(len(classes))
    metas = []
    for j, idx in enumerate(order):
        label, species = classes[idx]
        k = j // subjects
        metas.append(SampleMeta(
            sample_id=f"s{j:05d}",
            subject_id=f"subj{j % subjects:03d}",
            finger=fingers[k % len(fingers)],
            label=label,
            species=species,
            capture_index=k // len(fingers),
        ))
    return metas


def make_synth_dataset(out_dir, counts=None, subjects=60, seed=0, geometry=(64, 64, 100), params=None):
    """Write one ``.lsc`` file per planned sample plus ``manifest.json``."""
    counts = default_counts() if counts is None else counts
    params = SpeckleParams() if params is None else params
    params.validate()
    metas = plan_synth_manifest(counts, subjects, seed)
    out_dir = Path(out_dir)
    (out_dir / "samples").mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(seed).spawn(len(metas))
    entries = []
    for meta, ss in zip(metas, seeds):
        rel = f"samples/{meta.sample_id}.lsc"
        sample = synth_sample(meta.label, meta.species, geometry, params, seed=ss, meta=meta)
        save_sample(sample, out_dir / rel)
        entries.append(ManifestEntry(rel, meta))
    manifest = Manifest(entries, root=out_dir)
    manifest.save(out_dir / "manifest.json")
    return manifest
