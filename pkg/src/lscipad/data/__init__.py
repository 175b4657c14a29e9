from .manifest import Manifest, ManifestEntry
from .preprocess import preprocess
from .sample import (
    HEADER_SIZE,
    Finger,
    Label,
    LsciSample,
    SampleMeta,
    Species,
    file_size,
    from_bytes,
    load_sample,
    save_sample,
    to_bytes,
)
from .synth import (
    DESK_ATTACKS,
    SpeckleParams,
    default_counts,
    make_synth_dataset,
    plan_synth_manifest,
    synth_sample,
    temporal_std,
)
