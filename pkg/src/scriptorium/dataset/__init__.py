from .manifest import COLUMNS, LineRecord, ManifestError, load_manifest, write_manifest
from .splits import PARTITIONS, SplitError, SplitManifest, choose_separate_codices, make_splits
from .synth import (
    CodexLook,
    ScribeStyle,
    SynthConfig,
    class_names,
    codex_ids,
    codex_look,
    generate_synthetic,
    make_alphabet,
    make_styles,
    render_line,
)
