"""Document text pipeline.

Perspective rectification of detected text boxes, grouping and reading
order over box geometry, CTC-style decoding of per-frame character
probabilities, and a hand-written attention seq2seq spelling corrector,
plus a synthetic data source that makes the whole chain verifiable
end to end.
"""

from . import corrector, ctc, formats, geometry, layout, pipeline, synth
from .errors import (
    DegenerateQuadError,
    DivergenceError,
    DoctextError,
    FormatError,
    InputError,
    VersionError,
)

__version__ = "0.1.0"

__all__ = [
    "corrector",
    "ctc",
    "formats",
    "geometry",
    "layout",
    "pipeline",
    "synth",
    "DoctextError",
    "InputError",
    "DegenerateQuadError",
    "FormatError",
    "VersionError",
    "DivergenceError",
    "__version__",
]
