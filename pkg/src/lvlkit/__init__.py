"""Barometric load-vertical-location estimation with known-vertical-location anchors."""

from .errors import LvlkitError
from .model import (
    Anthropometry,
    IntervalLabel,
    InsoleSample,
    InsoleStream,
    KvluPoint,
    Label,
    LvlTrace,
    PressureHeightModel,
    Region,
    Side,
    Source,
    WristSample,
    WristStream,
)

__all__ = [
    "LvlkitError",
    "Anthropometry",
    "IntervalLabel",
    "InsoleSample",
    "InsoleStream",
    "KvluPoint",
    "Label",
    "LvlTrace",
    "PressureHeightModel",
    "Region",
    "Side",
    "Source",
    "WristSample",
    "WristStream",
]

__version__ = "0.1.0"
