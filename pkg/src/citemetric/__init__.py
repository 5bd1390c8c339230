"""Field-normalized citation indicators and their evaluation against quality scores."""

from .model import (
    Formula,
    IndicatorId,
    RefSet,
    Scheme,
    Source,
    WorkRecord,
    enumerate_valid_indicators,
    format_indicator_id,
    parse_indicator_id,
)

__version__ = "0.1.0"
