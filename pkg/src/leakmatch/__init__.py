"""De-anonymization and uniqueness analysis of spatio-temporal mobility traces."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DiscretizationConfig,
    Event,
    GridCell,
    Leak,
    MobilityTrace,
    SpatioTemporalTuple,
    cell_center,
    coarsen,
    coarsen_leak,
    coarsen_trace,
    discretize_space,
    discretize_time,
    project,
    unproject,
)
from .boxes import BoundingBox, bounding_box, overlap  # noqa: E402
from .dataset import Dataset  # noqa: E402
from .matcher import (  # noqa: E402
    MatchReport,
    count_matches,
    estimate_rho,
    is_unique,
    match_leak,
    sample_leak,
    sample_nested_leaks,
)
