"""Python bindings for the facmap C++ core."""

from ._core import (  # noqa: F401
    DomainError,
    IoError,
    NotFoundError,
    TILE_PIXELS,
    TILE_SIDE_M,
    ValidationError,
    dedup,
    detect_world,
    enumerate_tiles,
    generate_world,
    haversine_km,
    heuristic_score,
    merge,
    metrics,
    project,
    render_tile,
    select_threshold,
    tile_centroid,
    tile_of,
    unproject,
)

__version__ = "0.1.0"
