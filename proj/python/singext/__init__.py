"""Singular extensions of manifold-valued boundary maps."""

from ._core import (
    Manifold,
    SingextError,
    SurfaceMap,
    __version__,
    assemble,
    circle_map,
    cli,
    diagnose,
    energy_report,
    federer_reach,
    gagliardo_energy,
    growth_fit,
    hyperbolic_disk_area,
    line_map,
    load_manifold,
    make_manifold,
    read_map,
    set_thread_count,
    transport_map,
    transport_points,
    warped_admissible,
    write_map,
)

__all__ = [
    "Manifold",
    "SingextError",
    "SurfaceMap",
    "__version__",
    "assemble",
    "circle_map",
    "cli",
    "diagnose",
    "energy_report",
    "federer_reach",
    "gagliardo_energy",
    "growth_fit",
    "hyperbolic_disk_area",
    "line_map",
    "load_manifold",
    "make_manifold",
    "read_map",
    "set_thread_count",
    "transport_map",
    "transport_points",
    "warped_admissible",
    "write_map",
]
