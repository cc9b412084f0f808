"""Distribution prices, DER scheduling and transformer aging."""

from ._core import (
    DlmpError,
    DimensionError,
    Feeder,
    Fleet,
    InfeasibleError,
    SchemaError,
    TopologyError,
    __version__,
    aging_factor,
    build_fleet,
    comparison_table,
    feeder_from_json,
    load_feeder,
    run_option,
    simulate_top_oil,
    solve_dispatch,
    synthesize_feeder,
)

OPTIONS = ("BaU", "ToU", "PQ-opt", "Full-opt")


def synthetic_feeder(nodes=307, seed=7):
    """Synthetic feeder loaded and converted to per unit."""
    return feeder_from_json(synthesize_feeder(nodes, seed))


__all__ = [
    "DlmpError",
    "DimensionError",
    "Feeder",
    "Fleet",
    "InfeasibleError",
    "OPTIONS",
    "SchemaError",
    "TopologyError",
    "__version__",
    "aging_factor",
    "build_fleet",
    "comparison_table",
    "feeder_from_json",
    "load_feeder",
    "run_option",
    "simulate_top_oil",
    "solve_dispatch",
    "synthesize_feeder",
    "synthetic_feeder",
]
