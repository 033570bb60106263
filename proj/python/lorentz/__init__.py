"""Observer-based injectivity radius, null cone and cone volume analyses."""

from ._core import (
    AnalysisError,
    ChartError,
    Error,
    MetricSpec,
    ParseError,
    SpecError,
    builtin,
    builtin_names,
    cone_graph,
    conjugate_radius,
    exp_jacobian,
    exp_map,
    expression_document,
    geodesic,
    injectivity_radius,
    load_spec,
    model_volume,
    parse_spec,
    ratio_curve,
)

__all__ = [name for name in dir() if not name.startswith("_")]
