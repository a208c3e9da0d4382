"""Numerical laboratory for rescaling prequantum line bundle sections.

Sections of tensor powers L^k over explicit Kahler backends (flat tori,
the Fubini-Study line) are pulled back through rescaled geodesic charts
and radially flat unitary gauges to sections over the unit ball, where
convergence to holomorphic sections of the Gaussian model bundle and the
transversality / symplecticity / curvature consequences can be measured.
"""

from .backends import (
    CP1Backend,
    SectionFamily,
    TorusBackend,
    cp1_backend,
    cp1_section,
    parallel_transport,
    theta_product_section,
    theta_section,
)
from .diagnostics import (
    DiagnosticsReport,
    ZeroLocus,
    cm_norm,
    curvature_estimate,
    symplectic_margin,
    transversality_margin,
    zero_locus,
)
from .geometry import BallDomain, ConnectionField, GridSection
from .model import (
    bargmann_section,
    covariant_derivative,
    curvature_of,
    dbar_defect,
    dbar_operator,
    model_connection,
    model_connection_field,
    radial_flatness_defect,
    unweight,
)
from .renormalize import (
    Chart,
    LimitCandidate,
    RadialGauge,
    build_chart,
    limit_extract,
    pullback_connection,
    pullback_structure,
    radial_gauge,
    renormalize_section,
)

__version__ = "0.1.0"

__all__ = [
    "BallDomain",
    "CP1Backend",
    "Chart",
    "ConnectionField",
    "DiagnosticsReport",
    "GridSection",
    "LimitCandidate",
    "RadialGauge",
    "SectionFamily",
    "TorusBackend",
    "ZeroLocus",
    "bargmann_section",
    "build_chart",
    "cm_norm",
    "covariant_derivative",
    "cp1_backend",
    "cp1_section",
    "curvature_estimate",
    "curvature_of",
    "dbar_defect",
    "dbar_operator",
    "limit_extract",
    "model_connection",
    "model_connection_field",
    "parallel_transport",
    "pullback_connection",
    "pullback_structure",
    "radial_flatness_defect",
    "radial_gauge",
    "renormalize_section",
    "symplectic_margin",
    "theta_product_section",
    "theta_section",
    "transversality_margin",
    "unweight",
    "zero_locus",
]
