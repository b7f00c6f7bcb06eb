"""Melnikov analysis of two-dimensional invariant manifolds in 3D flows.

Computes the leading-order time-varying displacement of 2D stable/unstable
manifolds of saddle points under small aperiodic perturbations, locates
transverse intersections of split heteroclinic manifolds, and integrates
leading-order lobe volumes; ships the classical and swirling spherical-vortex
fields as built-in validated models.
"""

__version__ = "0.1.0"

from .analysis import (
    ContourLine,
    ContourSet,
    LobeReport,
    MelnikovField,
    build_melnikov_grid,
    lobe_regions,
    lobe_volume,
    zero_contours,
)
from .charts import (
    ChartKind,
    HillChartClassical,
    HillChartSwirl,
    ManifoldChart,
    ShootingChart,
    Trajectory,
    chart_normal,
    generic_chart_from_saddle,
    hill_chart_classical,
    hill_chart_swirl,
    integrate,
    rk4_integrate,
)
from .errors import (
    ChartError,
    ConfigError,
    DegenerateNormalError,
    IntegrationError,
    Melnikov3DError,
    PoleSingularityError,
    QuadratureError,
    SaddleClassificationError,
)
from .fields import (
    FieldModel,
    HillClassicalField,
    HillSwirlField,
    PerturbationModel,
    RadialHarmonicPerturbation,
    SaddleCase,
    SaddleSpectrum,
    ZeroPerturbation,
    classify_saddle,
    get_field_model,
    get_perturbation,
)
from .geometry import (
    SphericalPoint,
    cartesian_to_spherical,
    mat3,
    scalar_triple,
    spherical_to_cartesian,
    spherical_vector_to_cartesian,
    triple_identity_residual,
    vec3,
    wedge,
)
from .melnikov import (
    MelnikovResult,
    displacement,
    melnikov_heteroclinic,
    melnikov_stable,
    melnikov_unstable,
    perturbed_surface_point,
)
from .oracle import DisplacementSample, OrderFit, fit_order, measure_displacement
from .quadrature import QuadratureSpec

__all__ = [
    "__version__",
    # geometry
    "vec3", "mat3", "wedge", "scalar_triple", "triple_identity_residual",
    "SphericalPoint", "spherical_to_cartesian", "cartesian_to_spherical",
    "spherical_vector_to_cartesian",
    # fields
    "FieldModel", "PerturbationModel", "SaddleCase", "SaddleSpectrum",
    "HillClassicalField", "HillSwirlField", "RadialHarmonicPerturbation",
    "ZeroPerturbation", "classify_saddle", "get_field_model", "get_perturbation",
    # charts
    "Trajectory", "integrate", "rk4_integrate", "ChartKind", "ManifoldChart",
    "HillChartClassical", "HillChartSwirl", "hill_chart_classical",
    "hill_chart_swirl", "ShootingChart", "generic_chart_from_saddle",
    "chart_normal",
    # melnikov
    "QuadratureSpec", "MelnikovResult", "melnikov_unstable", "melnikov_stable",
    "melnikov_heteroclinic", "displacement", "perturbed_surface_point",
    # analysis
    "MelnikovField", "build_melnikov_grid", "ContourSet", "ContourLine",
    "zero_contours", "LobeReport", "lobe_regions", "lobe_volume",
    # oracle
    "DisplacementSample", "OrderFit", "measure_displacement", "fit_order",
    # errors
    "Melnikov3DError", "ConfigError", "PoleSingularityError",
    "SaddleClassificationError", "IntegrationError", "ChartError",
    "QuadratureError", "DegenerateNormalError",
]
