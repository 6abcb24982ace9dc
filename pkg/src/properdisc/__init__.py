"""Finite-stage proper holomorphic discs in C², built by boundary lifting and
certified stage by stage on refinement grids."""

__version__ = "0.1.0"

from .corepoly import Check, ConformalMap, PlanarDomain, PolyMap, riemann_map  # noqa: E402
from .levigeom import (  # noqa: E402
    critical_system_solve,
    levi_chart,
    levi_polynomial,
    lifting_radius,
    rho_cone,
)
from .liftengine import LiftCertificate, LiftError, lift_step_cone, lift_step_levi, push_boundary  # noqa: E402
from .conedisc import StageSequence, build_proper_cone_disc, cross_critical_level, falsify_c_ge_1  # noqa: E402
from .tubedisc import build_axis_avoiding_disc, disc_through_point, lift_step_tube, model_disc  # noqa: E402
from .boundarylab import cluster_sample, fatou_scan, nevanlinna_T, proper_pair, range_density  # noqa: E402

__all__ = [
    "Check", "ConformalMap", "PlanarDomain", "PolyMap", "riemann_map",
    "critical_system_solve", "levi_chart", "levi_polynomial", "lifting_radius", "rho_cone",
    "LiftCertificate", "LiftError", "lift_step_cone", "lift_step_levi", "push_boundary",
    "StageSequence", "build_proper_cone_disc", "cross_critical_level", "falsify_c_ge_1",
    "build_axis_avoiding_disc", "disc_through_point", "lift_step_tube", "model_disc",
    "cluster_sample", "fatou_scan", "nevanlinna_T", "proper_pair", "range_density",
    "__version__",
]
