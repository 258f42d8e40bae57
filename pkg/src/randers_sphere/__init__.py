"""Randers spheres by navigation: geodesics, isoparametric functions and
their families for F_Q on S^n with wind V = Qx."""

from .skew import InadmissibleGenerator, SkewGenerator, flow, killing_field, mat_exp, standard_form, validate_admissible
from .metric import DegeneratePoint, ScalarField, dual_norm, iso_system_lhs, metric_eval, sphere_gradient, sphere_laplacian
from .cartan_munzner import CliffordQuadric, CMReport, GenericPolynomial, LinearCM, cm_check, grad_E, laplacian_E
from .geodesics import (
    ClosednessReport, GeodesicSpec, classify_closedness, el_residual, geodesic_eval,
    geodesic_velocity, s2_geodesic, self_intersections,
)
from .isoparametric import (
    GeneralZeta, IsoFunction, IsoReport, PsiInversionError, general_zeta, iso_eval, iso_verify,
    psi_forward, psi_inverse, zeta, zeta_inv,
)
from .families import (
    FamilySnapshot, LevelSample, family_snapshot, focal_rank_test, focal_submanifolds,
    sample_level, tube_map,
)

__version__ = "0.1.0"
