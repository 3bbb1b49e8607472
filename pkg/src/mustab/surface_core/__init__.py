"""Surface patches over the unit disc and their pointwise geometric data."""

from .grid import (ParameterGrid, build_grid, integrate, d_du, d_dv,
                   laplacian5, interior_max, interior_l2, convergence_order)
from .surfaces import (ImmersionPatch, catalog, CATALOG_NAMES,
                       patch_from_expressions, patch_from_config)
from .frames import (NormalFrame, GramSchmidtField, PreferredField,
                     RotatedField, gram_schmidt_frame, preferred_frame,
                     rotated_frame, parallel_frame, frame_on_grid,
                     frame_orthonormality_residual, holonomy_defect,
                     FRAME_TOL, TORSION_TOL)
from .fields import (MetricData, ShapeTensor, TorsionField, CurvatureSummary,
                     ChristoffelSymbols, SurfaceAnalysis, metric, shape_tensor,
                     torsion, max_torsion, curvatures, conformal_curvatures,
                     christoffel, total_torsion, analyze, require_conformal)

__all__ = [n for n in dir() if not n.startswith("_")]
