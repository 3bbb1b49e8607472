"""mu-stability certification: direct eigenvalue, graph, and cap routes."""

from .fem import (DiscMesh, EigenResult, build_disc_mesh, refine, assemble,
                  smallest_eigenpair, weighted_first_eigenvalue)
from .legendre import cap_eigenvalue, cap_colatitude, legendre_at
from .certify import (ChiField, GraphBounds, MeanCurvatureOracle,
                      StabilityCertificate, chi, chi_pde_residual,
                      graph_mu_bound, total_curvature_Q,
                      conformal_gauss_curvature, mu_stability_check,
                      barbosa_docarmo_certificate, stability_threshold_check,
                      grid_field_to_fn, zero_mean_curvature_oracle,
                      constant_mean_curvature_oracle)

__all__ = [n for n in dir() if not n.startswith("_")]
