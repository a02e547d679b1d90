"""Level-set density clustering with data-driven bandwidth selection."""

from .bootstrap import BootstrapRequest, bootstrap_clusters, sample_conditional
from .cluster_graph import (Clustering, NeighborhoodGraph, assign_point, build_graph,
                            connected_components, extract_clusters)
from .dataset import PointSet, SplitPlan, load_points, save_points, split
from .errors import (InfeasibleLevelError, InvalidArgument, NumericalSupportError,
                     ParseError, SelectionError)
from .evaluation import (NoiseCurve, RiskReport, excess_mass_of, level_set_risk,
                         min_intercluster_distance, misassignment_fraction, noise_exponent_curve)
from .excess_mass import (ExcessMassCurve, adaptive_grid, estimate_volume,
                          select_bandwidth_excess_mass)
from .kde import DensityEstimate, fit, sample_from_kde
from .kernels import KernelSpec, kernel_value
from .stability import (InstabilityCurve, default_grid, instability_at, instability_curve,
                        select_bandwidth_stability)
from .synthetic import (SyntheticSpec, gaussian, generate, geometric_density, level_set_member, named_spec,
                        sharp_clusters, stick_spiral, two_moons, two_uniform)

__version__ = "0.1.0"
