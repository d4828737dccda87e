"""Random covering sets generated by Cantor-type measures."""

from .covering import (CoveringRealization, geometric_blocks, limsup_approx,
                       multiplicity_profile, realize, union_range)
from .energy import (DiagnosticConfig, EnergyReport, MeasureView, capacity_lower_bound,
                     energy_divergence_diagnostic, frostman_energy_check,
                     mass_divergence_diagnostic, mutual_energy, restricted_normalized,
                     t_energy, t_potential)
from .errors import (ConstructionDegenerate, ExtrapolationRefused, InvalidParameter,
                     NoMassAboveThreshold, PrecisionNotReached, RandCoverError,
                     UndefinedExponent, ZeroMeasureRestriction)
from .estimators import (DimensionFit, LocalDimReport, SpectrumCurve, analytic_spectrum,
                         box_count, box_dimension_fit, conjecture_sides, delta_functionals,
                         limsup_dimension, lipschitz_hull, local_dims)
from .harness import ExperimentConfig, RunManifest, report, run_experiment, triangle_sweep
from .intervals import IntervalUnion
from .measures import (CantorScheme, LevelSpec, ball_mass, build_lebesgue,
                       build_middle_cantor, build_oscillating_cantor, build_spaced_cantor,
                       frostman_fit, interval_mass, sample_addresses, sample_points,
                       scale_scheme)
from .radii import (ExponentEstimate, RadiiSequence, block_radii, critical_exponents,
                    explicit_radii, load_radii, power_radii)

__version__ = "0.1.0"
