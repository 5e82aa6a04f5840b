"""Capacitive imaging scan simulator with amplitude-phase fusion.

Simulates the full measurement chain of a scanned coplanar capacitive
probe: quasi-static field solve over a voxelized sample, induced-charge
sensing, charge-amplifier and lock-in demodulation models, and the
amplitude-phase fusion operators used to sharpen defect localization and
depth characterization.
"""

from .errors import (BoundaryConditionError, BoundsError, CapscanError, ConfigError,
                     ConvergenceError, CsvParseError, DegenerateRangeError,
                     DimensionMismatchError, GeometryError, PeriodAlignmentError,
                     ResolutionError, SamplingError)
from .geometry import (BoundaryConditions, DefectSpec, PermittivityGrid, Probe,
                       SampleSpec, build_grid, make_back_to_back, make_concentric)
from .solver import (EPSILON_0, InducedCharge, PotentialField, SensitivityMap,
                     conductor_charges, induced_charge, sensitivity_map,
                     solve_potential)
from .lockin import (Demodulation, NoiseModel, ReferenceSignal, TimeSeries,
                     charge_to_voltage, demodulate, synthesize)
from .scanner import (ScanImage, ScanPlan, ScanResult, SolverOptions, ingest_csv,
                      read_scan_csv, run_scan, write_scan_csv)
from .fusion import (FusionConfig, center_phase, crop_margin, fuse, fuse_delta,
                     fuse_delta_prime, fuse_scan, fuse_xi, fuse_xi_prime,
                     minmax_normalize, threshold)
from .analysis import (DefectReport, FitResult, LineProfile, compare_channels,
                       defect_footprints, line_profile, linear_fit, normalize_peaks,
                       peaks_per_defect, snr_db, voronoi_cells)
from .config import RunConfig, config_to_dict, parse_config, parse_config_dict

__version__ = "0.1.0"
