"""Deterministic simulator for condensate tunnelling on a ring of wells."""

from .analysis import SpectralEstimate, crosscorr_lag, detect_sign_change, \
    dominant_frequency
from .config import (RunConfig, build_initial, build_options, build_params,
                     build_schedule, config_hash, parse_config,
                     serialize_config)
from .drives import (CouplingSchedule, bottleneck, constant_schedule,
                     conveyor_schedule, cut_link, resonance_frequency,
                     resonant_modulation, stop_modulation)
from .errors import (ConfigError, DegenerateScheduleWarning, DimensionError,
                     DivergenceError, NonUniformSamplingError, NoPeakError,
                     OutOfDomainError, ParameterError, PolarSingularityError,
                     RingBecError, RootNotFoundError, StalledTransferError,
                     StiffnessError, ValidityWarning, WindingUndefinedError)
from .integrator import (IntegratorOptions, Trajectory, integrate,
                         populations_at, resolve_feedback_durations,
                         step_rk4)
from .model import (ModelParams, check_state, energy, from_polar,
                    link_current, make_params, principal_value, rhs_complex,
                    rhs_polar, to_polar, total_atoms, winding_number)
from .scenarios import (ScanReport, SelfTrapInput, critical_imbalance_analytic,
                        critical_imbalance_simulated,
                        linearized_resonance_measured, run_conveyor,
                        run_persistent_current, run_small_amplitude,
                        selfconfine_residual)
from .states import (seeded_state, single_well_state, uniform_state,
                     winding_state)
from .trajectory_io import (TrajectoryTable, read_trajectory,
                            trajectory_columns, write_report,
                            write_trajectory)
from .version import __version__

__all__ = [name for name in dir() if not name.startswith("_")]
