"""Numerical toolkit for infinitely divisible laws given by polar Lévy triplets.

The package represents a law by its generating triplet (Gaussian part, polar
Lévy measure, drift), applies weighted-integral mapping kernels to cumulants,
triplets and radial densities, tests membership in the five classical
monotonicity classes, inverts completely monotone tilted tails into stable
mixtures, and validates everything against Monte Carlo simulation.
"""

__version__ = "0.1.0"

from .errors import DomainError, LevyMapsError, QuadratureError, SchemaError
from .measures import (
    AtomicRadial,
    Direction,
    GridRadial,
    LevyTriplet,
    PolarLevyMeasure,
    PowerLawRadial,
    Ray,
    StableLaw,
    TemperedRadial,
    cumulant_eval,
    default_grid,
    h_function,
    log_moment,
    normalize_polar,
    radial_tail,
    triplet_from_dict,
    triplet_to_dict,
)
from .kernels import MappingKernel, builtin_kernel, f_eval, kernel_from_p, kernel_from_spec
from .transforms import (
    CumulantFn,
    iterate_map,
    map_cumulant,
    map_radial,
    map_triplet,
    mapped_cumulant_fn,
    verify_commutativity,
)
from .classify import (
    ClassVerdict,
    MonotonicityReport,
    check_completely_monotone,
    check_decreasing,
    check_domain,
    classify_distribution,
    nested_level,
    verify_log_moment_identity,
)
from .stable import (
    BernsteinFit,
    GammaMeasure,
    bernstein_invert,
    gamma_extract,
    linf_reconstruct,
    make_stable,
    stable_fixed_point_check,
)
from .montecarlo import SimConfig, compare_cf, sample_increment, sample_increments, sample_integral

__all__ = [name for name in dir() if not name.startswith("_")]
