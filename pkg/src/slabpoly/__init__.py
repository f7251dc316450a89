"""Random slab polytopes approximating the Euclidean ball."""

__version__ = "0.1.0"

from .geometry import (  # noqa: E402
    ApproxParams,
    BallGeometry,
    alpha,
    alpha_asymptotic,
    alpha_tail_lower_bound,
    ball_log_volume,
    cap_integral,
    cap_leading_term,
    membership_log_prob,
    slab_width,
)
from .expectation import (  # noqa: E402
    ExpectationBreakdown,
    RateConstants,
    expected_inner_deficit,
    expected_outer_excess,
    expected_sym_diff,
    optimize_width,
    rate_constants,
)
from .montecarlo import (  # noqa: E402
    Estimate,
    SlabPolytope,
    estimate_alpha,
    estimate_surface_deviation,
    estimate_sym_diff,
    estimate_sym_diff_parts,
    mean_sym_diff,
    mean_sym_diff_parts,
    radial,
    realize,
    sample_direction,
)
from .bounds import (  # noqa: E402
    BoundsReport,
    bounds_report,
    lagrange_objective,
    lower_bound_volume,
    regime_sweep,
    upper_bound_surface,
    upper_bound_volume,
)
