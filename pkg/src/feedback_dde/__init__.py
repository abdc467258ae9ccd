"""Positive periodic solutions of cyclic feedback delay systems.

Model definition, a-priori bounds with a sampled degree certificate, a
method-of-steps integrator and a period-map search for the periodic orbit.
"""

from .bounds import (
    BoundsBox,
    Certificate,
    compute_bounds,
    extremum_over_period,
    homotopy_scan,
    miranda_certificate,
    phi,
    phi_root,
)
from .dde import HistorySegment, Trajectory, extract_segment, integrate, integrate_function, rhs
from .model import (
    DecaySpec,
    ModelSpec,
    Production1Spec,
    Production2Spec,
    TimeProfile,
    eval_b,
    eval_production,
    invert_b,
    preset_testosterone,
)
from .periodic import PeriodicOrbit, box_containment, find_periodic, period_map, residual
from .validation import ValidationReport, check_conditions

__version__ = "0.1.0"
