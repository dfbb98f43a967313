"""Decision-diagram searches for the sequence ordering problem."""

from .diagram import RootState, build_initial_relaxation, build_width_one, shortest_path
from .filtering import FilterConfig, FilterContext
from .instance import (
    INFEASIBLE,
    SopFormatError,
    SopInstance,
    format_tsplib_sop,
    from_matrix,
    load_sop,
    must_precede,
    parse_tsplib_sop,
    random_instance,
)
from .peel import peel
from .relaxation import refine
from .restriction import RestrictedResult, build_restricted
from .search import (
    BoundEvent,
    SearchResult,
    SolverConfig,
    branch_and_bound,
    peel_and_bound,
    solve,
)

__version__ = "0.1.0"
