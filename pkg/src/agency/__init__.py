"""Menu-auction toolkit: build truthful bidding profiles, certify
truthful equilibria, audit the assumptions behind the certificates, and
test allocations for efficiency."""

from .agent import AgentChoice, OutsideOption, argmax_set, outside_option
from .assumptions import (
    BatteryRow,
    StructureProfile,
    ValidityReport,
    assumption_battery,
    audit_game,
    check_conflict,
    check_deep_pockets,
    check_monotonicity,
    check_small_externalities,
    classify_structure,
    sample_feasible,
    validity_report,
)
from .catalog import (
    ALIASES,
    BATTERY,
    Benchmark,
    ClosedForm,
    GameBundle,
    battery_games,
    closed_form_candidate,
    export_corpus,
    finite_variant,
    get_game,
    names,
    public_good_stage,
)
from .efficiency import DominanceWitness, check_efficiency, frontier_sample
from .equilibrium import (
    Candidate,
    OracleEquilibrium,
    OracleResult,
    SolveResult,
    VerifyReport,
    candidate_at,
    enumerate_equilibria_small,
    solve_truthful,
    truthful_in_best_response,
    verify_truthful_equilibrium,
)
from .expr import EvalError, ParseError, free_names, parse, to_source
from .gamefile import (
    load_candidate,
    load_candidate_file,
    load_game,
    load_game_file,
    save_candidate,
    save_game,
)
from .games import (
    ActionSpace,
    ActionSymmetry,
    Allocation,
    BidBounds,
    BiddingProfile,
    GameError,
    GameSpec,
    Grid,
    action_grid,
    adapt_private,
    build_profile,
    evaluate,
    is_feasible_pair,
    make_allocation,
    profile_utilities,
)
from .reports import CheckReport, jsonable
from .truthful import (
    MonotonicityViolation,
    TruthfulBuild,
    is_truthful,
    solve_phi,
    solve_phi_at,
    truthful_profile,
    truthful_response,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
