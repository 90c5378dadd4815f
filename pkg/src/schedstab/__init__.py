"""Schedule stability toolkit: difference measures between an initial and a
revised job-shop schedule, decay-base elicitation, event-driven repair and an
experiment harness."""

from .dynamics import (
    CancelJob,
    DueDateChange,
    FrozenPrefix,
    LocalSearch,
    MachineDown,
    NewJob,
    Regenerate,
    RightShift,
    RushJob,
    WeightChange,
    apply_event,
    dispatch_regenerate,
    initial_schedule,
    local_search_repair,
    right_shift_repair,
    simulate,
)
from .elicitation import HorizonStatement, PeriodStatement, i_from_horizon, i_from_period
from .measures import (
    InstabilityConfig,
    MeasureReport,
    PairedSchedules,
    closeness,
    combined_measure,
    delta_start,
    impact,
    instability,
    job_level_measure,
    lin_measure,
    pair,
    sequence_measure,
    wu_measure,
)
from .model import (
    Job,
    Operation,
    ProblemInstance,
    Schedule,
    completion_times,
    makespan,
    total_weighted_tardiness,
    validate,
)

__version__ = "0.1.0"
