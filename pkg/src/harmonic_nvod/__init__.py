"""Exact schedules and client simulation for harmonic-family NVOD broadcasting."""

from .core import (
    BroadcastSchedule,
    ParamError,
    Ratio,
    Transmission,
    VideoParams,
    harmonic,
    make_params,
    schedule_validate,
)
from .schemes import (
    aqhb_matrix,
    ahb_problematic,
    build,
    build_ahb,
    build_aqhb,
    build_chb,
    build_hb,
    build_qhb,
    qhb_fragment_index,
)
from .client_sim import (
    PlaybackPolicy,
    availability_curve,
    default_policy,
    earliest_feasible_start,
    simulate_client,
    sweep_arrivals,
)

__version__ = "0.1.0"
