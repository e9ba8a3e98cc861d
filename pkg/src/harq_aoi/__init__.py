"""AoI-optimal HARQ blocklength schedules via sequential differential optimization."""

from .ack_model import AckModel, ack_prob, ack_prob_deriv, load_table_model
from .service_time import (
    Schedule,
    ServiceTimeDist,
    build_dist,
    moment_partials,
    moments,
    rho_zero_wait,
)
from .sdo import (
    SdoConfig,
    SdoSolution,
    next_blocklength,
    p_lambda,
    rho_of_n1,
    round_schedule,
    solve,
    solve_sequence,
)
from .waiting import WaitingSolution, epoch_moments, q_eta, solve_gamma
from .baselines import BaselineResult, fr_no_replace_aoi, fr_replace_aoi, iir_aoi
from .simulator import FrReplaceScheme, SimConfig, SimResult, simulate

__version__ = "0.1.0"

__all__ = [
    "AckModel",
    "ack_prob",
    "ack_prob_deriv",
    "load_table_model",
    "Schedule",
    "ServiceTimeDist",
    "build_dist",
    "moments",
    "moment_partials",
    "rho_zero_wait",
    "SdoConfig",
    "SdoSolution",
    "next_blocklength",
    "solve_sequence",
    "p_lambda",
    "rho_of_n1",
    "solve",
    "round_schedule",
    "WaitingSolution",
    "epoch_moments",
    "q_eta",
    "solve_gamma",
    "BaselineResult",
    "iir_aoi",
    "fr_no_replace_aoi",
    "fr_replace_aoi",
    "SimConfig",
    "SimResult",
    "FrReplaceScheme",
    "simulate",
]
