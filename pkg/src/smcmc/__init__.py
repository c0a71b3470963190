"""Sequential MCMC: parallel time-inhomogeneous chains tracking a stream of posteriors."""

from .diagnostics import cross_chain_acf, select_epsilon, single_chain_acf
from .engine import (
    ConfigurationError,
    Ensemble,
    KernelSuite,
    ObservationError,
    ParameterVector,
    RunReport,
    ScheduleConfig,
    StepRecord,
    advance_step,
    init_ensemble,
    run_stream,
    uniform_batches,
)

__version__ = "0.1.0"
