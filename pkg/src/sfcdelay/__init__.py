"""Queueing-network delay simulation, learned delay distributions, and bounds.

The package splits into six pieces: ``netsim`` (discrete-event simulator of
multi-server FCFS networks), ``analytic`` (closed-form conditional delay
mixture), ``mixstats`` (Gaussian-mixture statistics and probabilistic
bounds), ``mdn`` (from-scratch mixture density network), ``control``
(deadline-based admission control), and ``evalkit`` (calibration and error
metrics). ``cli`` wires them into the ``sfcdelay`` command.
"""

from .analytic import DelayMoments, delay_moments, gmm_approximation, propagate_queue_lengths, scv_bound
from .control import AdmissionPolicy, ThroughputReport, admit, run_admission_experiment
from .evalkit import ci_coverage, conditional_distribution_match, mse, violation_rates
from .mdn import (
    MdnArchitecture,
    MdnModel,
    TrainConfig,
    TrainResult,
    forward,
    load_model,
    nll_loss,
    save_model,
    train,
)
from .mixstats import (
    DelayBounds,
    GaussianMixture,
    cdf,
    confidence_interval,
    delay_bounds,
    lower_bound,
    mmse,
    pdf,
    upper_bound,
)
from .netsim import (
    ArrivalProcess,
    CustomerRecord,
    GammaRenewal,
    Mmpp,
    NetworkSpec,
    Nhpp,
    RoutingDag,
    ServiceModel,
    StageSpec,
    build_topology,
    read_dataset,
    run_replications,
    run_simulation,
    sample_interarrival,
    write_dataset,
)

__version__ = "0.1.0"
