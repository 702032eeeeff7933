"""Sequential and asynchronous (Hogwild-style) Gibbs sampling on discrete factor graphs,
with exact oracles, influence and distance metrics, closed-form bounds and a
coupling-based mixing-time estimator."""
from .bounds import (BoundInputs, bound_general_bias_estimation, bound_hog_sparse_estimation,
                     bound_hogwild_bias, bound_mixing, bound_seq_sparse_estimation)
from .coupling import (CouplingRun, MixingEstimate, estimate_mixing_time, maximal_coupling_sample,
                       run_monotone_coupling_ising, tau_sweep)
from .delays import DelayModel, MaxEntDelaySpec, build_maxent_delay
from .distances import sparse_variation_distance, tv_distance
from .errors import *  # noqa: F401,F403
from .graph import (ExactDistribution, Factor, FactorGraph, VariableSpec, conditional_distribution,
                    energy, exact_distribution, marginal)
from .history import StateHistory
from .influence import InfluenceReport, ising_influence_bound, total_influence_exact
from .modelio import load_model, save_model
from .models import build_badmix_model, build_bias_example, build_ising, build_random_ising
from .rng import RngStream
from .samplers import run_hogwild_parallel, run_hogwild_simulated, run_multimodel, run_sequential
from .sinks import EmpiricalDistribution, SampleSink

__version__ = "0.1.0"
