"""Partitioned parallel MCMC: explore, partition the state space, run restricted chains, reweight."""

from .config import ExperimentConfig, load_config
from .orchestrator import EstimateReport, run_algorithm1, run_naive, run_pt_baseline
from .targets import GaussianMixture, SShape, build_target, cycle_walk

__all__ = [
    "ExperimentConfig", "load_config", "EstimateReport", "run_algorithm1", "run_naive",
    "run_pt_baseline", "GaussianMixture", "SShape", "build_target", "cycle_walk",
]
