"""Distributed optimization and games by interconnecting centralized blocks with consensus trackers."""

from .blocks import (AggregativeBlock, BlockParams, ConsensusBlock, ConstraintCoupledBlock, GameBlock, make_block,
                     run_centralized)
from .diagnostics import (build_error_coordinates, fit_linear_rate, lyapunov_cc, solve_cc_active_set,
                          solve_consensus_min, solve_game_linear)
from .estimators import CentralizedSolver, DistributedSolver
from .graph import Graph, erdos_renyi, metropolis_weights
from .interconnection import assemble, run, run_double_loop
from .problems import (AggregativeGame, AggregativeProblem, ConsensusProblem, ConstraintCoupledProblem,
                       generate_quadratic_cc)
from .trackers import Cascade, ExactAverage, PerturbedConsensus, PIDac, RAdmmDac

__version__ = "0.1.0"
