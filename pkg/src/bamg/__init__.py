"""Bootstrap algebraic multigrid for stationary vectors of Markov chains."""

from .chains import (ChainProblem, gen_planar_graph, gen_tandem_queue, gen_uniform_network,
                     load_matrix_market, strip_self_transitions, validate)
from .hierarchy import Hierarchy, Level, operator_complexity
from .kernels import BACKEND
from .krylov import KrylovParams, parnoldi_solve, pgmres_solve, vcycle_apply
from .mle import BootstrapSetup, MleParams, run_setup
from .sparse import CfPartition, SparseMatrix

__all__ = [
    "BACKEND", "BootstrapSetup", "CfPartition", "ChainProblem", "Hierarchy", "KrylovParams",
    "Level", "MleParams", "SparseMatrix", "gen_planar_graph", "gen_tandem_queue",
    "gen_uniform_network", "load_matrix_market", "operator_complexity", "parnoldi_solve",
    "pgmres_solve", "run_setup", "strip_self_transitions", "validate", "vcycle_apply",
]
