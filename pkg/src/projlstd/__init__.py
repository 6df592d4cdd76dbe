"""Policy evaluation with LSTD(lambda) on randomly projected features.

Modules
-------
chain
    Finite Markov reward processes, exact value functions and sampling.
features
    Feature maps, Gram matrices and mu-weighted projections.
rp
    Gaussian random projections and JL verifiers.
lstd
    Incremental and batch LSTD(lambda)[-RP] estimators, model fixed point.
bounds
    Finite-sample bound calculators.
bench
    Experiment harness and the ``projlstd`` command line.
"""

from .kernels import BACKEND
from .chain import (MarkovRewardProcess, StationaryDistribution, Trajectory, bellman,
                    bellman_lambda, exact_value, make_chain, mu_norm, sample_trajectory,
                    stationary_distribution)
from .features import (FeatureMap, GramMatrix, ProjectionOperator, check_full_rank, gram,
                       m_functional, make_features, project)
from .rp import (ProjectionMatrix, apply, inner_product_distortion, jl_distortion_rate,
                 sample_projection)
from .lstd import (EstimatorSolution, ModelFixedPoint, TraceState, lstd_lambda_batch,
                   lstd_lambda_rp_incremental, lstd_rp_batch, model_fixed_point, solve_theta,
                   value_of)

__version__ = "0.1.0"
