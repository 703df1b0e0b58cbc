"""Strong coresets for l_p subspace approximation via root ridge leverage score sampling."""
from ._kernels import BACKEND, set_threads
from .errors import ConstructionError, ConvergenceError, DegenerateRound, InputError
from .linalg import (DenseMatrix, SubspaceQuery, pq_norm, residual, residual_cost, svd_truncate,
                     tail_energy)
from .pipeline import build_strong_coreset, merge, reduce
from .sampling import SamplerConfig, WeightedCoreset, lp_sample, one_round, sampling_probabilities
from .scores import leverage_scores, lewis_weights, ridge_lambda, ridge_leverage_scores

__version__ = "0.1.0"
