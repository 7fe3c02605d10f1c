"""Measure-preserving transformations of self-similar Volterra Gaussian
processes: kernels, covariances, simulation, the transformation ``Z^alpha``
and its statistical verification."""
from .covariance import CovarianceOracle, cov_matrix, fbm_cov, kernel_cov, transform_cov_oracle
from .errors import (EvaluationError, GridMismatchError, HorizonError, NotPositiveDefiniteError,
                     QuadratureError)
from .kernels import CustomFactor, Fbm, PowerMarkov, kernel_eval, kernel_identity_residual
from .simulate import PathEnsemble, Seed, TimeGrid, sample_bm_increments, sample_cholesky, synth_from_kernel
from .transform import TransformParams, molchan, z_alpha_forward, z_alpha_inverse, z_alpha_iterate

__version__ = "0.1.0"
