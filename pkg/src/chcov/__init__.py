"""chcov: multivariate confluent-hypergeometric Gaussian random fields.

Covariance kernels with polynomial tail decay, validity checkers for
multivariate constructions, spectrally-generated cross-covariances,
Gaussian-process likelihood/prediction/simulation, maximum-likelihood
fitting, and a simulation/cross-validation harness with a CLI.

Submodules are imported explicitly (``from chcov import kernels``); the
package root stays light so the CLI can pin BLAS thread counts before any
heavy import.
"""

__version__ = "0.1.0"
