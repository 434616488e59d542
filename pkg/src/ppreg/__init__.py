"""Point-process regression toolkit.

Simulation, quasi-likelihood estimation, and limit-theory verification for
multivariate counting processes whose intensity regresses on covariates
through a nonnegative kernel (self-exciting models included).
"""

from . import asymptotics, estimate, harness, likelihood, lob, model, simulate

__version__ = "0.1.0"

__all__ = [
    "asymptotics",
    "estimate",
    "harness",
    "likelihood",
    "lob",
    "model",
    "simulate",
    "__version__",
]
