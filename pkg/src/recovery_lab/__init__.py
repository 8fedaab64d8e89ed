"""Recovery of probability measures from Arrow prices.

Subpackages:

* ``markov``       finite-state economies, Perron-Frobenius recovery, SDF
                   decomposition, long-maturity limits, extended/structured
                   recovery.
* ``preferences``  power- and recursive-utility discount factor matrices.
* ``sqroot``       square-root diffusion example: eigenfunction candidates,
                   ergodic selection, simulation checks.
* ``lrr``          calibrated long-run-risk model: value function, dominant
                   eigenpair, changed measure, affine expectations, yields.
* ``bounds``       Cressie-Read discrepancy measurement of the martingale
                   component, with convex dual lower bounds.
* ``cli``          command-line front end.
"""

from . import bounds, exceptions, lrr, markov, preferences, sqroot
from .markov import (
    MarkovPricingEconomy,
    PricingMatrix,
    RecoveredMeasure,
    SdfMatrix,
    StochasticMatrix,
    build_economy,
    recover,
)

__version__ = "0.1.0"

__all__ = [
    "bounds",
    "exceptions",
    "lrr",
    "markov",
    "preferences",
    "sqroot",
    "MarkovPricingEconomy",
    "PricingMatrix",
    "RecoveredMeasure",
    "SdfMatrix",
    "StochasticMatrix",
    "build_economy",
    "recover",
    "__version__",
]
