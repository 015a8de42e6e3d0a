"""Lattice Higgs model toolkit: exact oracles, high-temperature expansion,
cluster expansions, and perimeter-law decay constants on hypercubic boxes.

The package is organized by machinery layer:

* ``dec``         -- cells, forms, chains and the operators d, delta, boundary.
* ``gaugemodel``  -- the Z_m x Z_n model: Hamiltonian, activities, Wilson
  observables, gauge transforms, unitary-gauge weights.
* ``oracle``      -- exact enumeration and d=2 transfer-matrix ground truth,
  plus numeric correlation-inequality checks.
* ``hte``         -- high-temperature (character) expansion of Z[gamma].
* ``clusters``    -- polymers, clusters, Ursell functions, convergence
  thresholds and tail bounds for both expansion regimes.
* ``asymptotics`` -- per-edge decay constant and constant term of the pure
  perimeter law, with truncation tails and error envelopes.
* ``mc``          -- Metropolis sampler for mid-scale cross-checks.
* ``cli``         -- experiment orchestration.
"""

from latthiggs.errors import BudgetExceededError, LatthiggsError, OutsideRegimeError

__version__ = "0.1.0"

__all__ = [
    "BudgetExceededError",
    "LatthiggsError",
    "OutsideRegimeError",
    "__version__",
]
