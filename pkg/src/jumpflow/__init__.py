"""jumpflow: gradient-flow evolutions of jump processes with singular kernels
on discretized metric spaces, with energy-dissipation certificates."""

from . import (densities, evolution, experiments, functionals, ledger, measures,
               quadrature, spaces)

__version__ = "0.1.0"

__all__ = [
    "densities",
    "evolution",
    "experiments",
    "functionals",
    "ledger",
    "measures",
    "quadrature",
    "spaces",
    "__version__",
]
