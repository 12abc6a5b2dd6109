"""Rate-distortion-perception function solver.

Computes R(D, P) of a discrete memoryless source under an average distortion
constraint and an f-divergence perception constraint, via alternating
minimization with certified stopping bounds. Rates are in nats throughout
this module.
"""

from ._rdpf import (
    __version__,
    binary_rdf,
    closed_form_binary_tv,
    divergence,
    grid_oracle,
    mutual_information,
    solve,
    spectral,
)

__all__ = [
    "__version__",
    "binary_rdf",
    "closed_form_binary_tv",
    "divergence",
    "grid_oracle",
    "mutual_information",
    "solve",
    "spectral",
]
