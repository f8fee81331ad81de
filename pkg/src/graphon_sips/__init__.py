"""Interacting particle systems on graphons with multichromatic interaction potentials."""

from .bifurcation import primary_threshold, secondary_threshold, solve_even_branch
from .graphon import ErdosRenyi, PowerLaw, SmallWorld, make_graphon, sample_adjacency
from .potential import MultichromaticPotential

__all__ = [
    "ErdosRenyi",
    "MultichromaticPotential",
    "PowerLaw",
    "SmallWorld",
    "make_graphon",
    "primary_threshold",
    "sample_adjacency",
    "secondary_threshold",
    "solve_even_branch",
]

__version__ = "0.1.0"
