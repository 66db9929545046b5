"""Nash equilibria, game dynamics and combinatorial Conley indices for bimatrix games."""
from .game import (
    BimatrixGame,
    MixedProfile,
    deficit,
    is_epsilon_nash,
    km_game,
    matching_pennies,
    support_enumeration,
)
from .homology import BettiProfile, CubicalComplex
from .ne_topology import eps_nash_region, nash_component_extract, region_homology

__version__ = "0.1.0"

__all__ = [
    "BimatrixGame",
    "MixedProfile",
    "deficit",
    "is_epsilon_nash",
    "km_game",
    "matching_pennies",
    "support_enumeration",
    "BettiProfile",
    "CubicalComplex",
    "eps_nash_region",
    "nash_component_extract",
    "region_homology",
]
