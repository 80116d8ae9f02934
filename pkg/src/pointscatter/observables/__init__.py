from .harmonics import (
    BUMP_RADIUS,
    L_MAX,
    MomentumObservable,
    bump_nu_mass,
    gram_matrix,
    harmonic_indices,
    spherical_harmonic_eval,
)
from .momentum import AtomMass, atom_mass, convex_residual, momentum_matrix_element, weyl_sum
from .position import (
    NegativeSums,
    PairSum,
    PositionObservable,
    classify_pairs,
    lattice_pair_sum,
    negative_sum_decomposition,
    negative_sum_lower_bound,
    paired_tail,
    position_matrix_element,
    v1_block,
)

__all__ = [
    "AtomMass",
    "BUMP_RADIUS",
    "L_MAX",
    "MomentumObservable",
    "NegativeSums",
    "PairSum",
    "PositionObservable",
    "atom_mass",
    "bump_nu_mass",
    "classify_pairs",
    "convex_residual",
    "gram_matrix",
    "harmonic_indices",
    "lattice_pair_sum",
    "momentum_matrix_element",
    "negative_sum_decomposition",
    "negative_sum_lower_bound",
    "paired_tail",
    "position_matrix_element",
    "spherical_harmonic_eval",
    "v1_block",
    "weyl_sum",
]
