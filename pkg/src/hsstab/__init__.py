"""Correcting almost-representations of chain-type groups in the normalized
Hilbert-Schmidt norm, plus finite-dimensional character constructions."""

from hsstab.errors import (
    EigensolverError,
    GroupError,
    HSStabError,
    InfeasibleRanksError,
    NotNormalError,
    NotUnitaryError,
    PresentationError,
    RankMismatchError,
    StabilizationError,
    VerificationError,
)
from hsstab.linalg import branch_power, hs_distance, hs_norm, polar_decompose, unitary_eig
from hsstab.presentations import (
    GroupPresentation,
    UnitaryTuple,
    Word,
    parse_preset,
    preset_case2,
    preset_chain,
    preset_heisenberg,
    relation_defect,
)
from hsstab.projections import chain_system, conjugating_unitary, nearest_feasible_ranks
from hsstab.stabilizers import (
    StabilityRecord,
    StabilizeOptions,
    perturb,
    sample_exact_rep,
    stabilize,
    stabilize_case2,
    stabilize_chain,
)

__version__ = "0.1.0"

__all__ = [
    "EigensolverError",
    "GroupError",
    "GroupPresentation",
    "HSStabError",
    "InfeasibleRanksError",
    "NotNormalError",
    "NotUnitaryError",
    "PresentationError",
    "RankMismatchError",
    "StabilityRecord",
    "StabilizationError",
    "StabilizeOptions",
    "UnitaryTuple",
    "VerificationError",
    "Word",
    "branch_power",
    "chain_system",
    "conjugating_unitary",
    "hs_distance",
    "hs_norm",
    "nearest_feasible_ranks",
    "parse_preset",
    "perturb",
    "polar_decompose",
    "preset_case2",
    "preset_chain",
    "preset_heisenberg",
    "relation_defect",
    "sample_exact_rep",
    "stabilize",
    "stabilize_case2",
    "stabilize_chain",
    "unitary_eig",
]
