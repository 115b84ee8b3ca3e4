"""Cheminformatics kernel: SMILES graphs, fingerprints, scaffolds, reactions."""

from .fingerprint import (
    Fingerprint,
    load_fingerprints,
    morgan_fingerprint,
    save_fingerprints,
    tanimoto,
    top_k_tanimoto,
)
from .reaction import (
    ReactantSet,
    canonical_reactant_set,
    reactant_set_equal,
    score_reactant_prediction,
)
from .scaffold import murcko_scaffold, scaffold_key
from .smiles import (
    Atom,
    Bond,
    Molecule,
    SmilesParseError,
    parse_reaction_side,
    parse_smiles,
    strip_atom_maps,
    write_canonical,
)

__all__ = [
    "Atom",
    "Bond",
    "Molecule",
    "SmilesParseError",
    "Fingerprint",
    "ReactantSet",
    "parse_smiles",
    "parse_reaction_side",
    "strip_atom_maps",
    "write_canonical",
    "morgan_fingerprint",
    "tanimoto",
    "top_k_tanimoto",
    "save_fingerprints",
    "load_fingerprints",
    "murcko_scaffold",
    "scaffold_key",
    "canonical_reactant_set",
    "reactant_set_equal",
    "score_reactant_prediction",
]
