"""Reactant-set comparison for reaction-prediction scoring."""

from __future__ import annotations

from .smiles import (
    SmilesParseError,
    parse_reaction_side,
    strip_atom_maps,
    write_canonical,
)

__all__ = ["ReactantSet", "canonical_reactant_set", "reactant_set_equal", "score_reactant_prediction"]


class ReactantSet(frozenset):
    """Set of canonical, map-stripped component serializations."""

    __slots__ = ()


def canonical_reactant_set(text: str) -> ReactantSet | None:
    """Canonicalize a dot-separated SMILES into a component set.

    Atom maps are stripped before canonicalization so mapped and unmapped
    spellings compare equal. Returns None when the string does not parse.
    """
    try:
        molecules = parse_reaction_side(text)
    except SmilesParseError:
        return None
    return ReactantSet(write_canonical(strip_atom_maps(m)) for m in molecules)


def score_reactant_prediction(predicted: str, truth: str) -> tuple[int, bool]:
    """Score a predicted reactant string against the ground truth.

    Returns (score, predicted_valid): score 1 only when both sides parse to
    identical component sets; an unparseable prediction scores 0 and is
    flagged invalid. An unparseable truth string is a data error.
    """
    truth_set = canonical_reactant_set(truth)
    if truth_set is None:
        raise ValueError(f"ground-truth SMILES does not parse: {truth!r}")
    predicted_set = canonical_reactant_set(predicted)
    if predicted_set is None:
        return 0, False
    return (1 if predicted_set == truth_set else 0), True


def reactant_set_equal(predicted: str, truth: str) -> int:
    """1 when predicted and truth contain exactly the same components."""
    score, _ = score_reactant_prediction(predicted, truth)
    return score
