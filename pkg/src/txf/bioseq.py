"""Percent sequence identity for protein and nucleotide features.

Identity is computed from a pairwise global alignment (match +1, mismatch -1,
gap -2, linear gap cost) as matches / alignment length * 100. Traceback ties
prefer diagonal, then the gap in the first sequence, so results are
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "BioSequence",
    "AMINO_ACID",
    "NUCLEOTIDE",
    "percent_identity",
    "top_k_identity",
    "global_alignment_score",
]

AMINO_ACID = "amino_acid"
NUCLEOTIDE = "nucleotide"

_ALPHABETS = {
    AMINO_ACID: set("ACDEFGHIKLMNPQRSTVWYX"),
    NUCLEOTIDE: set("ACGTUN"),
}

MATCH_SCORE = 1
MISMATCH_SCORE = -1
GAP_SCORE = -2


@dataclass(frozen=True)
class BioSequence:
    residues: str
    kind: str = AMINO_ACID

    def __post_init__(self):
        if self.kind not in _ALPHABETS:
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if not self.residues:
            raise ValueError("empty sequence")
        if not self.residues.isupper():
            object.__setattr__(self, "residues", self.residues.upper())
        bad = set(self.residues) - _ALPHABETS[self.kind]
        if bad:
            raise ValueError(
                f"characters {sorted(bad)} not in the {self.kind} alphabet"
            )

    def __len__(self) -> int:
        return len(self.residues)


def _align(a: str, b: str) -> tuple[int, int, int]:
    """Needleman-Wunsch; returns (score, matches, alignment_length)."""
    n, m = len(a), len(b)
    # score rows plus a traceback matrix (0 diag, 1 up/gap-in-b, 2 left/gap-in-a)
    prev = [j * GAP_SCORE for j in range(m + 1)]
    trace = [bytearray(m + 1) for _ in range(n + 1)]
    for j in range(1, m + 1):
        trace[0][j] = 2
    for i in range(1, n + 1):
        cur = [i * GAP_SCORE] + [0] * m
        trace[i][0] = 1
        ai = a[i - 1]
        row_trace = trace[i]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (MATCH_SCORE if ai == b[j - 1] else MISMATCH_SCORE)
            up = prev[j] + GAP_SCORE
            left = cur[j - 1] + GAP_SCORE
            best = diag
            t = 0
            if up > best:
                best, t = up, 1
            if left > best:
                best, t = left, 2
            cur[j] = best
            row_trace[j] = t
        prev = cur
    score = prev[m]

    i, j = n, m
    matches = 0
    length = 0
    while i > 0 or j > 0:
        t = trace[i][j]
        if i > 0 and j > 0 and t == 0:
            if a[i - 1] == b[j - 1]:
                matches += 1
            i -= 1
            j -= 1
        elif i > 0 and (t == 1 or j == 0):
            i -= 1
        else:
            j -= 1
        length += 1
    return score, matches, length


def global_alignment_score(a: "BioSequence", b: "BioSequence") -> int:
    if a.kind != b.kind:
        raise ValueError(f"sequence kinds differ: {a.kind} vs {b.kind}")
    score, _, _ = _align(a.residues, b.residues)
    return score


def percent_identity(a: BioSequence, b: BioSequence) -> float:
    """Identity of the optimal global alignment, in [0, 100]."""
    if a.kind != b.kind:
        raise ValueError(f"sequence kinds differ: {a.kind} vs {b.kind}")
    _, matches, length = _align(a.residues, b.residues)
    return 100.0 * matches / length


def top_k_identity(
    query: BioSequence, pool: Sequence[BioSequence], k: int
) -> list[tuple[int, float]]:
    """The k highest-identity pool entries, descending, ties by index."""
    if not pool:
        raise ValueError("empty sequence pool")
    if k <= 0:
        raise ValueError("k must be positive")
    scored = sorted(
        ((i, percent_identity(query, s)) for i, s in enumerate(pool)),
        key=lambda item: (-item[1], item[0]),
    )
    return scored[: min(k, len(pool))]
