"""Hashed circular fingerprints and bit-vector similarity search.

Every atom environment up to the configured radius is hashed with a fixed
64-bit mixing function (splitmix64 finalizer constants), so fingerprints are
stable across platforms and builds and can be persisted.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .smiles import Molecule

__all__ = [
    "Fingerprint",
    "morgan_fingerprint",
    "tanimoto",
    "top_k_tanimoto",
    "save_fingerprints",
    "load_fingerprints",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

FP_MAGIC = b"TXFP"
FP_VERSION = 1


def mix64(x: int) -> int:
    """splitmix64 finalizer; the only hash used for fingerprint bits."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def _hash_ints(values: Iterable[int]) -> int:
    h = _GOLDEN
    for v in values:
        h = mix64(h ^ ((v + _GOLDEN) & _MASK64))
    return h


@dataclass(frozen=True)
class Fingerprint:
    """Fixed-width bit vector with a cached popcount."""

    bits: int
    nbits: int = 2048
    popcount: int = field(default=-1)

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.nbits:
            raise ValueError("bits exceed declared width")
        if self.popcount < 0:
            object.__setattr__(self, "popcount", self.bits.bit_count())
        elif self.popcount != self.bits.bit_count():
            raise ValueError("popcount does not match bits")

    def to_bytes(self) -> bytes:
        return self.bits.to_bytes(self.nbits // 8, "little")

    @classmethod
    def from_bytes(cls, raw: bytes, nbits: int) -> "Fingerprint":
        return cls(bits=int.from_bytes(raw, "little"), nbits=nbits)


def _atom_invariant(atom, degree: int, hcount: int) -> int:
    symbol_code = int.from_bytes(atom.symbol.encode("ascii"), "little")
    return _hash_ints(
        (symbol_code, atom.charge + 512, degree, hcount, 1 if atom.aromatic else 0)
    )


def morgan_fingerprint(mol: Molecule, radius: int = 2, nbits: int = 2048) -> Fingerprint:
    """Hash every atom's r-neighborhood for r in 0..radius into a bit vector.

    The invariant feeding the hash is (element, charge, degree, H count,
    aromatic flag) plus the bond orders of each shell; atom maps, isotopes
    and stereo annotations are ignored, so mapped and unmapped spellings of
    the same molecule collide by design.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if nbits <= 0 or nbits % 8:
        raise ValueError("nbits must be a positive multiple of 8")
    adj = mol.neighbors()
    inv = [
        _atom_invariant(atom, len(adj[i]), atom.hcount)
        for i, atom in enumerate(mol.atoms)
    ]
    bits = 0
    for v in inv:
        bits |= 1 << (v % nbits)
    for r in range(1, radius + 1):
        new_inv = []
        for i in range(len(mol.atoms)):
            shell = sorted((bond.order, inv[j]) for j, bond in adj[i])
            stream = [r, inv[i]]
            for order, nb in shell:
                stream.append(order)
                stream.append(nb)
            new_inv.append(_hash_ints(stream))
        inv = new_inv
        for v in inv:
            bits |= 1 << (v % nbits)
    return Fingerprint(bits=bits, nbits=nbits)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|A∩B| / |A∪B| over set bits; 1.0 when both vectors are empty."""
    if a.nbits != b.nbits:
        raise ValueError(f"fingerprint widths differ: {a.nbits} vs {b.nbits}")
    inter = (a.bits & b.bits).bit_count()
    union = a.popcount + b.popcount - inter
    if union == 0:
        return 1.0
    return inter / union


def top_k_tanimoto(
    query: Fingerprint, pool: Sequence[Fingerprint], k: int
) -> list[tuple[int, float]]:
    """The k most similar pool entries, descending, ties broken by index."""
    if not pool:
        raise ValueError("empty fingerprint pool")
    if k <= 0:
        raise ValueError("k must be positive")
    k = min(k, len(pool))
    scored = ((-tanimoto(query, fp), i) for i, fp in enumerate(pool))
    best = heapq.nsmallest(k, scored)
    return [(i, -neg) for neg, i in best]


def save_fingerprints(path, fingerprints: Sequence[Fingerprint], radius: int) -> None:
    """Write fingerprints as little-endian packed bit blocks.

    Layout: 16-byte header (4s magic "TXFP", u32 version, u32 nbits,
    u32 radius, all little-endian) followed by nbits/8 bytes per fingerprint.
    """
    if not fingerprints:
        raise ValueError("nothing to save")
    nbits = fingerprints[0].nbits
    if any(fp.nbits != nbits for fp in fingerprints):
        raise ValueError("mixed fingerprint widths")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", FP_MAGIC, FP_VERSION, nbits, radius))
        for fp in fingerprints:
            fh.write(fp.to_bytes())


def load_fingerprints(path) -> tuple[list[Fingerprint], int]:
    """Read a fingerprint block file; returns (fingerprints, radius)."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise ValueError("truncated fingerprint header")
        magic, version, nbits, radius = struct.unpack("<4sIII", header)
        if magic != FP_MAGIC:
            raise ValueError("not a fingerprint block file")
        if version != FP_VERSION:
            raise ValueError(f"unsupported fingerprint file version {version}")
        width = nbits // 8
        out = []
        while True:
            raw = fh.read(width)
            if not raw:
                break
            if len(raw) != width:
                raise ValueError("truncated fingerprint record")
            out.append(Fingerprint.from_bytes(raw, nbits))
    return out, radius
