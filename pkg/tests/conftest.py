"""Shared helpers: fixture paths, a real-molecule corpus, graph permutation."""

import random
from dataclasses import replace
from pathlib import Path

import pytest

from txf.chem import Molecule

FIXTURES = Path(__file__).parent / "fixtures"

# Drug-like molecules drawn from the prompt examples plus common structures;
# used for round-trip and invariance harnesses.
MOLECULE_CORPUS = [
    "CN1C(=O)CN=C(C2=CCCCC2)c2cc(Cl)ccc21",
    "CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21",
    "CN1C(=O)CN=C(c2ccccc2F)c2cc(Cl)ccc21",
    "CN1C(=S)CN=C(c2ccccc2)c2cc(Cl)ccc21",
    "CP(C)(=O)CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21",
    "CN1C(=O)CN=C(c2ccccc2)c2cc([N+](=O)[O-])ccc21",
    "CCN(CC)CCN1C(=O)CN=C(c2ccccc2F)c2cc(Cl)ccc21",
    "O=C1CN=C(c2ccccc2)c2cc(Cl)ccc2N1CC1CC1",
    "C#CCN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21",
    "O=C1CN=C(c2ccccc2)c2cc(Cl)ccc2N1CC(F)(F)F",
    "CCS(=O)(=O)CCN1C(=O)CN=C(c2ccccc2F)c2cc(Cl)ccc21",
    "O=C(O)COC(=O)Cc1ccccc1Nc1c(Cl)cccc1Cl",
    "COC1=NC(N)=NC2=C1N=CN2[C@@H]1O[C@H](CO)[C@@H](O)[C@@H]1O",
    "O=S(=O)(O)c1cccc2cccc(Nc3ccccc3)c12",
    "CN1C=C(C2=CC=CC=C21)/C=C\\3/C4=C(C=CC=N4)NC3=O",
    "CC(=O)Oc1ccccc1C(=O)O",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "CC(=O)Nc1ccc(O)cc1",
    "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "CC(=O)[O-].[Na+]",
    "C[N+](C)(C)CCO",
    "NCC(=O)O",
    "N[C@@H](C)C(=O)O",
    "N[C@@H](Cc1ccccc1)C(=O)O",
    "OC[C@H]1O[C@@H](O)[C@H](O)[C@@H](O)[C@@H]1O",
    "c1ccc2ccccc2c1",
    "c1ccc2c(c1)ccc1ccccc12",
    "c1ccc(-c2ccccc2)cc1",
    "c1ccc(Cc2ccccc2)cc1",
    "c1cnc2[nH]ccc2c1",
    "c1ccc2[nH]cnc2c1",
    "c1ccsc1",
    "c1ccoc1",
    "c1cc[nH]c1",
    "c1ccncc1",
    "Clc1ccccc1Cl",
    "FC(F)(F)c1ccccc1",
    "N#Cc1ccccc1",
    "O=[N+]([O-])c1ccccc1",
    "C1CC2(CC1)CCCC2",
    "C1CC2CCC1CC2",
    "C1CCC2(CC1)CCCCC2",
    "CC(C)(C)OC(=O)N1CCC(N)CC1",
    "O=C1CCCCC1",
    "OC1CCCCC1",
    "C1CCNCC1",
    "C1COCCN1",
    "CSCC[C@H](N)C(=O)O",
    "[13CH4]",
    "[NH4+].[Cl-]",
    "CC(C)=CCC/C(C)=C/CO",
    "C/C=C\\C",
    "[CH2:12]1[C:7]2([CH2:6][CH2:5][O:15][CH2:1][CH2:8]2)[CH2:13][CH2:14][O:10][C:11]1=[O:17]",
    "F[C@@H](Cl)Br",
]


def permute_molecule(mol: Molecule, rng: random.Random) -> Molecule:
    """Relabel atoms with a random permutation, preserving the graph."""
    perm = list(range(len(mol.atoms)))  # perm[new] = old
    rng.shuffle(perm)
    inverse = {old: new for new, old in enumerate(perm)}
    atoms = tuple(mol.atoms[old] for old in perm)
    bonds = tuple(replace(b, a=inverse[b.a], b=inverse[b.b]) for b in mol.bonds)
    order = tuple(
        tuple(inverse[x] if isinstance(x, int) else x for x in mol.written_order[old])
        for old in perm
    )
    return Molecule(atoms=atoms, bonds=bonds, written_order=order)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
