"""txf: turn tabular therapeutics datasets into instruction-tuning prompts,
evaluate text-generation models over a simple HTTP contract, and reproduce
benchmark scoreboards and paired statistical comparisons.

Subpackages and modules:

- ``txf.chem``        SMILES graphs, canonical forms, fingerprints, scaffolds
- ``txf.bioseq``      sequence identity for protein / nucleotide features
- ``txf.corpus``      task manifests, table ingestion, split assignment
- ``txf.promptgen``   prompt rendering, label binning, shots, mixtures
- ``txf.evalharness`` model clients, answer parsing, metrics
- ``txf.analysis``    scoreboards, signed-rank comparisons, contamination scan
- ``txf.cli``         the ``txf`` command-line entry point
"""

__version__ = "0.1.0"
