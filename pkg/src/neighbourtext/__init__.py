"""Predict and explain neighbourhood attributes from text corpora.

Stages: spatial grounding (:mod:`.geo`), document assembly (:mod:`.corpus`),
text preprocessing (:mod:`.textprep`, :mod:`.porter`), tf-idf features
(:mod:`.features`), Bonferroni-corrected correlation scans (:mod:`.stats`)
and elastic-net regression with Monte Carlo cross-validation (:mod:`.model`).
"""

__version__ = "0.1.0"
