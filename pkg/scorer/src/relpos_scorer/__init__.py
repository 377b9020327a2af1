"""Toy-scale relative-position scorer: siamese CNN with concat / Kronecker /
Hadamard fusion, trained on fragment manifests, exporting score files for
the reassembly solver."""

from .model import (
    CONCAT,
    HADAMARD,
    KRONECKER,
    FeatureExtractor,
    ModelConfig,
    PairClassifier,
    combine,
)

__version__ = "0.1.0"
