"""Siamese relative-position classifier.

Two 96x96 fragments go through a shared VGG-style feature extraction
network, their features are fused by a combination layer (concatenation,
Kronecker product, or Hadamard product), and a small MLP head predicts one
of 2, 8, or 9 classes:

* 8 classes: which neighbor slot the second fragment occupies.
* 9 classes: the 8 slots plus "not from this image".
* 2 classes: same image or not.

The feature tower halves the spatial size five times (96 -> 48 -> 24 -> 12
-> 6 -> 3) while widening 32 -> 64 -> 128 -> 256 -> 512, then projects the
3x3x512 grid to an OUT-dimensional embedding.  For the Hadamard fusion this
final projection doubles as the learned projection of the bilinear
approximation, so the fusion itself is a plain elementwise product.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

FEN_CHANNELS = (32, 64, 128, 256, 512)
FEN_SPATIAL = (96, 48, 24, 12, 6, 3)
ALLOWED_OUT = (512, 1024, 2048, 4096)

CONCAT = "concat"
KRONECKER = "kron"
HADAMARD = "hadamard"
COMBINATIONS = (CONCAT, KRONECKER, HADAMARD)


def combine(f1: torch.Tensor, f2: torch.Tensor, kind: str) -> torch.Tensor:
    """Fuse two batches of feature vectors (B, D) -> (B, fused).

    concat gives 2D features, kron the full D^2 bilinear features (row i of
    the outer product laid out contiguously), hadamard the D-dimensional
    elementwise product.
    """
    if f1.shape != f2.shape:
        raise ValueError(f"feature shapes differ: {tuple(f1.shape)} vs "
                         f"{tuple(f2.shape)}")
    if kind == CONCAT:
        return torch.cat([f1, f2], dim=-1)
    if kind == KRONECKER:
        return (f1.unsqueeze(-1) * f2.unsqueeze(-2)).flatten(start_dim=-2)
    if kind == HADAMARD:
        return f1 * f2
    raise ValueError(f"unknown combination {kind!r}; pick one of {COMBINATIONS}")


def combined_dim(out_dim: int, kind: str) -> int:
    return {CONCAT: 2 * out_dim, KRONECKER: out_dim * out_dim,
            HADAMARD: out_dim}[kind]


@dataclass(frozen=True)
class ModelConfig:
    classes: int = 8
    combination: str = KRONECKER
    out_dim: int = 512
    head_hidden: tuple[int, int] = (128, 128)

    def __post_init__(self):
        if self.classes not in (2, 8, 9):
            raise ValueError(f"classes must be 2, 8 or 9, got {self.classes}")
        if self.combination not in COMBINATIONS:
            raise ValueError(f"unknown combination {self.combination!r}")
        if self.out_dim not in ALLOWED_OUT:
            raise ValueError(f"out_dim must be one of {ALLOWED_OUT}")


class FeatureExtractor(nn.Module):
    """Shared tower: five conv+BN+ReLU+maxpool blocks, then FC+BN to out_dim."""

    def __init__(self, out_dim: int = 512):
        super().__init__()
        if out_dim not in ALLOWED_OUT:
            raise ValueError(f"out_dim must be one of {ALLOWED_OUT}")
        blocks = []
        cin = 3
        for cout in FEN_CHANNELS:
            blocks += [
                nn.Conv2d(cin, cout, kernel_size=3, padding=1),
                nn.BatchNorm2d(cout),
                nn.ReLU(inplace=True),
                nn.MaxPool2d(2),
            ]
            cin = cout
        self.blocks = nn.Sequential(*blocks)
        self.fc = nn.Linear(FEN_SPATIAL[-1] * FEN_SPATIAL[-1] * FEN_CHANNELS[-1],
                            out_dim)
        self.bn = nn.BatchNorm1d(out_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z = self.blocks(x)
        return self.bn(self.fc(z.flatten(start_dim=1)))


class ClassifierHead(nn.Module):
    """Two FC+BN+ReLU blocks, then the prediction layer.

    The prediction layer is zero-initialized so an untrained model outputs
    the uniform distribution (first-batch cross-entropy = ln(classes))."""

    def __init__(self, in_dim: int, hidden: tuple[int, int], classes: int):
        super().__init__()
        h1, h2 = hidden
        self.mlp = nn.Sequential(
            nn.Linear(in_dim, h1), nn.BatchNorm1d(h1), nn.ReLU(inplace=True),
            nn.Linear(h1, h2), nn.BatchNorm1d(h2), nn.ReLU(inplace=True),
        )
        self.predict = nn.Linear(h2, classes)
        nn.init.zeros_(self.predict.weight)
        nn.init.zeros_(self.predict.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.predict(self.mlp(x))


class PairClassifier(nn.Module):
    """Full network: shared FEN, combination layer, classifier head."""

    def __init__(self, config: ModelConfig = ModelConfig()):
        super().__init__()
        self.config = config
        self.fen = FeatureExtractor(config.out_dim)
        self.head = ClassifierHead(
            combined_dim(config.out_dim, config.combination),
            config.head_hidden, config.classes)

    def forward(self, x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
        """Logits for a batch of (first fragment, second fragment) pairs."""
        return self.head(combine(self.fen(x1), self.fen(x2),
                                 self.config.combination))

    @torch.no_grad()
    def probabilities(self, x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
        self.eval()
        return torch.softmax(self.forward(x1, x2), dim=-1)


def preprocess(rasters) -> torch.Tensor:
    """uint8 (B, 96, 96, 3) -> float32 (B, 3, 96, 96) in [-1, 1]."""
    x = torch.as_tensor(rasters, dtype=torch.float32)
    if x.ndim == 3:
        x = x.unsqueeze(0)
    return x.permute(0, 3, 1, 2) / 127.5 - 1.0
