import math

import pytest
import torch
from torch import nn

from relpos_scorer.model import (
    ALLOWED_OUT,
    FEN_SPATIAL,
    CONCAT,
    HADAMARD,
    KRONECKER,
    ClassifierHead,
    FeatureExtractor,
    ModelConfig,
    PairClassifier,
    combine,
    combined_dim,
    preprocess,
)


class TestCombine:
    def test_kronecker_definition(self):
        out = combine(torch.tensor([[1.0, 2.0]]), torch.tensor([[3.0, 4.0]]),
                      KRONECKER)
        assert out.tolist() == [[3.0, 4.0, 6.0, 8.0]]

    def test_hadamard_definition(self):
        out = combine(torch.tensor([[1.0, 2.0]]), torch.tensor([[3.0, 4.0]]),
                      HADAMARD)
        assert out.tolist() == [[3.0, 8.0]]

    def test_concat_definition(self):
        out = combine(torch.tensor([[1.0]]), torch.tensor([[2.0]]), CONCAT)
        assert out.tolist() == [[1.0, 2.0]]

    def test_output_dims(self):
        f = torch.randn(4, 16)
        assert combine(f, f, CONCAT).shape == (4, 32)
        assert combine(f, f, KRONECKER).shape == (4, 256)
        assert combine(f, f, HADAMARD).shape == (4, 16)
        assert combined_dim(16, KRONECKER) == 256

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="differ"):
            combine(torch.randn(2, 4), torch.randn(2, 5), HADAMARD)

    @pytest.mark.parametrize("kind", [KRONECKER, HADAMARD, CONCAT])
    def test_gradients_match_finite_differences(self, kind):
        # analytic vs central finite differences, 1e-4 relative tolerance
        torch.manual_seed(0)
        a = torch.randn(3, 5, dtype=torch.float64, requires_grad=True)
        b = torch.randn(3, 5, dtype=torch.float64, requires_grad=True)
        assert torch.autograd.gradcheck(
            lambda x, y: combine(x, y, kind), (a, b),
            eps=1e-6, atol=1e-6, rtol=1e-4)


class TestFeatureExtractor:
    def test_spatial_sizes_on_forward_pass(self):
        fen = FeatureExtractor(out_dim=512).eval()
        x = torch.randn(2, 3, 96, 96)
        sizes = [x.shape[-1]]
        for module in fen.blocks:
            x = module(x)
            if isinstance(module, nn.MaxPool2d):
                sizes.append(x.shape[-1])
        assert sizes == list(FEN_SPATIAL)  # 96 -> 48 -> 24 -> 12 -> 6 -> 3
        assert x.shape == (2, 512, 3, 3)
        out = fen.bn(fen.fc(x.flatten(start_dim=1)))
        assert out.shape == (2, 512)

    def test_channel_progression(self):
        fen = FeatureExtractor(out_dim=512).eval()
        x = torch.randn(1, 3, 96, 96)
        widths = []
        for module in fen.blocks:
            x = module(x)
            if isinstance(module, nn.MaxPool2d):
                widths.append(x.shape[1])
        assert widths == [32, 64, 128, 256, 512]

    @pytest.mark.parametrize("out_dim", ALLOWED_OUT)
    def test_all_out_dims_accepted(self, out_dim):
        fen = FeatureExtractor(out_dim=out_dim).eval()
        assert fen(torch.randn(2, 3, 96, 96)).shape == (2, out_dim)

    def test_rejects_other_out_dims(self):
        with pytest.raises(ValueError):
            FeatureExtractor(out_dim=100)


class TestHeadAndFullModel:
    @pytest.mark.parametrize("classes", [2, 8, 9])
    def test_initial_loss_is_log_classes(self, classes):
        # zero-initialized prediction layer -> uniform softmax
        torch.manual_seed(1)
        model = PairClassifier(ModelConfig(classes=classes)).train()
        x1 = torch.randn(8, 3, 96, 96)
        x2 = torch.randn(8, 3, 96, 96)
        y = torch.randint(0, classes, (8,))
        loss = nn.CrossEntropyLoss()(model(x1, x2), y).item()
        assert abs(loss - math.log(classes)) <= 0.01 * math.log(classes)

    def test_softmax_rows_sum_to_one(self):
        torch.manual_seed(2)
        model = PairClassifier(ModelConfig(classes=8))
        probs = model.probabilities(torch.randn(4, 3, 96, 96),
                                    torch.randn(4, 3, 96, 96))
        assert torch.allclose(probs.sum(dim=-1), torch.ones(4), atol=1e-6)
        assert probs.min() >= 0

    def test_head_hidden_blocks(self):
        head = ClassifierHead(32, (16, 8), 9)
        assert head(torch.randn(4, 32)).shape == (4, 9)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ModelConfig(classes=5)
        with pytest.raises(ValueError):
            ModelConfig(combination="outer")
        with pytest.raises(ValueError):
            ModelConfig(out_dim=123)


class TestPreprocess:
    def test_range_and_layout(self):
        import numpy as np
        raster = np.zeros((96, 96, 3), dtype=np.uint8)
        raster[..., 1] = 255
        x = preprocess(raster)
        assert x.shape == (1, 3, 96, 96)
        assert float(x[0, 0].max()) == -1.0
        assert float(x[0, 1].min()) == 1.0
