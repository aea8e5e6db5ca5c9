"""Gesture classifier: EfficientNet-B0 backbone plus an 8-layer dense head.

The backbone's pooled 1280-wide activation doubles as the similarity
embedding; the head tapers it down to the 4 gesture logits. Head widths
are a configurable convention (the geometric taper below is the default).
"""

from typing import Dict

import torch
from torch import nn
from torchvision.models import efficientnet_b0

EMBEDDING_DIM = 1280
N_CLASSES = 4

#: Hidden widths of the dense head: 8 trainable layers, 1280 in, 4 out.
DEFAULT_HEAD_WIDTHS = (896, 640, 448, 320, 224, 160, 64)


def build_head(widths=DEFAULT_HEAD_WIDTHS):
    layers = []
    previous = EMBEDDING_DIM
    for width in widths:
        layers.append(nn.Linear(previous, width))
        layers.append(nn.ReLU(inplace=True))
        previous = width
    layers.append(nn.Linear(previous, N_CLASSES))
    return nn.Sequential(*layers)


class GestureClassifier(nn.Module):
    """Dual-head network over NCHW [0,1] inputs."""

    def __init__(self, head_widths=DEFAULT_HEAD_WIDTHS, pretrained=False):
        super().__init__()
        weights = "IMAGENET1K_V1" if pretrained else None
        backbone = efficientnet_b0(weights=weights)
        self.features = backbone.features
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = build_head(head_widths)

    def embed(self, x):
        return self.pool(self.features(x)).flatten(1)

    def forward(self, x):
        embedding = self.embed(x)
        return embedding, self.head(embedding)

    def parameter_counts(self):
        backbone = sum(p.numel() for p in self.features.parameters())
        head = sum(p.numel() for p in self.head.parameters())
        return {
            "backbone_parameters": backbone,
            "head_parameters": head,
            "total_parameters": backbone + head,
        }


class DeployClassifier(nn.Module):
    """Inference wrapper matching the runtime contract: channels-last
    [0,1] input, named dual outputs."""

    def __init__(self, model: GestureClassifier):
        super().__init__()
        self.model = model

    def forward(self, image: torch.Tensor) -> Dict[str, torch.Tensor]:
        x = image.permute(0, 3, 1, 2)
        embedding, logits = self.model(x)
        return {"embedding": embedding, "logits": logits}
