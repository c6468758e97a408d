"""UNet++ segmentation network over an SE-ResNet-50 encoder.

The encoder is the standard ResNet-50 layout (3-4-6-3 bottlenecks) with a
squeeze-and-excitation gate in every block. The decoder is the nested
dense-skip grid: node (i, j) fuses every earlier node of row i with the
upsampled node (i+1, j-1), rows running from input resolution down to the
1/32 bottleneck. A 1x1 head on the last full-resolution node emits one
logit per pixel.

``forward`` accepts any spatial size: inputs are padded on the
bottom/right to multiples of 32 (five downsampling stages) and the logits
are cropped back, so output size always equals input size.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

ENCODER_CHANNELS = (3, 64, 256, 512, 1024, 2048)
ROW_CHANNELS = (16, 32, 64, 128, 256)
GRID_MULTIPLE = 32


class SqueezeExcite(nn.Module):
    def __init__(self, channels: int, reduction: int = 16):
        super().__init__()
        squeezed = max(channels // reduction, 1)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.gate = nn.Sequential(
            nn.Conv2d(channels, squeezed, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(squeezed, channels, 1),
            nn.Sigmoid(),
        )

    def forward(self, x):
        return x * self.gate(self.pool(x))


class SEBottleneck(nn.Module):
    expansion = 4

    def __init__(self, in_channels: int, planes: int, stride: int = 1):
        super().__init__()
        out_channels = planes * self.expansion
        self.conv1 = nn.Conv2d(in_channels, planes, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(planes)
        self.conv2 = nn.Conv2d(planes, planes, 3, stride=stride, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.conv3 = nn.Conv2d(planes, out_channels, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(out_channels)
        self.se = SqueezeExcite(out_channels)
        self.relu = nn.ReLU(inplace=True)
        if stride != 1 or in_channels != out_channels:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_channels),
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.relu(self.bn2(self.conv2(out)))
        out = self.se(self.bn3(self.conv3(out)))
        return self.relu(out + self.shortcut(x))


class SEResNet50(nn.Module):
    """Returns features at scales 1, 1/2, 1/4, 1/8, 1/16, 1/32."""

    def __init__(self):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(3, 64, 7, stride=2, padding=3, bias=False),
            nn.BatchNorm2d(64),
            nn.ReLU(inplace=True),
        )
        self.pool = nn.MaxPool2d(3, stride=2, padding=1)
        self.layer1 = self._make_layer(64, 64, blocks=3, stride=1)
        self.layer2 = self._make_layer(256, 128, blocks=4, stride=2)
        self.layer3 = self._make_layer(512, 256, blocks=6, stride=2)
        self.layer4 = self._make_layer(1024, 512, blocks=3, stride=2)

    @staticmethod
    def _make_layer(in_channels: int, planes: int, blocks: int, stride: int):
        layers = [SEBottleneck(in_channels, planes, stride=stride)]
        for _ in range(blocks - 1):
            layers.append(SEBottleneck(planes * SEBottleneck.expansion, planes))
        return nn.Sequential(*layers)

    def forward(self, x):
        f1 = self.stem(x)
        f2 = self.layer1(self.pool(f1))
        f3 = self.layer2(f2)
        f4 = self.layer3(f3)
        f5 = self.layer4(f4)
        return [x, f1, f2, f3, f4, f5]


class ConvBlock(nn.Sequential):
    def __init__(self, in_channels: int, out_channels: int):
        super().__init__(
            nn.Conv2d(in_channels, out_channels, 3, padding=1, bias=False),
            nn.BatchNorm2d(out_channels),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False),
            nn.BatchNorm2d(out_channels),
            nn.ReLU(inplace=True),
        )


class UNetPlusPlusDecoder(nn.Module):
    def __init__(self, encoder_channels=ENCODER_CHANNELS, row_channels=ROW_CHANNELS):
        super().__init__()
        self.rows = len(encoder_channels) - 1

        def width(i: int, j: int) -> int:
            return encoder_channels[i] if j == 0 else row_channels[i]

        self.nodes = nn.ModuleDict()
        for j in range(1, self.rows + 1):
            for i in range(self.rows + 1 - j):
                fused = sum(width(i, k) for k in range(j)) + width(i + 1, j - 1)
                self.nodes[f"x{i}_{j}"] = ConvBlock(fused, row_channels[i])

    def forward(self, features):
        grid = {(i, 0): f for i, f in enumerate(features)}
        for j in range(1, self.rows + 1):
            for i in range(self.rows + 1 - j):
                up = F.interpolate(
                    grid[(i + 1, j - 1)], scale_factor=2, mode="bilinear", align_corners=False
                )
                fused = torch.cat([grid[(i, k)] for k in range(j)] + [up], dim=1)
                grid[(i, j)] = self.nodes[f"x{i}_{j}"](fused)
        return grid[(0, self.rows)]


def _pad_to_grid(x):
    """Bottom/right padding up to the next multiple of the stage stride."""
    h, w = x.shape[-2:]
    pad_h = (GRID_MULTIPLE - h % GRID_MULTIPLE) % GRID_MULTIPLE
    pad_w = (GRID_MULTIPLE - w % GRID_MULTIPLE) % GRID_MULTIPLE
    if pad_h or pad_w:
        # reflect padding needs pad < dim; fall back for very small inputs
        mode = "reflect" if pad_h < h and pad_w < w else "replicate"
        x = F.pad(x, (0, pad_w, 0, pad_h), mode=mode)
    return x, h, w


class SegmentationModel(nn.Module):
    def __init__(self):
        super().__init__()
        self.encoder = SEResNet50()
        self.decoder = UNetPlusPlusDecoder()
        self.head = nn.Conv2d(ROW_CHANNELS[0], 1, 1)

    def forward(self, x):
        padded, h, w = _pad_to_grid(x)
        logits = self.head(self.decoder(self.encoder(padded)))
        return logits[..., :h, :w]


def build_model(seed: int | None = None) -> SegmentationModel:
    """Fresh model; with a seed the initialization is reproducible."""
    if seed is not None:
        torch.manual_seed(seed)
    return SegmentationModel()
