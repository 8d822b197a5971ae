"""Binary classifier networks: modified DRML and modified AlexNet.

Both families come in two spatial variants:

* region level — 64x64 crops, 5x5 first kernel; the DRML region layer
  degenerates to a plain 3x3 convolution at this scale.
* frame/face level — inputs downscaled to 176x176, 11x11 first kernel;
  DRML keeps an 8x8-grid region layer (per-patch normalized residual
  convolution).

All networks emit a single logit per image; callers apply the sigmoid.
"""
from __future__ import annotations

from collections import OrderedDict

import torch
from torch import nn

REGION_SIDE = 64
FRAME_SIDE = 176

FAMILIES = ("drml", "alexnet")
REGION_LEVELS = ("frame", "face", "region")


def input_side_for(region_level: str) -> int:
    if region_level not in REGION_LEVELS:
        raise ValueError(f"unknown region level {region_level!r}, expected one of {REGION_LEVELS}")
    return REGION_SIDE if region_level == "region" else FRAME_SIDE


class RegionLayer(nn.Module):
    """Per-patch normalized residual convolution over a grid partition.

    The feature map is split into ``grid`` x ``grid`` patches; each patch
    passes through its own batch-norm + ReLU + 3x3 convolution (weights
    independent per patch, realized as a grouped convolution) and is
    added back to the input.  Zero padding stays within patch borders,
    so patches never mix.
    """

    def __init__(self, channels: int, grid: int = 8):
        super().__init__()
        self.channels = channels
        self.grid = grid
        g2 = grid * grid
        self.norm = nn.BatchNorm2d(channels * g2)
        self.conv = nn.Conv2d(channels * g2, channels * g2, 3, padding=1, groups=g2, bias=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        if c != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {c}")
        if h % self.grid or w % self.grid:
            raise ValueError(f"spatial dims {(h, w)} not divisible by grid {self.grid}")
        ph, pw = h // self.grid, w // self.grid
        # patches become channel groups: (B, gy*gx*C, ph, pw)
        t = x.view(b, c, self.grid, ph, self.grid, pw)
        t = t.permute(0, 2, 4, 1, 3, 5).reshape(b, self.grid * self.grid * c, ph, pw)
        t = t + self.conv(torch.relu(self.norm(t)))
        t = t.view(b, self.grid, self.grid, c, ph, pw)
        return t.permute(0, 3, 1, 4, 2, 5).reshape(b, c, h, w)


def _conv_bn(name: str, cin: int, cout: int, kernel: int, stride: int = 1) -> list:
    pad = kernel // 2
    return [
        (name, nn.Conv2d(cin, cout, kernel, stride=stride, padding=pad, bias=False)),
        (f"{name}_bn", nn.BatchNorm2d(cout)),
        (f"{name}_act", nn.ReLU(inplace=True)),
    ]


class DrmlNet(nn.Module):
    """Modified DRML trunk.

    Region level (64x64): conv5x5/32 -> BN+ReLU -> plain conv3x3/32 in
    place of the region layer -> pool -> conv3x3/64 -> pool ->
    conv3x3/128 -> pool -> global average pool -> FC 128 -> logit.

    Frame/face level (176x176): conv11x11/32 stride 2 first, then the
    8x8-grid region layer, then the same tail.
    """

    def __init__(self, region_level: str = "region"):
        super().__init__()
        self.region_level = region_level
        self.input_side = input_side_for(region_level)
        layers: list = []
        if region_level == "region":
            layers += _conv_bn("stem", 3, 32, 5)
            layers += _conv_bn("swap", 32, 32, 3)
        else:
            layers += _conv_bn("stem", 3, 32, 11, stride=2)
            layers += [("swap", RegionLayer(32, grid=8))]
        layers += [("pool1", nn.MaxPool2d(2))]
        layers += _conv_bn("conv3", 32, 64, 3)
        layers += [("pool2", nn.MaxPool2d(2))]
        layers += _conv_bn("conv4", 64, 128, 3)
        layers += [("pool3", nn.MaxPool2d(2))]
        self.features = nn.Sequential(OrderedDict(layers))
        self.head = nn.Sequential(
            OrderedDict(
                [
                    ("gap", nn.AdaptiveAvgPool2d(1)),
                    ("flatten", nn.Flatten()),
                    ("fc1", nn.Linear(128, 128)),
                    ("fc1_act", nn.ReLU(inplace=True)),
                    ("fc2", nn.Linear(128, 1)),
                ]
            )
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x)).squeeze(-1)


class AlexSmallNet(nn.Module):
    """Modified AlexNet: the five-convolution / two-hidden-FC shape at
    reduced width.  The frame/face variant keeps the classic 11x11
    stride-4 first layer; the region variant shrinks it to 5x5 stride 2
    so a 64x64 input survives the pooling ladder."""

    def __init__(self, region_level: str = "region"):
        super().__init__()
        self.region_level = region_level
        self.input_side = input_side_for(region_level)
        if region_level == "region":
            first = nn.Conv2d(3, 48, 5, stride=2, padding=2)
            flat = 96 * 3 * 3
        else:
            first = nn.Conv2d(3, 48, 11, stride=4, padding=5)
            flat = 96 * 4 * 4
        self.features = nn.Sequential(
            OrderedDict(
                [
                    ("conv1", first),
                    ("act1", nn.ReLU(inplace=True)),
                    ("pool1", nn.MaxPool2d(3, stride=2)),
                    ("conv2", nn.Conv2d(48, 96, 5, padding=2)),
                    ("act2", nn.ReLU(inplace=True)),
                    ("pool2", nn.MaxPool2d(3, stride=2)),
                    ("conv3", nn.Conv2d(96, 128, 3, padding=1)),
                    ("act3", nn.ReLU(inplace=True)),
                    ("conv4", nn.Conv2d(128, 128, 3, padding=1)),
                    ("act4", nn.ReLU(inplace=True)),
                    ("conv5", nn.Conv2d(128, 96, 3, padding=1)),
                    ("act5", nn.ReLU(inplace=True)),
                    ("pool3", nn.MaxPool2d(3, stride=2)),
                ]
            )
        )
        self.head = nn.Sequential(
            OrderedDict(
                [
                    ("flatten", nn.Flatten()),
                    ("drop1", nn.Dropout(0.5)),
                    ("fc1", nn.Linear(flat, 256)),
                    ("fc1_act", nn.ReLU(inplace=True)),
                    ("drop2", nn.Dropout(0.5)),
                    ("fc2", nn.Linear(256, 256)),
                    ("fc2_act", nn.ReLU(inplace=True)),
                    ("fc3", nn.Linear(256, 1)),
                ]
            )
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x)).squeeze(-1)


def build_network(family: str, region_level: str) -> nn.Module:
    if family == "drml":
        return DrmlNet(region_level)
    if family == "alexnet":
        return AlexSmallNet(region_level)
    raise ValueError(f"unknown classifier family {family!r}, expected one of {FAMILIES}")


def last_conv_name(net: nn.Module) -> str:
    """Name of the last plain convolution in definition order — the
    default saliency target layer."""
    name = None
    for n, module in net.named_modules():
        if isinstance(module, nn.Conv2d) and module.groups == 1:
            name = n
    if name is None:
        raise ValueError("network has no convolution layer")
    return name


def parameter_count(net: nn.Module) -> int:
    return sum(p.numel() for p in net.parameters())
