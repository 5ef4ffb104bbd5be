"""U-Net variants over torchvision backbones (trained from scratch).

Each encoder is split into five stages producing features at 1/2 .. 1/32
resolution; a plain convolutional decoder upsamples back with skip
connections. The first convolution is rebuilt for single-channel input.
Inputs of any size are padded to a multiple of 32 and the logits cropped
back, so the 256x256 study images and small test images both work.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn
from torchvision import models as tvm

MODEL_NAMES = ("B0", "B5", "R18", "R50", "V16", "V19")

_DECODER_WIDTHS = (256, 128, 64, 32, 16)


def _conv_block(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, padding=1, bias=False),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
        nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
    )


def _vgg_stages(backbone: nn.Module) -> nn.ModuleList:
    layers = list(backbone.features)
    layers[0] = nn.Conv2d(1, 64, 3, padding=1)
    stages, current = [], []
    for layer in layers:
        current.append(layer)
        if isinstance(layer, nn.MaxPool2d):
            stages.append(nn.Sequential(*current))
            current = []
    assert len(stages) == 5, f"unexpected VGG layout: {len(stages)} pools"
    return nn.ModuleList(stages)


def _resnet_stages(backbone: nn.Module) -> nn.ModuleList:
    backbone.conv1 = nn.Conv2d(1, 64, 7, stride=2, padding=3, bias=False)
    return nn.ModuleList([
        nn.Sequential(backbone.conv1, backbone.bn1, backbone.relu),
        nn.Sequential(backbone.maxpool, backbone.layer1),
        backbone.layer2,
        backbone.layer3,
        backbone.layer4,
    ])


def _efficientnet_stages(backbone: nn.Module) -> nn.ModuleList:
    features = backbone.features
    stem = features[0][0]
    features[0][0] = nn.Conv2d(1, stem.out_channels, 3, stride=2, padding=1, bias=False)
    # stride-2 boundaries sit after blocks 0, 2, 3, 4 (checked per variant
    # by the channel probe in __init__)
    return nn.ModuleList([
        nn.Sequential(features[0], features[1]),
        features[2],
        features[3],
        nn.Sequential(features[4], features[5]),
        nn.Sequential(*features[6:]),
    ])


_BUILDERS = {
    "V16": (tvm.vgg16, _vgg_stages),
    "V19": (tvm.vgg19, _vgg_stages),
    "R18": (tvm.resnet18, _resnet_stages),
    "R50": (tvm.resnet50, _resnet_stages),
    "B0": (tvm.efficientnet_b0, _efficientnet_stages),
    "B5": (tvm.efficientnet_b5, _efficientnet_stages),
}


class SegmentationUNet(nn.Module):
    """Encoder-decoder network emitting per-pixel foreground logits."""

    def __init__(self, model_name: str):
        super().__init__()
        if model_name not in _BUILDERS:
            raise ValueError(f"unknown model {model_name!r}, expected one of {MODEL_NAMES}")
        self.model_name = model_name
        factory, splitter = _BUILDERS[model_name]
        self.stages = splitter(factory(weights=None))

        with torch.no_grad():
            probe = torch.zeros(1, 1, 64, 64)
            channels = []
            for stage in self.stages:
                probe = stage(probe)
                channels.append(probe.shape[1])
            sizes = probe.shape[-1]
            assert sizes == 2, f"encoder of {model_name} does not reach 1/32 resolution"

        self.decoders = nn.ModuleList()
        in_ch = channels[-1]
        skip_channels = channels[-2::-1] + [0]  # deepest skip first, none at full res
        for skip_ch, width in zip(skip_channels, _DECODER_WIDTHS):
            self.decoders.append(_conv_block(in_ch + skip_ch, width))
            in_ch = width
        self.head = nn.Conv2d(in_ch, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        pad_h = (32 - h % 32) % 32
        pad_w = (32 - w % 32) % 32
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h))

        skips = []
        out = x
        for stage in self.stages:
            out = stage(out)
            skips.append(out)

        out = skips[-1]
        for i, decoder in enumerate(self.decoders):
            out = F.interpolate(out, scale_factor=2.0, mode="bilinear", align_corners=False)
            skip_index = len(skips) - 2 - i
            if skip_index >= 0:
                out = torch.cat([out, skips[skip_index]], dim=1)
            out = decoder(out)
        logits = self.head(out)
        return logits[..., :h, :w]


def build_model(model_name: str) -> SegmentationUNet:
    return SegmentationUNet(model_name)
