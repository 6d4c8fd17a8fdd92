"""Full parameter set and its flat-vector layout.

The flat ordering is fixed and shared by the optimizer, gradient checks
and the model file format: convolution stacks in layer order (each in C
order), then the label weights row-major, then the transition weights
row-major.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convnet import ConvNetArch, check_weights
from .crf import CrfParams


@dataclass
class ModelParams:
    arch: ConvNetArch
    conv: list[np.ndarray]
    crf: CrfParams

    def __post_init__(self):
        check_weights(self.arch, self.conv)
        if self.crf.label_weights.shape[1] != self.arch.top_dim:
            raise ValueError("label weights width must match the top layer width")

    @property
    def n_labels(self) -> int:
        return self.crf.n_labels


def param_count(arch: ConvNetArch, n_labels: int) -> int:
    conv = sum(int(np.prod(s)) for s in arch.weight_shapes())
    return conv + n_labels * arch.top_dim + n_labels * n_labels


def pack_arrays(conv: list[np.ndarray], label_weights: np.ndarray,
                trans_weights: np.ndarray) -> np.ndarray:
    parts = [w.ravel() for w in conv] + [label_weights.ravel(), trans_weights.ravel()]
    return np.concatenate(parts)


def pack(params: ModelParams) -> np.ndarray:
    return pack_arrays(params.conv, params.crf.label_weights, params.crf.trans_weights)


def unpack(flat: np.ndarray, arch: ConvNetArch, n_labels: int) -> ModelParams:
    expected = param_count(arch, n_labels)
    if flat.shape != (expected,):
        raise ValueError(f"expected {expected} parameters, got {flat.shape}")
    conv = []
    pos = 0
    for shape in arch.weight_shapes():
        size = int(np.prod(shape))
        conv.append(flat[pos:pos + size].reshape(shape).copy())
        pos += size
    u_size = n_labels * arch.top_dim
    label_weights = flat[pos:pos + u_size].reshape(n_labels, arch.top_dim).copy()
    pos += u_size
    trans_weights = flat[pos:].reshape(n_labels, n_labels).copy()
    return ModelParams(arch=arch, conv=conv,
                       crf=CrfParams(label_weights=label_weights,
                                     trans_weights=trans_weights))
