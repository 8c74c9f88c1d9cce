"""Depth error measures."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def _pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    p, g = _values(pred), _values(gt)
    if p.shape != g.shape:
        raise ContractViolation(f"shape mismatch: {p.shape} vs {g.shape}")
    return p, g


def l1_error(pred, gt) -> float:
    p, g = _pair(pred, gt)
    return float(np.mean(np.abs(p - g)))


def rmse(pred, gt) -> float:
    p, g = _pair(pred, gt)
    return float(np.sqrt(np.mean((p - g) ** 2)))


def normalized_abs_error(pred, gt, max_depth: float | None = None) -> float:
    """Mean of ``|pred - gt| / gt``.

    Pixels with ground truth above ``max_depth`` are left out when it is
    given. Returns nan if no pixel is left.
    """
    p, g = _pair(pred, gt)
    if np.any(g <= 0):
        raise ContractViolation("ground truth must be strictly positive")
    rel = np.abs(p - g) / g
    if max_depth is not None:
        rel = rel[g <= max_depth]
    return float(rel.mean()) if rel.size else float("nan")


@dataclass(frozen=True)
class MultiScaleSpec:
    scales: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.scales) != len(self.weights) or not self.scales:
            raise ContractViolation("scales and weights must be non-empty and of equal length")
        if len(set(self.scales)) != len(self.scales) or min(self.scales) < 1:
            raise ContractViolation("scales must be distinct positive integers")
        if min(self.weights) <= 0:
            raise ContractViolation("scale weights must be positive")


def average_pool(x: np.ndarray, s: int) -> np.ndarray:
    h, w = x.shape
    if h % s or w % s:
        raise ContractViolation(f"scale {s} does not divide image size {x.shape}")
    return x.reshape(h // s, s, w // s, s).mean(axis=(1, 3))


def multiscale_l1(pred_pyramid, gt, spec: MultiScaleSpec) -> float:
    """Weighted sum over scales of the mean absolute error against pooled ground truth.

    ``pred_pyramid[k]`` is the prediction at ``spec.scales[k]`` (already
    downsampled by that factor).
    """
    g = _values(gt)
    if len(pred_pyramid) != len(spec.scales):
        raise ContractViolation("one prediction per scale required")
    total = 0.0
    for pred, s, weight in zip(pred_pyramid, spec.scales, spec.weights):
        total += weight * l1_error(pred, average_pool(g, s))
    return total
