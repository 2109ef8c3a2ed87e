"""Losses of (start state, end state) and the Hessian result record.

A :class:`TwoPointLoss` carries the scalar T(pos0, pos1) together with its
five partial-derivative blocks.  Index convention for the mixed block:
``t01(pos0, pos1)[a, b] = d2 T / d pos0_a d pos1_b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

__all__ = ["TwoPointLoss", "HessianResult", "HessianMethod", "l2_loss", "endpoint_loss"]


@dataclass(frozen=True)
class TwoPointLoss:
    value: Callable[[np.ndarray, np.ndarray], float]
    t0_grad: Callable[[np.ndarray, np.ndarray], np.ndarray]
    t1_grad: Callable[[np.ndarray, np.ndarray], np.ndarray]
    t00: Callable[[np.ndarray, np.ndarray], np.ndarray]
    t01: Callable[[np.ndarray, np.ndarray], np.ndarray]
    t11: Callable[[np.ndarray, np.ndarray], np.ndarray]


class HessianMethod(Enum):
    DP = "dp"
    BP2 = "bp2"
    FD = "fd"


@dataclass(frozen=True)
class HessianResult:
    value: float
    gradient: np.ndarray
    hessian_raw: np.ndarray
    hessian_sym: np.ndarray
    asymmetry: float            # |H - H^T|_inf, recorded before symmetrizing
    method: HessianMethod

    @staticmethod
    def from_raw(value, gradient, hessian, method) -> "HessianResult":
        hessian = np.asarray(hessian, dtype=float)
        asym = float(np.max(np.abs(hessian - hessian.T))) if hessian.size else 0.0
        return HessianResult(
            value=float(value),
            gradient=np.asarray(gradient, dtype=float),
            hessian_raw=hessian,
            hessian_sym=0.5 * (hessian + hessian.T),
            asymmetry=asym,
            method=HessianMethod(method),
        )


def l2_loss() -> TwoPointLoss:
    """Squared coordinate distance Sum_a (pos0_a - pos1_a)^2."""

    def value(p0, p1):
        d = p0 - p1
        return float(d @ d)

    eye = np.eye

    return TwoPointLoss(
        value=value,
        t0_grad=lambda p0, p1: 2.0 * (p0 - p1),
        t1_grad=lambda p0, p1: -2.0 * (p0 - p1),
        t00=lambda p0, p1: 2.0 * eye(len(p0)),
        t01=lambda p0, p1: -2.0 * eye(len(p0)),
        t11=lambda p0, p1: 2.0 * eye(len(p0)),
    )


def endpoint_loss() -> TwoPointLoss:
    """Squared coordinate distance of the endpoint from the origin."""

    def value(p0, p1):
        return float(p1 @ p1)

    def zeros_vec(p0, p1):
        return np.zeros(len(p0))

    def zeros_mat(p0, p1):
        return np.zeros((len(p0), len(p0)))

    return TwoPointLoss(
        value=value,
        t0_grad=zeros_vec,
        t1_grad=lambda p0, p1: 2.0 * p1,
        t00=zeros_mat,
        t01=zeros_mat,
        t11=lambda p0, p1: 2.0 * np.eye(len(p0)),
    )
