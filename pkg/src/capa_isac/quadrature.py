"""Gauss-Legendre quadrature on intervals and on the rectangular aperture."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

DEFAULT_ORDER = 20


@dataclass(frozen=True)
class QuadratureRule:
    """N-point Gauss-Legendre rule on [-1, 1].

    ``nodes`` are the roots of the Legendre polynomial P_N in increasing order,
    ``weights`` the matching Christoffel weights (positive, summing to 2).
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)


@lru_cache(maxsize=64, typed=True)
def gauss_legendre_rule(order: int) -> QuadratureRule:
    """Gauss-Legendre rule of the given order (nodes and weights from numpy)."""
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)) or order < 1:
        raise ValueError(f"quadrature order must be a positive integer, got {order!r}")
    n = int(order)
    x, w = leggauss(n)
    # enforce exact symmetry, which leggauss only meets to rounding
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(n, x, w)


def integrate_interval(f: Callable, a: float, b: float, rule: QuadratureRule) -> complex:
    """Integrate ``f`` over [a, b]; ``f`` must accept an array of abscissae."""
    if not a < b:
        raise ValueError(f"interval must satisfy a < b, got [{a}, {b}]")
    half = 0.5 * (b - a)
    x = half * rule.nodes + 0.5 * (a + b)
    values = np.asarray(f(x))
    return half * np.sum(rule.weights * values)


@dataclass(frozen=True)
class ApertureNodes:
    """Tensor-product nodes on an aperture with their area weights.

    ``points`` has shape (N*N, 2) holding (s_x, s_y); ``weights`` already
    includes the L_x L_y / 4 Jacobian, so an integral is ``weights @ f(points)``.
    """

    points: np.ndarray
    weights: np.ndarray


def aperture_nodes(aperture, rule: QuadratureRule) -> ApertureNodes:
    lx, ly = aperture.lx, aperture.ly
    sx = 0.5 * lx * rule.nodes
    sy = 0.5 * ly * rule.nodes
    gx, gy = np.meshgrid(sx, sy, indexing="ij")
    wx, wy = np.meshgrid(rule.weights, rule.weights, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])
    weights = (0.25 * lx * ly) * (wx * wy).ravel()
    return ApertureNodes(points, weights)


def integrate_aperture(f: Callable, aperture, rule: QuadratureRule) -> complex:
    """Integrate ``f`` over the centered rectangle [-L_x/2, L_x/2] x [-L_y/2, L_y/2].

    ``f`` receives an (M, 2) array of surface points and returns M values.
    """
    nodes = aperture_nodes(aperture, rule)
    values = np.asarray(f(nodes.points))
    return np.sum(nodes.weights * values)
