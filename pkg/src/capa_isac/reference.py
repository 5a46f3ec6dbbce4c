"""Max-min beam-gain design of the reference sensing waveform.

The non-convex program

    maximize  min_l  xi_l^2 |a~_l^T w|^2   subject to  ||w||^2 = P_t

is attacked with projected gradient ascent on a log-sum-exp smoothing of the
minimum, annealing the temperature geometrically, from several deterministic
starting points.
"""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .em import ApertureGeometry, Direction, Medium, polarization_gain
from .wavenumber import TruncationOrder, WaveformExpansion, steering_coefficients, synthesize, truncation_order

log = logging.getLogger(__name__)


class TargetSet(tuple):
    """Tuple of distinct :class:`Direction` objects (duplicates are dropped)."""

    def __new__(cls, directions: Sequence[Direction], tol: float = 1e-9):
        unique: list[Direction] = []
        for d in directions:
            if any(abs(d.azimuth - u.azimuth) < tol and abs(d.elevation - u.elevation) < tol for u in unique):
                warnings.warn(f"duplicate target direction {d.degrees} dropped", stacklevel=2)
                continue
            unique.append(d)
        if not unique:
            raise ValueError("at least one target direction is required")
        return super().__new__(cls, unique)

    @classmethod
    def from_degrees(cls, pairs) -> "TargetSet":
        return cls([Direction.from_degrees(a, e) for a, e in pairs])


@dataclass(frozen=True)
class OptimizerOptions:
    tau_decay: float = 0.5
    tau_floor: float = 1e-4  # relative to the starting temperature
    armijo: float = 1e-4
    max_iterations: int = 5000
    stage_iterations: int = 400
    stage_tol: float = 1e-8
    workers: int = 1


@dataclass(frozen=True)
class ReferenceDesign:
    coefficients: np.ndarray
    order: TruncationOrder
    aperture: ApertureGeometry
    targets: TargetSet
    min_gain: float
    gains: np.ndarray
    iterations: int
    final_tau: float
    converged: bool
    start_index: int = 0
    initial_min_gain: float = 0.0

    @property
    def power(self) -> float:
        return float(np.vdot(self.coefficients, self.coefficients).real)

    def waveform(self) -> WaveformExpansion:
        return synthesize(self.coefficients, self.order, self.aperture)


def gain_matrix(targets, order, aperture, medium) -> np.ndarray:
    """Rows xi_l a~_l so that |row @ w|^2 is the beam gain toward target l."""
    return np.stack(
        [polarization_gain(d) * steering_coefficients(d, order, aperture, medium) for d in targets]
    )


def target_gain(w, d: Direction, order, aperture, medium) -> float:
    a = steering_coefficients(d, order, aperture, medium)
    return polarization_gain(d) ** 2 * abs(a @ np.asarray(w)) ** 2


def _softmin(g: np.ndarray, tau: float) -> tuple[float, np.ndarray]:
    m = g.min()
    e = np.exp(-(g - m) / tau)
    s = e.sum()
    return m - tau * np.log(s), e / s


@dataclass
class _Run:
    v: np.ndarray
    beta: float
    iterations: int
    tau: float
    converged: bool
    initial_beta: float = field(default=0.0)


def _ascend(A: np.ndarray, v0: np.ndarray, opts: OptimizerOptions) -> _Run:
    """Anneal the smoothed max-min on the unit sphere; A is normalized."""
    v = v0 / np.linalg.norm(v0)
    g = np.abs(A @ v) ** 2
    best_v, best_beta = v.copy(), g.min()
    initial = best_beta
    tau0 = max(g.mean(), 1e-12)
    tau = tau0
    iters = 0
    converged = False
    while iters < opts.max_iterations:
        beta_stage_start = best_beta
        f, pi = _softmin(g, tau)
        for _ in range(opts.stage_iterations):
            if iters >= opts.max_iterations:
                break
            Av = A @ v
            d = A.conj().T @ (pi * Av)
            d -= np.vdot(v, d).real * v  # tangent component
            slope = 2 * np.vdot(d, d).real
            if slope < 1e-30:
                break
            t = 1.0
            while True:
                cand = v + t * d
                cand /= np.linalg.norm(cand)
                g_c = np.abs(A @ cand) ** 2
                f_c, pi_c = _softmin(g_c, tau)
                if f_c >= f + opts.armijo * t * slope or t < 1e-12:
                    break
                t *= 0.5
            iters += 1
            if f_c < f:
                break
            gain_f = f_c - f
            v, g, f, pi = cand, g_c, f_c, pi_c
            if g.min() > best_beta:
                best_v, best_beta = v.copy(), g.min()
            if gain_f <= 1e-13 * max(abs(f), 1e-30):
                break
        stage_gain = (best_beta - beta_stage_start) / max(best_beta, 1e-30)
        if tau <= opts.tau_floor * tau0:
            converged = stage_gain < opts.stage_tol
            break
        tau *= opts.tau_decay
    return _Run(best_v, best_beta, iters, tau, converged or iters < opts.max_iterations, initial)


def _canonical(targets) -> list[int]:
    return sorted(range(len(targets)), key=lambda i: (targets[i].azimuth, targets[i].elevation))


def maximize_min_gain(A_raw: np.ndarray, power: float, options: Optional[OptimizerOptions] = None):
    """Max-min of |A_raw[l] @ w|^2 over ||w||^2 = power.

    Rows of ``A_raw`` are assumed to be in a canonical order already.
    Returns (w, gains, run, start_index, initial_min_gain).
    """
    opts = options or OptimizerOptions()
    scale = float(np.max(np.sum(np.abs(A_raw) ** 2, axis=1)))
    if scale <= 0:
        raise ValueError("no target direction is reachable by the basis")
    A = A_raw / np.sqrt(scale)

    norms = np.linalg.norm(A, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    # uniform superposition of single-target matched beams, each weighted so
    # that its own target gain is roughly equalized
    starts = [np.sum(A.conj() / safe[:, None] ** 2, axis=0)]
    starts += [A[l].conj() for l in range(len(A)) if norms[l] > 0]
    starts = [s if np.linalg.norm(s) > 0 else A[int(np.argmax(norms))].conj() for s in starts]

    if opts.workers > 1:
        with ThreadPoolExecutor(opts.workers) as pool:
            runs = list(pool.map(lambda s: _ascend(A, s, opts), starts))
    else:
        runs = [_ascend(A, s, opts) for s in starts]

    best = 0
    for i, run in enumerate(runs):
        if run.beta > runs[best].beta:
            best = i
    run = runs[best]
    w = np.sqrt(power) * run.v / np.linalg.norm(run.v)
    gains = np.abs(A_raw @ w) ** 2
    init_beta = max(r.initial_beta for r in runs) * scale * power
    run.tau *= scale * power
    return w, gains, run, best, float(init_beta)


def design_reference(
    targets: Sequence[Direction],
    power: float,
    aperture: ApertureGeometry,
    medium: Medium,
    order: Optional[TruncationOrder] = None,
    options: Optional[OptimizerOptions] = None,
) -> ReferenceDesign:
    """Solve the max-min beam-gain problem for the reference waveform coefficients."""
    if not power > 0:
        raise ValueError("transmit power must be positive")
    targets = targets if isinstance(targets, TargetSet) else TargetSet(targets)
    order = order or truncation_order(aperture, medium)

    # order-independence: optimize in a canonical target order
    perm = _canonical(targets)
    canon = [targets[i] for i in perm]
    A_raw = gain_matrix(canon, order, aperture, medium)
    w, gains_canon, run, best, init_beta = maximize_min_gain(A_raw, power, options)
    gains = np.empty_like(gains_canon)
    gains[perm] = gains_canon
    log.debug("reference design: start %d, beta=%.6g after %d iterations", best, gains.min(), run.iterations)
    return ReferenceDesign(
        coefficients=w,
        order=order,
        aperture=aperture,
        targets=targets,
        min_gain=float(gains.min()),
        gains=gains,
        iterations=run.iterations,
        final_tau=run.tau,
        converged=run.converged,
        start_index=best,
        initial_min_gain=init_beta,
    )
