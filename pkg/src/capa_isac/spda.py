"""Half-wavelength discrete array baseline.

Channels are sampled at the element positions and weighted by sqrt(dA), so
that H x approximates int H(s) j(s) ds and ||x||^2 plays the role of the
aperture power. The optimal weights then obey the finite-dimensional version
of the continuous stationarity condition,

    (mu I + rho H^H H) x = rho H^H c + (1 - rho) x_d,   ||x||^2 = P_t,

which reduces to the same K x K system with Q = H H^H and u = H x_d.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import BISECTION_TOL, CorrelationData, Scenario, solve_multiplier, z_of_mu
from .em import ApertureGeometry, Direction, Medium, channel_matrix, polarization_gain, propagation_vector
from .reference import ReferenceDesign, _canonical, design_reference, maximize_min_gain


@dataclass(frozen=True)
class DiscreteArray:
    positions: np.ndarray  # (N_a, 2)
    spacing: float
    element_area: float
    shape: tuple

    @property
    def n_elements(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class DiscreteWaveform:
    x: np.ndarray
    array: DiscreteArray


@dataclass(frozen=True)
class SpdaSolution:
    mu: float
    z: np.ndarray
    waveform: DiscreteWaveform
    reference: np.ndarray
    f_c: float
    f_s: float
    objective: float
    iterations: int
    rho: float

    def summary(self) -> dict:
        return {
            "array_type": "spda",
            "mu_star": self.mu,
            "z": [[float(v.real), float(v.imag)] for v in self.z],
            "f_c": self.f_c,
            "f_s": self.f_s,
            "objective": self.objective,
            "bisection_iters": self.iterations,
        }


def discretize(aperture: ApertureGeometry, medium: Medium) -> DiscreteArray:
    """Centered lambda/2 grid; n = floor(L / (lambda/2)) + 1 elements per axis."""
    d = medium.wavelength / 2
    if aperture.lx < d - 1e-12 or aperture.ly < d - 1e-12:
        raise ValueError("aperture must be at least half a wavelength on each side")
    nx = math.floor(aperture.lx / d + 1e-9) + 1
    ny = math.floor(aperture.ly / d + 1e-9) + 1
    xs = (np.arange(nx) - (nx - 1) / 2) * d
    ys = (np.arange(ny) - (ny - 1) / 2) * d
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    positions = np.column_stack([gx.ravel(), gy.ravel()])
    return DiscreteArray(positions, d, aperture.area / (nx * ny), (nx, ny))


def spda_channels(array: DiscreteArray, users: Sequence, medium: Medium) -> np.ndarray:
    return channel_matrix(users, array.positions, medium) * np.sqrt(array.element_area)


def steering_rows(directions, array: DiscreteArray, medium: Medium) -> np.ndarray:
    """Rows xi(d) a(d, s_n) sqrt(dA): |row @ x|^2 is the discrete beam gain."""
    rows = []
    for d in directions:
        k = propagation_vector(d)
        phase = medium.wavenumber * (array.positions[:, 0] * k[0] + array.positions[:, 1] * k[1])
        rows.append(polarization_gain(d) * np.exp(1j * phase) * np.sqrt(array.element_area))
    return np.stack(rows)


def discrete_reference(
    array: DiscreteArray,
    scenario: Scenario,
    reference: Optional[ReferenceDesign] = None,
    mode: str = "resample",
) -> np.ndarray:
    """Reference weights x_d with ||x_d||^2 = P_t.

    ``resample`` samples the continuous reference at the elements; ``native``
    reruns the max-min design on the discrete steering vectors.
    """
    power = scenario.power
    if mode == "resample":
        if reference is None:
            reference = design_reference(scenario.targets, power, scenario.aperture, scenario.medium)
        xd = reference.waveform().evaluate(array.positions) * np.sqrt(array.element_area)
    elif mode == "native":
        targets = scenario.targets
        perm = _canonical(targets)
        A = steering_rows([targets[i] for i in perm], array, scenario.medium)
        xd, *_ = maximize_min_gain(A, power)
    else:
        raise ValueError(f"unknown SPDA reference mode {mode!r}")
    return xd * np.sqrt(power) / np.linalg.norm(xd)


def spda_solve(
    array: DiscreteArray,
    scenario: Scenario,
    reference: Optional[ReferenceDesign] = None,
    mode: str = "resample",
    x_d: Optional[np.ndarray] = None,
    tol: float = BISECTION_TOL,
) -> SpdaSolution:
    rho, power = scenario.rho, scenario.power
    H = spda_channels(array, scenario.users, scenario.medium)
    if x_d is None:
        if scenario.targets:
            x_d = discrete_reference(array, scenario, reference, mode)
        else:
            x_d = np.zeros(array.n_elements, dtype=complex)
    c = scenario.symbols
    Q = H @ H.conj().T
    data = CorrelationData(0.5 * (Q + Q.conj().T), H @ x_d, c)
    mu, iters = solve_multiplier(data, rho, power, tol)
    z = z_of_mu(mu, data, rho)
    x = (rho * H.conj().T @ (c - z) + (1 - rho) * x_d) / mu
    hx = H @ x
    f_c = float(np.sum(np.abs(hx - c) ** 2))
    f_s = float(np.sum(np.abs(x - x_d) ** 2))
    return SpdaSolution(
        mu=mu, z=hx, waveform=DiscreteWaveform(x, array), reference=x_d,
        f_c=f_c, f_s=f_s, objective=rho * f_c + (1 - rho) * f_s, iterations=iters, rho=rho,
    )


def stationarity_residual(sol: SpdaSolution, scenario: Scenario) -> float:
    H = spda_channels(sol.waveform.array, scenario.users, scenario.medium)
    x, rho = sol.waveform.x, scenario.rho
    r = sol.mu * x + rho * H.conj().T @ (H @ x) - rho * H.conj().T @ scenario.symbols - (1 - rho) * sol.reference
    return float(np.linalg.norm(r) / np.linalg.norm(x))
