"""Truncated Fourier (wavenumber-domain) representation of aperture currents.

Modes m = (m_x, m_y) with |m_x| <= M_x, |m_y| <= M_y are stored row-major:
m_x is the slow index, m_y the fast one.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .em import ApertureGeometry, Direction, Medium, channel_matrix, propagation_vector
from .quadrature import QuadratureRule, aperture_nodes


@dataclass(frozen=True)
class TruncationOrder:
    mx: int
    my: int

    def __post_init__(self):
        if self.mx < 0 or self.my < 0:
            raise ValueError("truncation orders must be non-negative")

    @property
    def n_modes(self) -> int:
        return (2 * self.mx + 1) * (2 * self.my + 1)

    def modes(self) -> np.ndarray:
        """(M_F, 2) integer array of mode pairs in storage order."""
        mx = np.arange(-self.mx, self.mx + 1)
        my = np.arange(-self.my, self.my + 1)
        gx, gy = np.meshgrid(mx, my, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def index(self, mx: int, my: int) -> int:
        if abs(mx) > self.mx or abs(my) > self.my:
            raise IndexError(f"mode ({mx}, {my}) outside truncation {self}")
        return (mx + self.mx) * (2 * self.my + 1) + (my + self.my)


def truncation_order(aperture: ApertureGeometry, medium: Medium) -> TruncationOrder:
    # the small slack keeps exact multiples (L = n lambda) from rounding up
    mx = math.ceil(aperture.lx / medium.wavelength - 1e-9)
    my = math.ceil(aperture.ly / medium.wavelength - 1e-9)
    return TruncationOrder(max(mx, 1), max(my, 1))


def fourier_basis(order: TruncationOrder, points, aperture: ApertureGeometry) -> np.ndarray:
    """psi_m(s) for all modes at all points, shape (P, M_F)."""
    pts = np.asarray(points, dtype=float)
    modes = order.modes()
    phase = 2 * np.pi * (
        np.outer(pts[:, 0], modes[:, 0]) / aperture.lx + np.outer(pts[:, 1], modes[:, 1]) / aperture.ly
    )
    return np.exp(1j * phase) / np.sqrt(aperture.area)


def fourier_basis_eval(m: tuple[int, int], s, aperture: ApertureGeometry) -> complex:
    s = np.asarray(s, dtype=float)
    phase = 2 * np.pi * (m[0] * s[0] / aperture.lx + m[1] * s[1] / aperture.ly)
    return complex(np.exp(1j * phase) / np.sqrt(aperture.area))


def _sinc(x: np.ndarray) -> np.ndarray:
    # numpy's sinc is sin(pi x)/(pi x)
    return np.sinc(x / np.pi)


def steering_coefficients(
    d: Direction, order: TruncationOrder, aperture: ApertureGeometry, medium: Medium
) -> np.ndarray:
    """Closed-form projections  a~_m = int a(d, s) psi_m(s) ds."""
    k = propagation_vector(d)
    return steering_coefficients_k(np.array([k[0]]), np.array([k[1]]), order, aperture, medium)[0]


def steering_coefficients_k(kx, ky, order: TruncationOrder, aperture: ApertureGeometry, medium: Medium) -> np.ndarray:
    """a~ for many directions given by direction-cosine arrays; shape (D, M_F).

    Each mode integral separates into two 1-D integrals of a complex
    exponential over a centered interval, giving L sinc(u L / 2) per axis.
    """
    modes = order.modes()
    ux = 2 * np.pi * (np.asarray(kx)[:, None] / medium.wavelength + modes[:, 0] / aperture.lx)
    uy = 2 * np.pi * (np.asarray(ky)[:, None] / medium.wavelength + modes[:, 1] / aperture.ly)
    return (
        aperture.lx * _sinc(ux * aperture.lx / 2) * aperture.ly * _sinc(uy * aperture.ly / 2)
        / np.sqrt(aperture.area)
    ).astype(complex)


def steering_coefficient_matrix(directions, order, aperture, medium) -> np.ndarray:
    """Rows are a~(d) for each direction, shape (D, M_F)."""
    return np.stack([steering_coefficients(d, order, aperture, medium) for d in directions])


@dataclass(frozen=True)
class WaveformExpansion:
    """j(s) = sum_m w_m psi_m(s) + sum_k beta_k conj(H_k(s)).

    ``channel`` is indexed by user position in whatever user sequence is passed
    to :meth:`evaluate`; the expansion itself stores no channel samples.
    """

    aperture: ApertureGeometry
    order: Optional[TruncationOrder] = None
    fourier: Optional[np.ndarray] = None
    channel: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.fourier is None and self.channel is None:
            raise ValueError("waveform expansion needs a Fourier part or a channel part")
        if self.fourier is not None:
            if self.order is None:
                raise ValueError("Fourier part requires a truncation order")
            w = np.asarray(self.fourier, dtype=complex)
            if w.shape != (self.order.n_modes,):
                raise ValueError(f"expected {self.order.n_modes} coefficients, got {w.shape}")
            object.__setattr__(self, "fourier", w)
        if self.channel is not None:
            object.__setattr__(self, "channel", np.asarray(self.channel, dtype=complex))

    def scaled(self, alpha: complex) -> "WaveformExpansion":
        return WaveformExpansion(
            self.aperture,
            self.order,
            None if self.fourier is None else alpha * self.fourier,
            None if self.channel is None else alpha * self.channel,
        )

    def evaluate(self, points, users: Sequence = (), medium: Optional[Medium] = None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(pts), dtype=complex)
        if self.fourier is not None:
            out += fourier_basis(self.order, pts, self.aperture) @ self.fourier
        if self.channel is not None and np.any(self.channel != 0):
            if len(users) != len(self.channel) or medium is None:
                raise ValueError(
                    f"channel part references {len(self.channel)} users; "
                    f"got {len(users)} users and medium={medium}"
                )
            out += self.channel @ np.conj(channel_matrix(users, pts, medium))
        return out


def synthesize(w, order: TruncationOrder, aperture: ApertureGeometry) -> WaveformExpansion:
    w = np.asarray(w, dtype=complex)
    if w.shape != (order.n_modes,):
        raise ValueError(f"coefficient length {w.shape} does not match {order.n_modes} modes")
    if not np.any(w):
        raise ValueError("all-zero coefficients do not define a waveform")
    return WaveformExpansion(aperture, order, w)


def waveform_eval(j: WaveformExpansion, s, users: Sequence = (), medium: Optional[Medium] = None):
    pts = np.asarray(s, dtype=float)
    values = j.evaluate(np.atleast_2d(pts), users, medium)
    return complex(values[0]) if pts.ndim == 1 else values


def waveform_power(
    j: WaveformExpansion, rule: QuadratureRule, users: Sequence = (), medium: Optional[Medium] = None
) -> float:
    """int |j(s)|^2 ds by tensor Gauss-Legendre quadrature."""
    nodes = aperture_nodes(j.aperture, rule)
    vals = j.evaluate(nodes.points, users, medium)
    return float(np.sum(nodes.weights * np.abs(vals) ** 2))


def write_coefficients_csv(path, w, order: TruncationOrder, header: Sequence[str] = ()) -> None:
    """Write Fourier coefficients as rows (m_x, m_y, re, im)."""
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["m_x", "m_y", "re", "im"])
        for (mx, my), c in zip(order.modes(), np.asarray(w)):
            writer.writerow([int(mx), int(my), f"{c.real:.12g}", f"{c.imag:.12g}"])


def read_coefficients_csv(path) -> tuple[np.ndarray, TruncationOrder]:
    rows = []
    with open(path) as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        next(reader)
        for row in reader:
            rows.append((int(row[0]), int(row[1]), float(row[2]), float(row[3])))
    arr = np.array(rows)
    order = TruncationOrder(int(arr[:, 0].max()), int(arr[:, 1].max()))
    w = np.zeros(order.n_modes, dtype=complex)
    for mx, my, re, im in rows:
        w[order.index(mx, my)] = re + 1j * im
    return w, order
