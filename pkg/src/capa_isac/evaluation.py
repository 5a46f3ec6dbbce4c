"""Sensing and communication metrics: beampatterns, ISMR, MUI/mismatch, BER."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Scenario, correlation_data, scenario_nodes, solve_multiplier_batch
from .em import ApertureGeometry, Direction, Medium, User, channel_matrix, polarization_gain_grid
from .quadrature import aperture_nodes, gauss_legendre_rule
from .reference import ReferenceDesign, TargetSet, design_reference
from .spda import DiscreteWaveform, discrete_reference, discretize, spda_channels
from .wavenumber import WaveformExpansion, steering_coefficients_k

log = logging.getLogger(__name__)

ISMR_FLOOR_DB = -100.0
_CHUNK = 2048


# --------------------------------------------------------------------------
# beam gain and beampatterns


def _direction_cosines(az, el):
    az, el = np.asarray(az, dtype=float), np.asarray(el, dtype=float)
    return np.cos(az) * np.sin(el), np.sin(az) * np.sin(el)


def beam_gains(radiator, azimuth, elevation, scenario: Scenario) -> np.ndarray:
    """Far-field gain xi^2 |int a(d, s) j(s) ds|^2 for arrays of directions (radians)."""
    az = np.ravel(azimuth)
    el = np.ravel(elevation)
    kx, ky = _direction_cosines(az, el)
    xi2 = polarization_gain_grid(az, el) ** 2
    medium = scenario.medium
    k0 = medium.wavenumber
    out = np.zeros(len(az), dtype=complex)

    if isinstance(radiator, DiscreteWaveform):
        arr = radiator.array
        xw = radiator.x * np.sqrt(arr.element_area)
        for i in range(0, len(az), _CHUNK):
            sl = slice(i, i + _CHUNK)
            phase = k0 * (np.outer(kx[sl], arr.positions[:, 0]) + np.outer(ky[sl], arr.positions[:, 1]))
            out[sl] = np.exp(1j * phase) @ xw
        return xi2 * np.abs(out) ** 2

    j: WaveformExpansion = radiator
    if j.fourier is not None:
        for i in range(0, len(az), _CHUNK):
            sl = slice(i, i + _CHUNK)
            out[sl] += steering_coefficients_k(kx[sl], ky[sl], j.order, j.aperture, medium) @ j.fourier
    if j.channel is not None and np.any(j.channel != 0):
        nodes = aperture_nodes(j.aperture, gauss_legendre_rule(scenario.quadrature_order))
        Hc = np.conj(channel_matrix(scenario.users, nodes.points, medium))
        weighted = (Hc * nodes.weights).T @ j.channel  # (P,)
        for i in range(0, len(az), _CHUNK):
            sl = slice(i, i + _CHUNK)
            phase = k0 * (np.outer(kx[sl], nodes.points[:, 0]) + np.outer(ky[sl], nodes.points[:, 1]))
            out[sl] += np.exp(1j * phase) @ weighted
    return xi2 * np.abs(out) ** 2


def beam_gain(radiator, d: Direction, scenario: Scenario) -> float:
    return float(beam_gains(radiator, [d.azimuth], [d.elevation], scenario)[0])


@dataclass(frozen=True)
class BeampatternGrid:
    azimuth_deg: np.ndarray
    elevation_deg: np.ndarray
    gain: np.ndarray  # shape (n_azimuth, n_elevation)

    def rows(self):
        for i, a in enumerate(self.azimuth_deg):
            for k, e in enumerate(self.elevation_deg):
                yield float(a), float(e), float(self.gain[i, k])

    def cut_at_elevation(self, elevation_deg: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.elevation_deg - elevation_deg)))
        return self.gain[:, k]

    def value_at(self, azimuth_deg: float, elevation_deg: float) -> float:
        i = int(np.argmin(np.abs(self.azimuth_deg - azimuth_deg)))
        k = int(np.argmin(np.abs(self.elevation_deg - elevation_deg)))
        return float(self.gain[i, k])


def _axis(lo, hi, step):
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def beampattern(
    radiator,
    scenario: Scenario,
    azimuth_range=(-90.0, 90.0),
    elevation_range=(0.0, 90.0),
    step: float = 1.0,
) -> BeampatternGrid:
    if not step > 0:
        raise ValueError("grid step must be positive")
    az = _axis(*azimuth_range, step)
    el = _axis(*elevation_range, step)
    A, E = np.meshgrid(np.deg2rad(az), np.deg2rad(el), indexing="ij")
    g = beam_gains(radiator, A, E, scenario).reshape(A.shape)
    return BeampatternGrid(az, el, g)


def mainlobe_mask(grid: BeampatternGrid, targets: Sequence[Direction], halfwidth: float = 10.0) -> np.ndarray:
    A, E = np.meshgrid(grid.azimuth_deg, grid.elevation_deg, indexing="ij")
    mask = np.zeros(A.shape, dtype=bool)
    for d in targets:
        ta, te = d.degrees
        mask |= (np.abs(A - ta) <= halfwidth + 1e-9) & (np.abs(E - te) <= halfwidth + 1e-9)
    return mask


def ismr(grid: BeampatternGrid, targets: Sequence[Direction], halfwidth: float = 10.0) -> float:
    """Integrated sidelobe-to-mainlobe ratio in dB over the sampled grid."""
    mask = mainlobe_mask(grid, targets, halfwidth)
    if not mask.any():
        raise ValueError("no grid cell falls inside the mainlobe region; targets lie outside the grid")
    main = grid.gain[mask].sum()
    side = grid.gain[~mask].sum()
    if main <= 0:
        raise ValueError("mainlobe region carries no energy")
    if side <= 0:
        return ISMR_FLOOR_DB
    return max(ISMR_FLOOR_DB, float(10 * np.log10(side / main)))


def local_maxima(values: np.ndarray, rel_floor: float = 0.0) -> np.ndarray:
    """Indices of strict interior local maxima (plateaus count once) above ``rel_floor * max``."""
    v = np.asarray(values, dtype=float)
    peaks = []
    i = 1
    n = len(v)
    while i < n - 1:
        if v[i] > v[i - 1]:
            j = i
            while j + 1 < n and v[j + 1] == v[i]:
                j += 1
            if j + 1 < n and v[j + 1] < v[i]:
                peaks.append((i + j) // 2)
            i = j + 1
        else:
            i += 1
    peaks = np.array(peaks, dtype=int)
    if len(peaks) and rel_floor > 0:
        peaks = peaks[v[peaks] >= rel_floor * v.max()]
    return peaks


# --------------------------------------------------------------------------
# direct (quadrature) energies, used to cross-check the closed forms


def mui_energy_direct(waveform: WaveformExpansion, scenario: Scenario, order: Optional[int] = None) -> float:
    if not scenario.users:
        return 0.0
    nodes = scenario_nodes(scenario, order)
    H = channel_matrix(scenario.users, nodes.points, scenario.medium)
    j = waveform.evaluate(nodes.points, scenario.users, scenario.medium)
    z = (H * nodes.weights) @ j
    return float(np.sum(np.abs(z - scenario.symbols) ** 2))


def mismatch_energy_direct(
    waveform: WaveformExpansion, j_d: WaveformExpansion, scenario: Scenario, order: Optional[int] = None
) -> float:
    nodes = scenario_nodes(scenario, order)
    diff = waveform.evaluate(nodes.points, scenario.users, scenario.medium) - j_d.evaluate(
        nodes.points, scenario.users, scenario.medium
    )
    return float(np.sum(nodes.weights * np.abs(diff) ** 2))


# --------------------------------------------------------------------------
# constellations and BER


def _gray(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


@dataclass(frozen=True)
class Constellation:
    """Square QAM with per-axis Gray labels and unit average energy (times ``energy``)."""

    name: str
    levels: int  # per axis
    scale: float

    @property
    def order(self) -> int:
        return self.levels ** 2

    @property
    def bits_per_symbol(self) -> int:
        return 2 * int(np.log2(self.levels))

    def _amplitudes(self, idx):
        return (2 * np.asarray(idx) - (self.levels - 1)) * self.scale

    @property
    def points(self) -> np.ndarray:
        i = np.arange(self.order)
        return self._amplitudes(i // self.levels) + 1j * self._amplitudes(i % self.levels)

    @property
    def labels(self) -> np.ndarray:
        i = np.arange(self.order)
        half = self.bits_per_symbol // 2
        return (_gray(i // self.levels) << half) | _gray(i % self.levels)

    def detect(self, y: np.ndarray) -> np.ndarray:
        """Minimum-distance decisions (per-axis slicing is exact on a square lattice)."""
        L = self.levels

        def axis(v):
            return np.clip(np.rint((v / self.scale + (L - 1)) / 2), 0, L - 1).astype(np.int64)

        return axis(y.real) * L + axis(y.imag)


CONSTELLATIONS = {"QPSK": 2, "16QAM": 4, "64QAM": 8}


def constellation(name: str, energy: float = 1.0) -> Constellation:
    key = name.upper()
    if key not in CONSTELLATIONS:
        raise ValueError(f"unknown constellation {name!r}; choose from {sorted(CONSTELLATIONS)}")
    L = CONSTELLATIONS[key]
    mean_energy = 2 * (L * L - 1) / 3
    return Constellation(key, L, float(np.sqrt(energy / mean_energy)))


_POPCOUNT = np.array([bin(i).count("1") for i in range(64)], dtype=np.int64)


def bit_errors(c: Constellation, sent: np.ndarray, detected: np.ndarray) -> int:
    labels = c.labels
    return int(_POPCOUNT[labels[sent] ^ labels[detected]].sum())


@dataclass
class BerReport:
    rows: list = field(default_factory=list)

    def add(self, snr_db, rho, name, trials, symbols, bits, errors):
        ber = errors / bits if bits else float("nan")
        self.rows.append(
            dict(
                snr_db=float(snr_db), rho=float(rho), constellation=name, trials=int(trials),
                symbols=int(symbols), bits=int(bits), bit_errors=int(errors), ber=ber,
                ber_db=float(10 * np.log10(ber)) if ber > 0 else float("-inf"),
            )
        )

    def ber(self, snr_db: float) -> float:
        for r in self.rows:
            if abs(r["snr_db"] - snr_db) < 1e-9:
                return r["ber"]
        raise KeyError(snr_db)

    def row(self, snr_db: float) -> dict:
        for r in self.rows:
            if abs(r["snr_db"] - snr_db) < 1e-9:
                return r
        raise KeyError(snr_db)

    @staticmethod
    def standard_error(row: dict) -> float:
        p, n = row["ber"], row["bits"]
        return float(np.sqrt(max(p * (1 - p), 0.0) / n))


@dataclass(frozen=True)
class UserDisk:
    center: tuple = (20.0, -20.0, 30.0)
    radius: float = 10.0

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        r = self.radius * np.sqrt(rng.uniform(size=count))
        a = rng.uniform(0, 2 * np.pi, size=count)
        cx, cy, cz = self.center
        return np.column_stack([cx + r * np.cos(a), cy + r * np.sin(a), np.full(count, cz)])


class TrialFailure(RuntimeError):
    pass


def trial_streams(seed: int, trial: int) -> list[np.random.Generator]:
    """Independent Philox streams (positions, symbols, noise) for one trial."""
    ss = np.random.SeedSequence(seed, spawn_key=(trial,))
    return [np.random.Generator(np.random.Philox(child)) for child in ss.spawn(3)]


@dataclass(frozen=True)
class BerSetup:
    aperture: ApertureGeometry
    medium: Medium
    targets: Optional[TargetSet]
    power: float = 5.0
    rho: float = 0.5
    n_users: int = 4
    disk: UserDisk = UserDisk()
    quadrature_order: int = 20
    array_type: str = "capa"
    spda_ref: str = "resample"


def _trial_correlations(setup: BerSetup, positions, reference: Optional[ReferenceDesign], xd_cache: dict):
    users = [User(p) for p in positions]
    if setup.array_type == "capa":
        nodes = aperture_nodes(setup.aperture, gauss_legendre_rule(setup.quadrature_order))
        H = channel_matrix(users, nodes.points, setup.medium)
        Hw = H * nodes.weights
        Q = Hw @ H.conj().T
        u = Hw @ reference.waveform().evaluate(nodes.points) if reference is not None else np.zeros(len(users), complex)
    elif setup.array_type == "spda":
        arr = xd_cache["array"]
        H = spda_channels(arr, users, setup.medium)
        Q = H @ H.conj().T
        xd = xd_cache.get("x_d")
        u = H @ xd if xd is not None else np.zeros(len(users), complex)
    else:
        raise ValueError(f"unknown array type {setup.array_type!r}")
    return 0.5 * (Q + Q.conj().T), u


def simulate_ber(
    setup: BerSetup,
    const: Constellation,
    snr_db: Sequence[float],
    trials: int,
    symbols_per_trial: int,
    seed: int,
    reference: Optional[ReferenceDesign] = None,
) -> BerReport:
    """Monte Carlo BER of minimum-distance detection on y_k = z_k + n_k.

    Every trial redraws user positions (uniform on the disk) and symbols, then
    solves for the optimal waveform of every symbol slot. Noise variance is
    P_t / SNR. Streams depend only on (seed, trial), so ordering is irrelevant
    to the result.
    """
    if trials < 1:
        raise ValueError("at least one trial is required")
    snr_db = list(snr_db)
    if not snr_db:
        raise ValueError("SNR list must be non-empty")
    if setup.rho < 1 and reference is None:
        reference = design_reference(setup.targets, setup.power, setup.aperture, setup.medium)

    cache = {}
    if setup.array_type == "spda":
        arr = discretize(setup.aperture, setup.medium)
        cache["array"] = arr
        if setup.targets:
            dummy = Scenario(setup.aperture, setup.medium, (), setup.targets, setup.power, 0.0, setup.quadrature_order)
            cache["x_d"] = discrete_reference(arr, dummy, reference, setup.spda_ref)

    errors = np.zeros(len(snr_db), dtype=np.int64)
    K, S = setup.n_users, symbols_per_trial
    points = const.points
    for t in range(trials):
        rng_pos, rng_sym, rng_noise = trial_streams(seed, t)
        positions = setup.disk.sample(rng_pos, K)
        sent = rng_sym.integers(0, const.order, size=(S, K))
        c = points[sent]
        noise = (rng_noise.standard_normal((S, K)) + 1j * rng_noise.standard_normal((S, K))) / np.sqrt(2)
        Q, u = _trial_correlations(setup, positions, reference, cache)
        mu, z, ok = solve_multiplier_batch(Q, u, c, setup.rho, setup.power)
        if not ok.all():
            raise TrialFailure(f"multiplier bracket failed in trial {t} (seed={seed}, spawn_key=({t},))")
        for i, snr in enumerate(snr_db):
            sigma = np.sqrt(setup.power / 10 ** (snr / 10))
            detected = const.detect(z + sigma * noise)
            errors[i] += bit_errors(const, sent, detected)

    report = BerReport()
    n_sym = trials * S * K
    for i, snr in enumerate(snr_db):
        report.add(snr, setup.rho, const.name, trials, n_sym, n_sym * const.bits_per_symbol, errors[i])
    return report
