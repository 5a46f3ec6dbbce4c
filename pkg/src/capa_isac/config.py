"""JSON scenario configuration with defaults and validation."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .core import Scenario
from .em import ApertureGeometry, Medium, User
from .evaluation import UserDisk, constellation, trial_streams
from .reference import TargetSet


class ConfigError(ValueError):
    """Raised for unparsable or invalid configuration files."""


DEFAULTS: dict[str, Any] = {
    "frequency_hz": 2.4e9,
    "aperture": {"lx_m": 0.6, "ly_m": 0.6},
    "power": {"pt": 5.0},
    "rho": 0.5,
    "quadrature_n": 20,
    "targets": [
        {"azimuth_deg": 45.0, "elevation_deg": 15.0},
        {"azimuth_deg": -60.0, "elevation_deg": 45.0},
        {"azimuth_deg": 30.0, "elevation_deg": 60.0},
    ],
    "users": {"count": 4, "disk_center_m": [20.0, -20.0, 30.0], "disk_radius_m": 10.0},
    "snr_db": [10.0],
    "constellation": "QPSK",
    "trials": 1000,
    "seed": 0,
    # extensions beyond the core parameter set
    "symbols_per_trial": 128,
    "symbol_energy": 1.0,
    "rho_values": None,
    "sweep": None,
    "beampattern": {"theta_range_deg": [-90.0, 90.0], "phi_range_deg": [0.0, 90.0], "step_deg": 1.0},
    "ismr_halfwidth_deg": 10.0,
}

SWEEP_VARIABLES = ("rho", "frequency_hz", "aperture_m2")


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated configuration; ``raw`` holds the fully resolved JSON tree."""

    raw: dict = field(repr=False)

    def __getattr__(self, name):
        raw = object.__getattribute__(self, "raw")
        if name in raw:
            return raw[name]
        raise AttributeError(name)

    @property
    def aperture(self) -> ApertureGeometry:
        a = self.raw["aperture"]
        return ApertureGeometry(float(a["lx_m"]), float(a["ly_m"]))

    @property
    def medium(self) -> Medium:
        return Medium.from_frequency(float(self.raw["frequency_hz"]))

    @property
    def pt(self) -> float:
        return float(self.raw["power"]["pt"])

    @property
    def target_set(self) -> Optional[TargetSet]:
        t = self.raw["targets"]
        if not t:
            return None
        return TargetSet.from_degrees([(d["azimuth_deg"], d["elevation_deg"]) for d in t])

    @property
    def random_users(self) -> bool:
        return isinstance(self.raw["users"], dict)

    @property
    def disk(self) -> UserDisk:
        u = self.raw["users"]
        return UserDisk(tuple(float(v) for v in u["disk_center_m"]), float(u["disk_radius_m"]))

    @property
    def n_users(self) -> int:
        u = self.raw["users"]
        return int(u["count"]) if isinstance(u, dict) else len(u)

    @property
    def rhos(self) -> list[float]:
        values = self.raw.get("rho_values")
        return [float(r) for r in values] if values else [float(self.raw["rho"])]

    def constellation(self):
        return constellation(self.raw["constellation"], float(self.raw["symbol_energy"]))

    def users_for_trial(self, trial: int = 0) -> list[User]:
        """Explicit users as listed, or a reproducible random draw for ``trial``."""
        if not self.random_users:
            out = []
            for u in self.raw["users"]:
                sym = u.get("symbol", [1.0, 0.0])
                pol = u.get("polarization")
                kwargs = {} if pol is None else {"polarization": np.asarray(pol, dtype=float)}
                out.append(User(np.asarray(u["position_m"], dtype=float), symbol=complex(sym[0], sym[1]), **kwargs))
            return out
        rng_pos, rng_sym, _ = trial_streams(int(self.raw["seed"]), trial)
        positions = self.disk.sample(rng_pos, self.n_users)
        const = self.constellation()
        symbols = const.points[rng_sym.integers(0, const.order, size=self.n_users)]
        return [User(p, symbol=complex(s)) for p, s in zip(positions, symbols)]

    def scenario(self, trial: int = 0, rho: Optional[float] = None) -> Scenario:
        return Scenario(
            aperture=self.aperture,
            medium=self.medium,
            users=tuple(self.users_for_trial(trial)),
            targets=self.target_set,
            power=self.pt,
            rho=float(self.raw["rho"] if rho is None else rho),
            quadrature_order=int(self.raw["quadrature_n"]),
        )

    def with_overrides(self, **changes) -> "ScenarioConfig":
        raw = copy.deepcopy(self.raw)
        raw.update({k: v for k, v in changes.items() if v is not None})
        return ScenarioConfig(validate(raw))

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def _merge(defaults: dict, given: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        where = f"{path}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown field {where!r}")
        if isinstance(defaults[key], dict) and isinstance(value, dict) and key != "sweep":
            out[key] = _merge(defaults[key], value, where + ".")
        else:
            out[key] = value
    return out


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _number(value, name: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return float(value)


def validate(raw: dict) -> dict:
    """Check every invariant; returns ``raw`` unchanged when valid."""
    _number(raw["frequency_hz"], "frequency_hz", positive=True)
    for k in ("lx_m", "ly_m"):
        _number(raw["aperture"][k], f"aperture.{k}", positive=True)
    _number(raw["power"]["pt"], "power.pt", positive=True)
    rho = _number(raw["rho"], "rho")
    _require(0.0 <= rho <= 1.0, "rho must lie in [0,1]")
    if raw["rho_values"] is not None:
        _require(isinstance(raw["rho_values"], list) and raw["rho_values"], "rho_values must be a non-empty list")
        for r in raw["rho_values"]:
            _require(0.0 <= _number(r, "rho_values[]") <= 1.0, "rho must lie in [0,1]")
    n = raw["quadrature_n"]
    _require(isinstance(n, int) and not isinstance(n, bool) and n >= 1, "quadrature_n must be a positive integer")

    targets = raw["targets"] or []
    _require(isinstance(targets, list), "targets must be a list")
    for i, t in enumerate(targets):
        _require(isinstance(t, dict) and {"azimuth_deg", "elevation_deg"} <= set(t), f"targets[{i}] needs azimuth_deg and elevation_deg")
        az = _number(t["azimuth_deg"], f"targets[{i}].azimuth_deg")
        el = _number(t["elevation_deg"], f"targets[{i}].elevation_deg")
        _require(-180.0 <= az <= 180.0 and 0.0 <= el <= 90.0, f"targets[{i}] lies outside the radiating half-space")
    rhos = raw["rho_values"] or [rho]
    _require(bool(targets) or all(r >= 1.0 for r in rhos + [rho]), "targets are required when rho < 1 (sensing needs at least one target)")

    users = raw["users"]
    if isinstance(users, dict):
        _require({"count", "disk_center_m", "disk_radius_m"} <= set(users), "random users need count, disk_center_m and disk_radius_m")
        c = users["count"]
        _require(isinstance(c, int) and not isinstance(c, bool) and c >= 0, "users.count must be a non-negative integer")
        _require(len(users["disk_center_m"]) == 3, "users.disk_center_m must have three coordinates")
        _require(float(users["disk_center_m"][2]) > 0, "users must lie in front of the aperture (z > 0)")
        _number(users["disk_radius_m"], "users.disk_radius_m")
        k = c
    elif isinstance(users, list):
        for i, u in enumerate(users):
            _require(isinstance(u, dict) and "position_m" in u, f"users[{i}] needs position_m")
            _require(len(u["position_m"]) == 3, f"users[{i}].position_m must have three coordinates")
            if "symbol" in u:
                _require(len(u["symbol"]) == 2, f"users[{i}].symbol must be [re, im]")
        k = len(users)
    else:
        raise ConfigError("users must be a list of users or a random-placement object")
    _require(k > 0 or all(r <= 0.0 for r in rhos + [rho]), "at least one user is required when rho > 0")

    _require(isinstance(raw["snr_db"], list) and raw["snr_db"], "snr_db must be a non-empty list")
    for s in raw["snr_db"]:
        _number(s, "snr_db[]")
    try:
        constellation(str(raw["constellation"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    t = raw["trials"]
    _require(isinstance(t, int) and not isinstance(t, bool) and t >= 1, "trials must be a positive integer")
    s = raw["seed"]
    _require(isinstance(s, int) and not isinstance(s, bool) and 0 <= s < 2**64, "seed must be an unsigned 64-bit integer")
    spt = raw["symbols_per_trial"]
    _require(isinstance(spt, int) and spt >= 1, "symbols_per_trial must be a positive integer")
    _number(raw["symbol_energy"], "symbol_energy", positive=True)
    _number(raw["ismr_halfwidth_deg"], "ismr_halfwidth_deg", positive=True)
    _number(raw["beampattern"]["step_deg"], "beampattern.step_deg", positive=True)

    sweep = raw["sweep"]
    if sweep is not None:
        _require(isinstance(sweep, dict) and {"variable", "values"} <= set(sweep), "sweep needs variable and values")
        _require(sweep["variable"] in SWEEP_VARIABLES, f"sweep.variable must be one of {SWEEP_VARIABLES}")
        _require(isinstance(sweep["values"], list) and sweep["values"], "sweep.values must be a non-empty list")
        for v in sweep["values"]:
            _number(v, "sweep.values[]")
        if sweep["variable"] == "rho":
            _require(all(0.0 <= v <= 1.0 for v in sweep["values"]), "rho must lie in [0,1]")
        else:
            _require(all(v > 0 for v in sweep["values"]), f"sweep values for {sweep['variable']} must be positive")
    return raw


def parse_config(text: str) -> ScenarioConfig:
    if text.strip():
        try:
            given = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(given, dict):
            raise ConfigError("configuration root must be a JSON object")
    else:
        given = {}
    base = DEFAULTS
    if given:
        # the default target set belongs to the default scenario only: a
        # written configuration must list its own targets whenever it senses
        base = dict(DEFAULTS, targets=[])
    return ScenarioConfig(validate(_merge(base, given)))


def load_scenario(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    return parse_config(text)


def default_config() -> ScenarioConfig:
    return parse_config("")
