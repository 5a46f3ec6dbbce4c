"""Batch command-line front-end: ``capa-isac <command> --config cfg.json``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig, default_config, load_scenario
from .core import BracketError, solve
from .evaluation import BerSetup, TrialFailure, beampattern, ismr, simulate_ber
from .reference import design_reference
from .spda import discretize, spda_solve
from .wavenumber import write_coefficients_csv

log = logging.getLogger("capa_isac")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
COMMANDS = ("reference", "solve", "sweep", "beampattern", "ismr", "ber")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    code_version: str = __version__
    started_utc: str = ""
    finished_utc: str = ""
    outputs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "code_version": self.code_version,
            "seed": self.seed,
            "started_utc": self.started_utc,
            "finished_utc": self.finished_utc,
            "outputs": self.outputs,
        }


class Run:
    """Output directory bookkeeping: every written file lands in the manifest."""

    def __init__(self, command: str, cfg: ScenarioConfig, out: Path, plots: bool):
        self.cfg = cfg
        self.out = out
        self.plots = plots
        self.files: list[Path] = []
        self.manifest = RunManifest(command, cfg.config_hash, int(cfg.seed))
        self.manifest.started_utc = _now()
        out.mkdir(parents=True, exist_ok=True)

    @property
    def header(self) -> list[str]:
        return [f"config_hash={self.cfg.config_hash}", f"command={self.manifest.command}"]

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(p)
        return p

    def write_csv(self, name: str, columns, rows) -> Path:
        p = self.path(name)
        with open(p, "w", newline="") as fh:
            for line in self.header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(v) for v in _values(r, columns)])
        return p

    def write_json(self, name: str, obj: dict) -> Path:
        p = self.path(name)
        body = dict(obj, config_hash=self.cfg.config_hash)
        p.write_text(json.dumps(_jsonable(body), sort_keys=True, indent=2) + "\n")
        return p

    def figure(self, name: str, fn, *args, **kwargs) -> None:
        if not self.plots:
            return
        fn(*args, self.path(name), **kwargs)

    def finish(self) -> Path:
        self.manifest.finished_utc = _now()
        self.manifest.outputs = [
            {"path": p.name, "sha256": hashlib.sha256(p.read_bytes()).hexdigest()} for p in self.files
        ]
        p = self.out / "manifest.json"
        p.write_text(json.dumps(self.manifest.to_dict(), sort_keys=True, indent=2) + "\n")
        return p


def _values(r, columns):
    return [r[c] for c in columns] if isinstance(r, dict) else list(r)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _arrays(args, default: tuple) -> tuple:
    if args.array is None:
        return default
    return ("capa", "spda") if args.array == "both" else (args.array,)


# --------------------------------------------------------------------------
# commands


def cmd_reference(run: Run, args) -> None:
    cfg = run.cfg
    if cfg.target_set is None:
        raise ConfigError("reference design needs at least one target")
    ref = design_reference(cfg.target_set, cfg.pt, cfg.aperture, cfg.medium)
    p = run.path("reference_coefficients.csv")
    write_coefficients_csv(p, ref.coefficients, ref.order, run.header)
    run.write_json(
        "reference_summary.json",
        {
            "order": {"mx": ref.order.mx, "my": ref.order.my, "n_modes": ref.order.n_modes},
            "power": ref.power,
            "min_gain": ref.min_gain,
            "targets": [
                {"azimuth_deg": d.degrees[0], "elevation_deg": d.degrees[1], "gain": g}
                for d, g in zip(ref.targets, ref.gains)
            ],
            "iterations": ref.iterations,
            "converged": ref.converged,
        },
    )


def _reference_for(cfg: ScenarioConfig, cache: dict):
    if cfg.target_set is None:
        return None
    key = (cfg.frequency_hz, cfg.aperture.lx, cfg.aperture.ly, cfg.pt)
    if key not in cache:
        cache[key] = design_reference(cfg.target_set, cfg.pt, cfg.aperture, cfg.medium)
    return cache[key]


def _solve_one(cfg: ScenarioConfig, array_type: str, trial: int, rho: float, spda_ref: str, cache: dict):
    sc = cfg.scenario(trial, rho)
    ref = _reference_for(cfg, cache)
    if array_type == "capa":
        return sc, solve(sc, ref)
    arr = discretize(cfg.aperture, cfg.medium)
    return sc, spda_solve(arr, sc, ref, mode=spda_ref)


def cmd_solve(run: Run, args) -> None:
    cfg, cache = run.cfg, {}
    for arr in _arrays(args, ("capa",)):
        sc, sol = _solve_one(cfg, arr, 0, cfg.rho, args.spda_ref, cache)
        suffix = "" if arr == "capa" else "_spda"
        summary = sol.summary()
        summary.update(array_type=arr, rho=cfg.rho, power=cfg.pt)
        run.write_json(f"solve_summary{suffix}.json", summary)
        if arr == "capa":
            j = sol.waveform
            if j.fourier is not None:
                p = run.path("waveform_fourier.csv")
                write_coefficients_csv(p, j.fourier, j.order, run.header)
            if j.channel is not None:
                run.write_csv(
                    "waveform_channel.csv", ["k", "re", "im"],
                    [(k, b.real, b.imag) for k, b in enumerate(j.channel)],
                )
        else:
            x, pos = sol.waveform.x, sol.waveform.array.positions
            run.write_csv(
                "waveform_spda.csv", ["n", "x_m", "y_m", "re", "im"],
                [(n, pos[n, 0], pos[n, 1], v.real, v.imag) for n, v in enumerate(x)],
            )


def _parse_sweep(args, cfg: ScenarioConfig):
    if args.sweep:
        var, _, vals = args.sweep.partition("=")
        try:
            values = [float(v) for v in vals.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"cannot parse sweep values {vals!r}") from None
        sweep = {"variable": var.strip(), "values": values}
        cfg = cfg.with_overrides(sweep=sweep)
    if cfg.sweep is None:
        raise ConfigError("sweep needs a non-empty list (config 'sweep' or --sweep VAR=v1,v2,...)")
    return cfg, cfg.sweep["variable"], [float(v) for v in cfg.sweep["values"]]


def _variant(cfg: ScenarioConfig, var: str, value: float) -> ScenarioConfig:
    if var == "rho":
        return cfg.with_overrides(rho=value)
    if var == "frequency_hz":
        return cfg.with_overrides(frequency_hz=value)
    side = math.sqrt(value)
    return cfg.with_overrides(aperture={"lx_m": side, "ly_m": side})


def cmd_sweep(run: Run, args) -> None:
    cfg, var, values = _parse_sweep(args, run.cfg)
    n_trials = int(cfg.trials) if cfg.random_users else 1
    rows, cache = [], {}
    for arr in _arrays(args, ("capa", "spda")):
        for value in values:
            v_cfg = _variant(cfg, var, value)
            acc = np.zeros(3)
            for t in range(n_trials):
                _, sol = _solve_one(v_cfg, arr, t, v_cfg.rho, args.spda_ref, cache)
                acc += (sol.f_c, sol.f_s, sol.objective)
            f_c, f_s, obj = acc / n_trials
            rows.append(dict(sweep_var=var, value=value, array_type=arr, f_c=f_c, f_s=f_s, objective=obj, trials=n_trials))
    run.write_csv("tradeoff.csv", ["sweep_var", "value", "array_type", "f_c", "f_s", "objective", "trials"], rows)
    if run.plots:
        from .plotting import plot_tradeoff

        run.figure("tradeoff.png", plot_tradeoff, rows, var)


def _radiator(cfg, arr, rho, spda_ref, cache):
    _, sol = _solve_one(cfg, arr, 0, rho, spda_ref, cache)
    return sol.waveform


def cmd_beampattern(run: Run, args) -> None:
    cfg, cache = run.cfg, {}
    bp = cfg.beampattern
    targets = cfg.target_set or ()
    run.write_csv(
        "beampattern_targets.csv", ["theta_deg", "phi_deg"], [d.degrees for d in targets]
    )
    for arr in _arrays(args, ("capa",)):
        for rho in cfg.rhos:
            j = _radiator(cfg, arr, rho, args.spda_ref, cache)
            grid = beampattern(
                j, cfg.scenario(0, rho), tuple(bp["theta_range_deg"]), tuple(bp["phi_range_deg"]), float(bp["step_deg"])
            )
            name = f"beampattern_{arr}_rho{rho:g}"
            run.write_csv(f"{name}.csv", ["theta_deg", "phi_deg", "gain"], grid.rows())
            if run.plots:
                from .plotting import plot_beampattern

                run.figure(f"{name}.png", plot_beampattern, grid, targets, title=f"{arr}, rho={rho:g}")


def cmd_ismr(run: Run, args) -> None:
    cfg, cache = run.cfg, {}
    if cfg.target_set is None:
        raise ConfigError("ISMR needs at least one target")
    bp = cfg.beampattern
    rows = []
    for arr in _arrays(args, ("capa", "spda")):
        for rho in cfg.rhos:
            j = _radiator(cfg, arr, rho, args.spda_ref, cache)
            grid = beampattern(
                j, cfg.scenario(0, rho), tuple(bp["theta_range_deg"]), tuple(bp["phi_range_deg"]), float(bp["step_deg"])
            )
            rows.append(dict(rho=rho, array_type=arr, ismr_db=ismr(grid, cfg.target_set, float(cfg.ismr_halfwidth_deg))))
    run.write_csv("ismr.csv", ["rho", "array_type", "ismr_db"], rows)
    if run.plots:
        from .plotting import plot_ismr

        run.figure("ismr.png", plot_ismr, rows)


BER_COLUMNS = ["snr_db", "rho", "constellation", "trials", "bits", "bit_errors", "ber", "ber_db"]


def cmd_ber(run: Run, args) -> None:
    cfg = run.cfg
    if not cfg.random_users:
        raise ConfigError("ber draws users per trial and needs a random user placement object")
    const = cfg.constellation()
    ref = _reference_for(cfg, {})
    all_rows = []
    for arr in _arrays(args, ("capa",)):
        rows = []
        for rho in cfg.rhos:
            setup = BerSetup(
                cfg.aperture, cfg.medium, cfg.target_set, cfg.pt, rho, cfg.n_users, cfg.disk,
                int(cfg.quadrature_n), arr, args.spda_ref,
            )
            report = simulate_ber(
                setup, const, cfg.snr_db, int(cfg.trials), int(cfg.symbols_per_trial), int(cfg.seed),
                ref if rho < 1 else None,
            )
            rows += report.rows
        run.write_csv(f"ber_{arr}.csv", BER_COLUMNS, rows)
        all_rows += [dict(r, array_type=arr) for r in rows]
    if run.plots:
        from .plotting import plot_ber

        run.figure("ber.png", plot_ber, all_rows)


HANDLERS = {
    "reference": cmd_reference,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "beampattern": cmd_beampattern,
    "ismr": cmd_ismr,
    "ber": cmd_ber,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="capa-isac", description="CAPA ISAC waveform design and evaluation")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON scenario file (omit for the default scenario)")
    p.add_argument("--array", choices=("capa", "spda", "both"), default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out")
    p.add_argument("--trials", type=int)
    p.add_argument("--quadrature-n", type=int, dest="quadrature_n")
    p.add_argument("--symbol-energy", type=float, dest="symbol_energy")
    p.add_argument("--spda-ref", choices=("resample", "native"), default="resample", dest="spda_ref")
    p.add_argument("--sweep", help="sweep VAR=v1,v2,... with VAR in rho|frequency_hz|aperture_m2")
    p.add_argument("--rho", type=float, action="append", dest="rho_values",
                   help="rho value(s) for beampattern/ismr/ber; repeat for several")
    p.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        cfg = load_scenario(args.config) if args.config else default_config()
        cfg = cfg.with_overrides(
            seed=args.seed, trials=args.trials, quadrature_n=args.quadrature_n,
            symbol_energy=args.symbol_energy, rho_values=args.rho_values,
        )
        run = Run(args.command, cfg, Path(args.out), plots=not args.no_plots)
        HANDLERS[args.command](run, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BracketError, TrialFailure) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        # domain validation outside the config schema (e.g. geometry)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = run.finish()
    log.info("%s finished in %.2f s", args.command, time.perf_counter() - t0)
    print(f"{args.command}: wrote {len(run.files)} files, manifest {manifest}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
