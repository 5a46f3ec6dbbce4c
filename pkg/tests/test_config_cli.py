import csv
import hashlib
import json

import numpy as np
import pytest

from capa_isac.cli import BER_COLUMNS, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main
from capa_isac.config import ConfigError, default_config, load_scenario, parse_config
from capa_isac.evaluation import local_maxima
from capa_isac.wavenumber import read_coefficients_csv

from conftest import DEFAULT_TARGETS

TARGETS_JSON = [{"azimuth_deg": a, "elevation_deg": e} for a, e in DEFAULT_TARGETS]


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def _run(tmp_path, *argv, cfg=None, out="out"):
    args = list(argv) + ["--out", str(tmp_path / out), "--no-plots"]
    if cfg is not None:
        args += ["--config", cfg]
    return main(args), tmp_path / out


def _read_csv(path):
    lines = path.read_text().splitlines()
    header = [line for line in lines if line.startswith("#")]
    rows = list(csv.DictReader(line for line in lines if not line.startswith("#")))
    return header, rows


# ---------------------------------------------------------------- config


def test_empty_file_gives_defaults(tmp_path):
    cfg = load_scenario(_write(tmp_path, ""))
    assert cfg.raw == default_config().raw
    assert cfg.frequency_hz == 2.4e9 and cfg.pt == 5.0 and cfg.rho == 0.5
    assert (cfg.aperture.lx, cfg.aperture.ly) == (0.6, 0.6)
    assert cfg.quadrature_n == 20 and cfg.n_users == 4
    assert cfg.constellation().name == "QPSK" and cfg.snr_db == [10.0]
    assert np.allclose([d.degrees for d in cfg.target_set], DEFAULT_TARGETS)
    sc = cfg.scenario()
    assert len(sc.users) == 4 and sc.rho == 0.5 and sc.quadrature_order == 20


def test_validation_messages(tmp_path):
    with pytest.raises(ConfigError, match=r"rho must lie in \[0,1\]"):
        parse_config(json.dumps({"rho": 1.5, "targets": TARGETS_JSON}))
    with pytest.raises(ConfigError, match="targets are required"):
        parse_config(json.dumps({"rho": 0.5}))
    with pytest.raises(ConfigError, match="line 2, column"):
        parse_config('{"rho": 0.5,\n  oops}')
    with pytest.raises(ConfigError, match="unknown field 'aperture.lz_m'"):
        parse_config(json.dumps({"aperture": {"lz_m": 1}, "targets": TARGETS_JSON}))
    with pytest.raises(ConfigError, match="cannot read"):
        load_scenario(tmp_path / "missing.json")
    # communication-only configurations need no targets
    assert parse_config(json.dumps({"rho": 1.0})).target_set is None


def test_explicit_users(tmp_path):
    cfg = parse_config(json.dumps({
        "rho": 1.0,
        "users": [{"position_m": [1, 2, 30], "symbol": [0, 1], "polarization": [1, 0, 0]}],
    }))
    (u,) = cfg.users_for_trial(0)
    assert u.symbol == 1j and np.allclose(u.polarization, [1, 0, 0])


def test_random_users_reproducible():
    cfg = default_config()
    a = [u.position for u in cfg.users_for_trial(3)]
    b = [u.position for u in cfg.users_for_trial(3)]
    c = [u.position for u in cfg.users_for_trial(4)]
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert cfg.config_hash == default_config().config_hash
    assert cfg.with_overrides(seed=1).config_hash != cfg.config_hash


# ---------------------------------------------------------------- exit codes


def test_exit_codes(tmp_path):
    assert _run(tmp_path, "solve", cfg=_write(tmp_path, {"rho": 1.5}))[0] == EXIT_CONFIG
    assert _run(tmp_path, "solve", cfg=_write(tmp_path, "{bad"))[0] == EXIT_CONFIG
    assert _run(tmp_path, "solve", cfg=_write(tmp_path, {"rho": 0.3}))[0] == EXIT_CONFIG
    assert _run(tmp_path, "sweep")[0] == EXIT_CONFIG  # no sweep list
    zero_symbol = {"rho": 1.0, "users": [{"position_m": [0, 0, 20], "symbol": [0, 0]}]}
    assert _run(tmp_path, "solve", cfg=_write(tmp_path, zero_symbol))[0] == EXIT_SOLVER


# ---------------------------------------------------------------- reference


def test_reference_command(tmp_path):
    code, out = _run(tmp_path, "reference")
    assert code == EXIT_OK
    w, order = read_coefficients_csv(out / "reference_coefficients.csv")
    assert len(w) == 121 == order.n_modes
    summary = json.loads((out / "reference_summary.json").read_text())
    assert len(summary["targets"]) == 3
    assert summary["power"] == pytest.approx(5.0)


def test_reference_broadside_target_is_dc(tmp_path):
    cfg = _write(tmp_path, {"targets": [{"azimuth_deg": 0, "elevation_deg": 0}]})
    _, out = _run(tmp_path, "reference", cfg=cfg)
    w, order = read_coefficients_csv(out / "reference_coefficients.csv")
    assert abs(w[order.index(0, 0)]) ** 2 >= 0.8 * 5.0


def test_reference_duplicate_targets(tmp_path):
    single = _write(tmp_path, {"targets": TARGETS_JSON}, "a.json")
    double = _write(tmp_path, {"targets": TARGETS_JSON + TARGETS_JSON[:1]}, "b.json")
    _, o1 = _run(tmp_path, "reference", cfg=single, out="a")
    with pytest.warns(UserWarning):
        _, o2 = _run(tmp_path, "reference", cfg=double, out="b")
    w1, _ = read_coefficients_csv(o1 / "reference_coefficients.csv")
    w2, _ = read_coefficients_csv(o2 / "reference_coefficients.csv")
    assert np.array_equal(w1, w2)


# ---------------------------------------------------------------- solve


def test_solve_sensing_only(tmp_path):
    cfg = _write(tmp_path, {"rho": 0.0, "targets": TARGETS_JSON})
    _, out = _run(tmp_path, "solve", cfg=cfg)
    s = json.loads((out / "solve_summary.json").read_text())
    assert s["f_s"] <= 1e-8 * 5.0
    assert s["mu_star"] == pytest.approx(1.0, abs=1e-6)


def test_solve_summary_consistency_and_determinism(tmp_path):
    _, o1 = _run(tmp_path, "solve", "--array", "both", out="a")
    _, o2 = _run(tmp_path, "solve", "--array", "both", out="b")
    for name in ("solve_summary.json", "solve_summary_spda.json"):
        b1, b2 = (o1 / name).read_bytes(), (o2 / name).read_bytes()
        assert b1 == b2
        s = json.loads(b1)
        assert set(s) >= {"mu_star", "z", "f_c", "f_s", "objective", "bisection_iters", "config_hash"}
        rho = s["rho"]
        assert abs(s["objective"] - (rho * s["f_c"] + (1 - rho) * s["f_s"])) <= 1e-9 * abs(s["objective"])
    header, rows = _read_csv(o1 / "waveform_channel.csv")
    assert len(rows) == 4 and header[0].startswith("# config_hash=")
    _, rows = _read_csv(o1 / "waveform_spda.csv")
    assert len(rows) == 100


def test_manifest_lists_every_output(tmp_path):
    _, out = _run(tmp_path, "solve", "--array", "both")
    m = json.loads((out / "manifest.json").read_text())
    listed = {o["path"] for o in m["outputs"]}
    on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert listed == on_disk
    for o in m["outputs"]:
        assert hashlib.sha256((out / o["path"]).read_bytes()).hexdigest() == o["sha256"]
        text = (out / o["path"]).read_text()
        assert m["config_hash"] in text
    assert m["seed"] == 0 and m["command"] == "solve"


# ---------------------------------------------------------------- sweep


def test_rho_sweep_monotone(tmp_path):
    code, out = _run(tmp_path, "sweep", "--sweep", "rho=0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", "--trials", "3")
    assert code == EXIT_OK
    _, rows = _read_csv(out / "tradeoff.csv")
    for arr in ("capa", "spda"):
        f_c = [float(r["f_c"]) for r in rows if r["array_type"] == arr]
        f_s = [float(r["f_s"]) for r in rows if r["array_type"] == arr]
        assert len(f_c) == 9
        assert np.all(np.diff(f_c) <= 1e-9) and np.all(np.diff(f_s) >= -1e-9)


def test_aperture_sweep_objective_decreases(tmp_path):
    _, out = _run(tmp_path, "sweep", "--sweep", "aperture_m2=0.16,0.25,0.36,0.49,0.64", "--trials", "20", "--array", "capa")
    _, rows = _read_csv(out / "tradeoff.csv")
    obj = [float(r["objective"]) for r in rows]
    assert len(obj) == 5 and np.all(np.diff(obj) <= 0)


def test_single_point_sweep_matches_solve(tmp_path):
    _, o1 = _run(tmp_path, "sweep", "--sweep", "rho=0.5", "--trials", "1", "--array", "capa", out="a")
    _, o2 = _run(tmp_path, "solve", out="b")
    _, rows = _read_csv(o1 / "tradeoff.csv")
    s = json.loads((o2 / "solve_summary.json").read_text())
    (row,) = rows
    for k in ("f_c", "f_s", "objective"):
        assert float(row[k]) == pytest.approx(s[k], rel=1e-11)


# ---------------------------------------------------------------- beampattern / ismr / ber


def test_ber_rows_per_snr(tmp_path):
    cfg = _write(tmp_path, {"targets": TARGETS_JSON, "snr_db": [0, 10, 20], "symbols_per_trial": 8})
    code, out = _run(tmp_path, "ber", "--trials", "5", cfg=cfg)
    assert code == EXIT_OK
    header, rows = _read_csv(out / "ber_capa.csv")
    assert [float(r["snr_db"]) for r in rows] == [0, 10, 20]
    assert list(rows[0]) == BER_COLUMNS
    assert any(h.startswith("# config_hash=") for h in header)


def test_ber_needs_random_users(tmp_path):
    cfg = _write(tmp_path, {"rho": 1.0, "users": [{"position_m": [0, 0, 20]}]})
    assert _run(tmp_path, "ber", cfg=cfg)[0] == EXIT_CONFIG


def test_ismr_command_writes_rows(tmp_path):
    code, out = _run(tmp_path, "ismr", "--rho", "0.1", "--rho", "0.9")
    assert code == EXIT_OK
    _, rows = _read_csv(out / "ismr.csv")
    assert [(float(r["rho"]), r["array_type"]) for r in rows] == [
        (0.1, "capa"), (0.9, "capa"), (0.1, "spda"), (0.9, "spda")
    ]


@pytest.mark.xfail(
    strict=True,
    reason="the communication penalty saturates below rho = 0.1 at this channel scale, "
    "so the default-scenario ISMR barely moves across [0.1, 0.9] (see notes ledger)",
)
def test_ismr_grows_with_communication_weight(tmp_path):
    code, out = _run(tmp_path, "ismr", "--rho", "0.1", "--rho", "0.9", "--array", "capa")
    assert code == EXIT_OK
    _, rows = _read_csv(out / "ismr.csv")
    vals = {float(r["rho"]): float(r["ismr_db"]) for r in rows}
    assert vals[0.1] < vals[0.9]


def _theta_cut(tmp_path, freq, side, out):
    cfg = _write(tmp_path, {
        "frequency_hz": freq, "aperture": {"lx_m": side, "ly_m": side}, "rho": 0.0,
        "targets": [{"azimuth_deg": -7, "elevation_deg": 45}, {"azimuth_deg": 7, "elevation_deg": 45}],
        "beampattern": {"theta_range_deg": [-90, 90], "phi_range_deg": [45, 45], "step_deg": 0.5},
    }, out + ".json")
    code, o = _run(tmp_path, "beampattern", cfg=cfg, out=out)
    assert code == EXIT_OK
    _, rows = _read_csv(o / "beampattern_capa_rho0.csv")
    _, markers = _read_csv(o / "beampattern_targets.csv")
    assert len(markers) == 2
    theta = np.array([float(r["theta_deg"]) for r in rows])
    gain = np.array([float(r["gain"]) for r in rows])
    return theta, gain


def test_beampattern_resolution(tmp_path):
    theta, gain = _theta_cut(tmp_path, 2.4e9, 0.6, "low")
    assert len(local_maxima(gain, 0.5)) == 1
    theta, gain = _theta_cut(tmp_path, 3.5e9, 0.8, "high")
    peaks = local_maxima(gain, 0.5)
    assert len(peaks) == 2 and np.ptp(theta[peaks]) >= 8


def test_figures_rendered_and_listed(tmp_path):
    cfg = _write(tmp_path, {
        "targets": TARGETS_JSON, "symbols_per_trial": 4,
        "beampattern": {"theta_range_deg": [-90, 90], "phi_range_deg": [0, 90], "step_deg": 10},
    })
    for command, extra, png in (
        ("beampattern", [], "beampattern_capa_rho0.5.png"),
        ("sweep", ["--sweep", "rho=0.2,0.8", "--trials", "1"], "tradeoff.png"),
        ("ismr", ["--array", "capa"], "ismr.png"),
        ("ber", ["--trials", "2"], "ber.png"),
    ):
        out = tmp_path / command
        assert main([command, "--config", cfg, "--out", str(out), *extra]) == EXIT_OK
        assert (out / png).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        listed = {o["path"] for o in json.loads((out / "manifest.json").read_text())["outputs"]}
        assert png in listed
