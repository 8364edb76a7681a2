"""``esharvest`` command-line front end.

Exit codes: 0 ok, 1 bad input/config, 2 pull-in, 3 numerical failure,
4 scenario expectation failed, 5 fit failure, 6 infeasible constraints.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import scenarios as sc
from .config import (
    CONSTRAINT_SECTIONS, RunConfig, atomic_write, config_from_objects, csv_text, fmt,
    format_sections, key_values, parse_sections, read_xy_csv, series_text,
)
from .design import DesignConstraints, ordered_map, optimize_design
from .errors import (
    ConfigError, FitError, HarvesterError, InfeasibleError, NumericalFailure, PullInError,
)
from .fit import CapMeasurement, fit_cap_profile
from .model import cap_at, dcap_dz
from .transient import SERIES_COLUMNS, simulate

EXIT_OK, EXIT_INPUT, EXIT_PULLIN, EXIT_NUMERIC, EXIT_EXPECT, EXIT_FIT, EXIT_INFEASIBLE = range(7)
CURVE_POINTS = 1000


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"usage: {message}")


def _exit_code(err):
    if isinstance(err, PullInError):
        return EXIT_PULLIN
    if isinstance(err, NumericalFailure):
        return EXIT_NUMERIC
    if isinstance(err, InfeasibleError):
        return EXIT_INFEASIBLE
    if isinstance(err, FitError):
        return EXIT_FIT
    return EXIT_INPUT


def summary_pairs(result):
    s, e = result.summary, result.ledger
    return [
        ("p_avg_w", s.p_avg),
        ("v_load_peak_pos_v", s.v_load_peak_pos),
        ("v_load_peak_neg_v", s.v_load_peak_neg),
        ("v_load_rms_v", s.v_load_rms),
        ("dominant_freq_hz", s.dominant_freq),
        ("dominant_freq_low_confidence", s.low_confidence),
        ("impact_count", s.impact_count),
        ("w_base_j", e.w_base),
        ("w_source_j", e.w_source),
        ("de_kin_j", e.de_kin),
        ("de_spring_j", e.de_spring),
        ("de_cap_j", e.de_cap),
        ("e_load_j", e.e_load),
        ("e_damper_j", e.e_damper),
        ("e_impact_loss_j", e.e_impact_loss),
        ("residual_rel", e.residual_rel),
    ]


def read_summary(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        k, _, v = line.partition("=")
        out[k] = v
    return out


def _write_run(result, out):
    atomic_write(out, series_text(result.series, SERIES_COLUMNS))
    atomic_write(out + ".summary", key_values(summary_pairs(result)))


def _run_config(cfg):
    design = cfg.design()
    exc = cfg.excitation()
    return simulate(design, exc, cfg.sim_params(design, exc))


# -- commands ---------------------------------------------------------------

def cmd_simulate(config_path, out_path):
    result = _run_config(RunConfig.load(config_path))
    _write_run(result, str(out_path))
    return EXIT_OK


def cmd_scenario(name, out_dir):
    scn = sc.scenario(name)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = str(out_dir / name)
    if scn.measurement is not None:
        z, c = scn.measurement.z, scn.measurement.c
        atomic_write(base + ".measurement.csv", csv_text(("z_m", "c_f"), zip(z, c)))
        fit, checks = sc.run_scenario(scn)
        _write_fit(fit, z, base + ".fit")
    else:
        atomic_write(base + ".cfg", config_from_objects(scn.design, scn.excitation, scn.sim).dump())
        result, checks = sc.run_scenario(scn)
        _write_run(result, base + ".csv")
    lines = [ch.line() for ch in checks]
    atomic_write(base + ".checks", "\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return EXIT_OK if all(ch.passed for ch in checks) else EXIT_EXPECT


def parse_grid(text):
    parts = text.split(":")
    if len(parts) != 4 or parts[0] not in ("lin", "log"):
        raise ConfigError(f"grid must be lin|log:min:max:count, got {text!r}", key="--grid")
    try:
        lo, hi = float(parts[1]), float(parts[2])
        count = int(parts[3])
    except ValueError:
        raise ConfigError(f"grid bounds must be numbers and count an integer: {text!r}",
                          key="--grid") from None
    if count < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise ConfigError(f"grid needs count >= 1 and finite min <= max: {text!r}", key="--grid")
    if count == 1:
        return [lo]
    if parts[0] == "log":
        if lo <= 0:
            raise ConfigError("log grid needs min > 0", key="--grid")
        return [float(x) for x in np.geomspace(lo, hi, count)]
    return [float(x) for x in np.linspace(lo, hi, count)]


SWEEP_COLUMNS = ("p_avg_w", "v_load_rms_v", "v_load_peak_pos_v", "v_load_peak_neg_v",
                 "dominant_freq_hz", "impact_count", "residual_rel")


def _sweep_row(args):
    cfg, key, value = args
    try:
        result = _run_config(cfg.with_value(key, value))
    except HarvesterError as e:
        return [value] + [math.nan] * len(SWEEP_COLUMNS) + [f"{type(e).__name__}: {e}"]
    d = dict(summary_pairs(result))
    return [value] + [d[c] for c in SWEEP_COLUMNS] + [""]


def _csv_field(v):
    if isinstance(v, str):
        return '"' + v.replace('"', "'") + '"' if v else ""
    return fmt(v)


def cmd_sweep(config_path, key, grid_spec, out_path):
    cfg = RunConfig.load(config_path)
    grid = parse_grid(grid_spec)
    cfg.with_value(key, grid[0])  # rejects unknown or non-numeric keys up front
    rows = ordered_map(_sweep_row, [(cfg, key, v) for v in grid])
    header = (key,) + SWEEP_COLUMNS + ("error",)
    text = ",".join(header) + "\n" + "".join(",".join(_csv_field(v) for v in r) + "\n" for r in rows)
    atomic_write(out_path, text)
    if all(r[-1] for r in rows):
        print(f"every sweep row failed; first error: {rows[0][-1]}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _write_fit(fit, z, out):
    p = fit.profile
    pairs = [
        ("kind", p.kind), ("c_mid_f", p.c_mid), ("delta_c_f", p.delta_c), ("pitch_m", p.pitch),
        ("z_offset_m", p.z_offset), ("smoothing_m", p.smoothing), ("slope_peak_f_per_m", p.slope_peak),
        ("rmse_f", fit.rmse), ("max_abs_err_f", fit.max_abs_err), ("iterations", fit.iterations),
    ]
    atomic_write(out, key_values(pairs))
    zc = np.linspace(float(z[0]), float(z[-1]), CURVE_POINTS)
    try:
        c, dc = cap_at(p, zc), dcap_dz(p, zc)
    except HarvesterError:
        c = dc = np.full_like(zc, math.nan)
    atomic_write(out + ".curve.csv", csv_text(("z_m", "c_fit_f", "dcdz_fit_f_per_m"), zip(zc, c, dc)))


def cmd_capfit(data_path, kind, out_path):
    z, c = read_xy_csv(data_path, ("z_m", "c_f"))
    try:
        fit = fit_cap_profile(CapMeasurement.from_arrays(z, c), kind)
    except FitError as e:
        if e.best is not None:
            _write_fit(e.best, z, str(out_path))
        raise
    _write_fit(fit, z, str(out_path))
    return EXIT_OK


def load_constraints(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read constraints: {e}") from None
    sec = parse_sections(text, CONSTRAINT_SECTIONS, str(path)).get("constraints")
    if sec is None:
        raise ConfigError("missing section [constraints]", key="constraints")
    for key in ("mass_max_kg", "z_max_m", "footprint_width_m", "v_pol_max_v", "load_min_ohm",
                "load_max_ohm"):
        if key not in sec:
            raise ConfigError("missing required key in [constraints]", key=key)
    cons = DesignConstraints(sec["mass_max_kg"], sec["z_max_m"], sec["footprint_width_m"],
                             sec["v_pol_max_v"], (sec["load_min_ohm"], sec["load_max_ohm"]))
    opts = {
        "v_pol_step": sec.get("v_pol_step_v", 1.0),
        "load_count": int(sec.get("load_count", 25)),
        "top": int(sec.get("top", 10)),
    }
    if opts["v_pol_step"] <= 0 or opts["load_count"] < 1 or opts["top"] < 1:
        raise ConfigError("v_pol_step_v must be > 0; load_count and top must be >= 1")
    return cons, opts


def _absolute_capacitor(cfg):
    cap = dict(cfg.sections["capacitor"])
    if "table_csv" in cap:
        cap["table_csv"] = str(cfg._path(cap["table_csv"]).resolve())
    return cap


def cmd_optimize(config_path, constraints_path, out_path):
    cfg = RunConfig.load(config_path)
    cons, opts = load_constraints(constraints_path)
    base, exc = cfg.design(), cfg.excitation()
    cands = optimize_design(cons, exc, base, **opts)
    rows = []
    for rank, c in enumerate(cands, 1):
        d = c.design
        rows.append([rank, c.p_avg, d.pol.v_pol, d.load_ohms, d.mech.mass, d.mech.stiffness,
                     d.mech.z_max, int(c.clipped), ";".join(c.flags)])
    header = ("rank", "p_avg_pred_w", "v_pol_v", "load_ohm", "mass_kg", "stiffness_n_per_m",
              "z_max_m", "clipped", "flags")
    atomic_write(out_path, csv_text(header, rows))
    best = config_from_objects(cands[0].design, exc, capacitor=_absolute_capacitor(cfg))
    if "excitation" in cfg.sections:
        best.sections["excitation"] = dict(cfg.sections["excitation"])
    atomic_write(str(out_path) + ".best.cfg", format_sections(best.sections))
    return EXIT_OK


# -- entry point ------------------------------------------------------------

def build_parser():
    p = _Parser(prog="esharvest", description="Electrostatic vibration harvester simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one transient simulation")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="series CSV; summary goes to OUT.summary")

    s = sub.add_parser("scenario", help="run a preset characterisation scenario")
    s.add_argument("--scenario", required=True, help=", ".join(sc.SCENARIOS))
    s.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("sweep", help="one simulation per value of a config key")
    s.add_argument("--config", required=True)
    s.add_argument("--sweep-key", required=True, help="section.key, e.g. electrical.load_ohm")
    s.add_argument("--grid", required=True, help="lin|log:min:max:count")
    s.add_argument("--out", required=True)

    s = sub.add_parser("capfit", help="fit a periodic C(z) profile to measured data")
    s.add_argument("--data", required=True, help="CSV with header z_m,c_f")
    s.add_argument("--kind", default="cosine", choices=("cosine", "triangular"))
    s.add_argument("--out", required=True)

    s = sub.add_parser("optimize", help="grid-search polarization and load under constraints")
    s.add_argument("--config", required=True)
    s.add_argument("--constraints", required=True)
    s.add_argument("--out", required=True)
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args.config, args.out)
    if args.command == "scenario":
        return cmd_scenario(args.scenario, args.out)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.sweep_key, args.grid, args.out)
    if args.command == "capfit":
        return cmd_capfit(args.data, args.kind, args.out)
    return cmd_optimize(args.config, args.constraints, args.out)


def main(argv=None):
    try:
        code = run(argv)
    except HarvesterError as e:
        print(f"error: {e}", file=sys.stderr)
        code = _exit_code(e)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        code = EXIT_INPUT
    return code


if __name__ == "__main__":
    sys.exit(main())
