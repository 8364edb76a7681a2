"""Sectioned ``key = value`` run configuration and CSV/summary writers.

Keys carry their unit as a suffix (``mass_kg``, ``freq_hz``, ...). Example::

    [mechanical]
    mass_kg = 1e-05
    stiffness_n_per_m = 2668.6
    damping_ns_per_m = 0.001
    z_max_m = 1e-05

    [capacitor]
    profile = cosine
    c_par_f = 2e-12
    c_mid_f = 8e-12
    delta_c_f = 2.1e-12
    pitch_m = 2e-05

    [electrical]
    v_pol_v = 10.0
    v_pullin_v = 15.0
    load_ohm = 1000000.0

    [excitation]
    mode = base
    accel_g = 1.0
    freq_hz = 2600.0

The ``[sim]`` section is optional; missing keys fall back to
:func:`esharvest.transient.auto_sim_params`.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import (
    EPS0, CapProfile, CombGeometry, HarvesterDesign, MechanicalParams, Polarization,
    profile_from_geometry,
)
from .transient import BASE_ACCEL, PRESCRIBED, Excitation, SimParams, Sine, auto_sim_params

G = 9.80665

NUM = "number"
TEXT = "text"

SECTIONS = {
    "mechanical": {
        "mass_kg": NUM, "stiffness_n_per_m": NUM, "damping_ns_per_m": NUM,
        "z_max_m": NUM, "restitution": NUM,
    },
    "capacitor": {
        "profile": ("cosine", "triangular", "table", "geometry"),
        "c_par_f": NUM, "c_mid_f": NUM, "delta_c_f": NUM, "pitch_m": NUM,
        "z_offset_m": NUM, "smoothing_m": NUM, "table_csv": TEXT,
        "footprint_width_m": NUM, "finger_fill": NUM, "finger_length_m": NUM,
        "gap_m": NUM, "permittivity_f_per_m": NUM, "fringe_floor": NUM,
    },
    "electrical": {
        "source": ("external", "electret"), "v_pol_v": NUM, "v_pullin_v": NUM, "load_ohm": NUM,
    },
    "excitation": {
        "mode": ("base", "prescribed"), "shape": ("sine", "csv"), "accel_g": NUM,
        "accel_mps2": NUM, "amp_m": NUM, "freq_hz": NUM, "phase_rad": NUM, "waveform_csv": TEXT,
    },
    "sim": {
        "dt_s": NUM, "t_end_s": NUM, "t_settle_s": NUM, "q0_c": NUM, "z0_m": NUM, "v0_mps": NUM,
    },
}

CONSTRAINT_SECTIONS = {
    "constraints": {
        "mass_max_kg": NUM, "z_max_m": NUM, "footprint_width_m": NUM, "v_pol_max_v": NUM,
        "load_min_ohm": NUM, "load_max_ohm": NUM, "v_pol_step_v": NUM, "load_count": NUM,
        "top": NUM,
    },
}

PROFILE_KEYS = {
    "cosine": ({"c_mid_f", "delta_c_f", "pitch_m"}, {"c_par_f", "z_offset_m"}),
    "triangular": ({"c_mid_f", "delta_c_f", "pitch_m"}, {"c_par_f", "z_offset_m", "smoothing_m"}),
    "table": ({"table_csv"}, {"c_par_f"}),
    "geometry": (
        {"footprint_width_m", "pitch_m", "finger_fill", "finger_length_m", "gap_m"},
        {"permittivity_f_per_m", "fringe_floor", "c_par_f"},
    ),
}


def parse_sections(text, schema, source="<config>"):
    """Parse ``[section]`` / ``key = value`` lines against ``schema``.

    Returns ``{section: {key: value}}`` with the keys' declared types and
    the section/key order of the file.
    """
    out = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{source}: malformed section header", line=lineno)
            section = line[1:-1].strip()
            if section not in schema:
                raise ConfigError(f"{source}: unknown section [{section}]", key=section, line=lineno)
            if section in out:
                raise ConfigError(f"{source}: duplicate section [{section}]", key=section, line=lineno)
            out[section] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: expected key = value", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if section is None:
            raise ConfigError(f"{source}: key outside any section", key=key, line=lineno)
        kind = schema[section].get(key)
        if kind is None:
            raise ConfigError(f"{source}: unknown key in [{section}]", key=key, line=lineno)
        if key in out[section]:
            raise ConfigError(f"{source}: duplicate key", key=key, line=lineno)
        out[section][key] = _coerce(value, kind, key, lineno, source)
    return out


def _coerce(value, kind, key, lineno, source):
    if kind == NUM:
        try:
            x = float(value)
        except ValueError:
            raise ConfigError(f"{source}: not a number: {value!r}", key=key, line=lineno) from None
        if not math.isfinite(x):
            raise ConfigError(f"{source}: value must be finite", key=key, line=lineno)
        return x
    if kind == TEXT:
        if not value:
            raise ConfigError(f"{source}: empty value", key=key, line=lineno)
        return value
    if value not in kind:
        raise ConfigError(f"{source}: {value!r} is not one of {', '.join(kind)}", key=key, line=lineno)
    return value


def format_value(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def format_sections(sections):
    lines = []
    for name, body in sections.items():
        if lines:
            lines.append("")
        lines.append(f"[{name}]")
        lines += [f"{k} = {format_value(v)}" for k, v in body.items()]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunConfig:
    sections: dict
    base_dir: str = field(default=".", compare=False)

    @classmethod
    def parse(cls, text, source="<config>", base_dir="."):
        cfg = cls(parse_sections(text, SECTIONS, source), str(base_dir))
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        return cls.parse(text, source=str(path), base_dir=path.parent)

    def dump(self):
        return format_sections(self.sections)

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def _need(self, section, key):
        try:
            return self.sections[section][key]
        except KeyError:
            raise ConfigError(f"missing required key in [{section}]", key=key) from None

    def check(self):
        for name in ("mechanical", "capacitor", "electrical", "excitation"):
            if name not in self.sections:
                raise ConfigError(f"missing section [{name}]", key=name)
        for key in ("mass_kg", "stiffness_n_per_m", "damping_ns_per_m", "z_max_m"):
            self._need("mechanical", key)
        for key in ("v_pol_v", "v_pullin_v", "load_ohm"):
            self._need("electrical", key)
        cap = self.sections["capacitor"]
        kind = self._need("capacitor", "profile")
        required, optional = PROFILE_KEYS[kind]
        for key in sorted(required):
            self._need("capacitor", key)
        for key in cap:
            if key != "profile" and key not in required | optional:
                raise ConfigError(f"key not used by profile={kind}", key=key)
        exc = self.sections["excitation"]
        mode = self._need("excitation", "mode")
        shape = exc.get("shape", "sine")
        if shape == "sine":
            self._need("excitation", "freq_hz")
            allowed = {"mode", "shape", "freq_hz", "phase_rad"}
            if mode == "base":
                n_acc = ("accel_g" in exc) + ("accel_mps2" in exc)
                if n_acc != 1:
                    raise ConfigError("base excitation needs exactly one of accel_g, accel_mps2",
                                      key="accel_g")
                allowed |= {"accel_g", "accel_mps2"}
            else:
                self._need("excitation", "amp_m")
                allowed |= {"amp_m"}
        else:
            self._need("excitation", "waveform_csv")
            allowed = {"mode", "shape", "waveform_csv"}
        for key in exc:
            if key not in allowed:
                raise ConfigError(f"key not used by mode={mode}, shape={shape}", key=key)

    def with_value(self, dotted, value):
        section, _, key = dotted.partition(".")
        kind = SECTIONS.get(section, {}).get(key)
        if kind is None:
            raise ConfigError("unknown config key", key=dotted)
        if kind != NUM:
            raise ConfigError("key is not numeric", key=dotted)
        sections = {s: dict(body) for s, body in self.sections.items()}
        sections.setdefault(section, {})[key] = float(value)
        cfg = RunConfig(sections, self.base_dir)
        cfg.check()
        return cfg

    def _path(self, p):
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    # -- object construction ------------------------------------------------

    def design(self) -> HarvesterDesign:
        me = self.sections["mechanical"]
        mech = MechanicalParams(
            me["mass_kg"], me["stiffness_n_per_m"], me["damping_ns_per_m"], me["z_max_m"],
            me.get("restitution", 0.0),
        )
        el = self.sections["electrical"]
        pol = Polarization(el.get("source", "external"), el["v_pol_v"], el["v_pullin_v"])
        return HarvesterDesign(mech, self.profile(), pol, el["load_ohm"])

    def profile(self) -> CapProfile:
        cap = self.sections["capacitor"]
        kind = cap["profile"]
        if kind == "cosine":
            return CapProfile.cosine(cap.get("c_par_f", 0.0), cap["c_mid_f"], cap["delta_c_f"],
                                     cap["pitch_m"], cap.get("z_offset_m", 0.0))
        if kind == "triangular":
            return CapProfile.triangular(cap.get("c_par_f", 0.0), cap["c_mid_f"], cap["delta_c_f"],
                                         cap["pitch_m"], cap.get("z_offset_m", 0.0),
                                         cap.get("smoothing_m"))
        if kind == "table":
            z, c = read_xy_csv(self._path(cap["table_csv"]), ("z_m", "c_f"))
            return CapProfile.tabulated(zip(z, c), c_par=cap.get("c_par_f", 0.0))
        geom = CombGeometry(
            footprint_width=cap["footprint_width_m"], pitch=cap["pitch_m"],
            finger_fill=cap["finger_fill"], finger_length=cap["finger_length_m"], gap=cap["gap_m"],
            permittivity=cap.get("permittivity_f_per_m", EPS0),
            fringe_floor=cap.get("fringe_floor", 0.0), c_par=cap.get("c_par_f", 0.0),
        )
        return profile_from_geometry(geom)

    def excitation(self) -> Excitation:
        exc = self.sections["excitation"]
        mode = BASE_ACCEL if exc["mode"] == "base" else PRESCRIBED
        if exc.get("shape", "sine") == "csv":
            col = "accel_mps2" if mode == BASE_ACCEL else "z_m"
            t, v = read_xy_csv(self._path(exc["waveform_csv"]), ("t_s", col))
            return Excitation.from_samples(mode, zip(t, v))
        if mode == BASE_ACCEL:
            amp = exc["accel_g"] * G if "accel_g" in exc else exc["accel_mps2"]
        else:
            amp = exc["amp_m"]
        return Excitation(mode, Sine(amp, exc["freq_hz"], exc.get("phase_rad", 0.0)))

    def sim_params(self, design=None, exc=None) -> SimParams:
        design = self.design() if design is None else design
        exc = self.excitation() if exc is None else exc
        sim = self.sections.get("sim", {})
        auto = auto_sim_params(design, exc, t_settle=sim.get("t_settle_s"))
        return dataclasses.replace(
            auto,
            dt=sim.get("dt_s", auto.dt),
            t_end=sim.get("t_end_s", auto.t_end),
            q0=sim.get("q0_c", auto.q0),
            z0=sim.get("z0_m", auto.z0),
            v0=sim.get("v0_mps", auto.v0),
        )


def config_from_objects(design, exc, sim=None, capacitor=None) -> RunConfig:
    """RunConfig for a design with a periodic profile (or a given capacitor section)."""
    m = design.mech
    sections = {
        "mechanical": {
            "mass_kg": float(m.mass), "stiffness_n_per_m": float(m.stiffness),
            "damping_ns_per_m": float(m.damping), "z_max_m": float(m.z_max),
            "restitution": float(m.restitution),
        },
    }
    if capacitor is None:
        p = design.cap
        if not p.periodic:
            raise ConfigError("tabulated profiles need an explicit capacitor section")
        capacitor = {
            "profile": p.kind, "c_par_f": float(p.c_par), "c_mid_f": float(p.c_mid),
            "delta_c_f": float(p.delta_c), "pitch_m": float(p.pitch), "z_offset_m": float(p.z_offset),
        }
        if p.kind == "triangular":
            capacitor["smoothing_m"] = float(p.smoothing)
    sections["capacitor"] = dict(capacitor)
    sections["electrical"] = {
        "source": design.pol.source, "v_pol_v": float(design.pol.v_pol),
        "v_pullin_v": float(design.pol.v_pullin), "load_ohm": float(design.load_ohms),
    }
    w = exc.waveform
    if not isinstance(w, Sine):
        raise ConfigError("only sine excitations can be emitted inline")
    if exc.mode == BASE_ACCEL:
        sections["excitation"] = {"mode": "base", "shape": "sine", "accel_mps2": float(w.amplitude),
                                  "freq_hz": float(w.frequency), "phase_rad": float(w.phase)}
    else:
        sections["excitation"] = {"mode": "prescribed", "shape": "sine", "amp_m": float(w.amplitude),
                                  "freq_hz": float(w.frequency), "phase_rad": float(w.phase)}
    if sim is not None:
        sections["sim"] = {
            "dt_s": float(sim.dt), "t_end_s": float(sim.t_end), "t_settle_s": float(sim.t_settle),
            "q0_c": float(sim.q0), "z0_m": float(sim.z0), "v0_mps": float(sim.v0),
        }
    cfg = RunConfig(sections)
    cfg.check()
    return cfg


# -- CSV / summary IO -------------------------------------------------------

def read_xy_csv(path, header):
    """Two-column numeric CSV with a mandatory header row."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(s.strip() for s in r)]
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    if not rows:
        raise ConfigError(f"{path}: empty CSV")
    got = tuple(s.strip() for s in rows[0])
    if got != tuple(header):
        raise ConfigError(f"{path}: header must be {','.join(header)}, got {','.join(got)}", line=1)
    xs, ys = [], []
    for n, row in enumerate(rows[1:], 2):
        if len(row) != 2:
            raise ConfigError(f"{path}: expected 2 columns", line=n)
        try:
            x, y = float(row[0]), float(row[1])
        except ValueError:
            raise ConfigError(f"{path}: non-numeric value", line=n) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ConfigError(f"{path}: non-finite value", line=n)
        xs.append(x)
        ys.append(y)
    return np.array(xs), np.array(ys)


def fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.12e}"


def atomic_write(path, text):
    """Write via ``<path>.partial`` and rename once complete."""
    path = str(path)
    tmp = path + ".partial"
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def csv_text(header, rows):
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def series_text(series, columns):
    data = np.column_stack([series[c] for c in columns])
    body = "\n".join(",".join(f"{v:.12e}" for v in row) for row in data.tolist())
    return ",".join(columns) + "\n" + body + "\n"


def key_values(pairs):
    return "".join(f"{k}={fmt(v)}\n" for k, v in pairs)
