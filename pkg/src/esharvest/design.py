"""Design rules as procedures: resonance tuning, load and pitch studies, optimizer."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, HarvesterError, InfeasibleError
from .model import CombGeometry, HarvesterDesign, profile_from_geometry, validate_design
from .smallsignal import harmonic_response
from .transient import BASE_ACCEL, Excitation, Sine, auto_sim_params, simulate


def tune_resonance(m: float, f_target: float) -> float:
    """Suspension stiffness placing the resonance at ``f_target``."""
    return m * (2 * math.pi * f_target) ** 2


def thread_cap():
    """Worker count from ``HARVEST_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("HARVEST_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn, items, workers=None):
    """``map`` that may fan out to processes but always returns input order."""
    items = list(items)
    workers = thread_cap() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# -- load sweep -------------------------------------------------------------

@dataclass(frozen=True)
class LoadRow:
    r: float
    p_avg: float
    v_rms: float
    error: str = ""


def _load_row(args):
    design, exc, r, periods = args
    try:
        d = design.with_load(r)
        res = simulate(d, exc, auto_sim_params(d, exc, periods=periods))
        return LoadRow(r, res.summary.p_avg, res.summary.v_load_rms)
    except HarvesterError as exc_:
        return LoadRow(r, math.nan, math.nan, f"{type(exc_).__name__}: {exc_}")


def sweep_load(design: HarvesterDesign, exc: Excitation, r_grid, periods: int = 10,
               workers=None) -> list[LoadRow]:
    """One transient run per load resistance, rows in grid order."""
    r_grid = [float(r) for r in r_grid]
    if any(r <= 0 for r in r_grid) or any(b <= a for a, b in zip(r_grid, r_grid[1:])):
        raise DomainError("r_grid must be positive and strictly increasing")
    return ordered_map(_load_row, [(design, exc, r, periods) for r in r_grid], workers)


# -- pitch scaling ----------------------------------------------------------

@dataclass(frozen=True)
class PitchRow:
    divisor: int
    pitch: float
    c_mid: float
    delta_c: float
    n_peak: float  # peak transformer ratio at 1 V, C/m
    error: str = ""


def pitch_scaling_study(geom: CombGeometry, divisors) -> list[PitchRow]:
    rows = []
    for s in divisors:
        s = int(s)
        if s < 1:
            raise DomainError(f"divisor must be >= 1, got {s}")
        pitch = geom.pitch / s
        try:
            prof = profile_from_geometry(replace(geom, pitch=pitch))
        except HarvesterError as e:
            rows.append(PitchRow(s, pitch, math.nan, math.nan, math.nan, str(e)))
            continue
        rows.append(PitchRow(s, pitch, prof.c_mid, prof.delta_c, prof.slope_peak * 1.0))
    return rows


# -- optimizer --------------------------------------------------------------

@dataclass(frozen=True)
class DesignConstraints:
    mass_max: float  # kg
    z_max: float  # m
    footprint_width: float  # m
    v_pol_max: float  # V
    load_bounds: tuple  # (ohms, ohms)

    def check(self):
        for name in ("mass_max", "z_max", "footprint_width", "v_pol_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"constraint {name} must be positive, got {v!r}")
        lo, hi = self.load_bounds
        if not (0 < lo <= hi and math.isfinite(hi)):
            raise DomainError(f"load bounds must satisfy 0 < lo <= hi, got {self.load_bounds!r}")


@dataclass(frozen=True)
class Candidate:
    design: HarvesterDesign
    p_avg: float  # predicted W
    clipped: bool
    flags: tuple = ()


def predicted_power(design: HarvesterDesign, omega: float, accel_amp: float):
    """Small-signal load power with the stroke capped at ``z_max``.

    Returns ``(power, clipped)``. When clipped, the velocity amplitude is
    held at ``omega * z_max``.
    """
    rep = harmonic_response(design, omega, accel_amp)
    v = rep.velocity_amp
    clipped = rep.displacement_amp > design.mech.z_max
    if clipped:
        v = omega * design.mech.z_max
    return 0.5 * v * v * rep.z_e.real, clipped


def _extent(profile):
    if profile.periodic:
        return profile.pitch
    return profile.samples[-1][0] - profile.samples[0][0]


def optimize_design(constraints: DesignConstraints, exc: Excitation, base: HarvesterDesign,
                    v_pol_step: float = 1.0, load_count: int = 25, top: int = 10) -> list[Candidate]:
    """Grid search over load and polarization after fixing mass and stiffness.

    Mass is set to ``mass_max`` and the suspension is tuned to the excitation
    frequency. Polarization runs over multiples of ``v_pol_step`` up to
    ``v_pol_max``; loads over ``load_count`` log-spaced points. Zero-power
    candidates are dropped unless nothing else is feasible, in which case
    the best of them is returned flagged ``zero_power``.
    """
    constraints.check()
    if exc.mode != BASE_ACCEL or not isinstance(exc.waveform, Sine):
        raise DomainError("optimize_design needs a sinusoidal base excitation")
    if _extent(base.cap) > constraints.footprint_width:
        raise InfeasibleError("capacitor period does not fit in the footprint width")
    f = exc.waveform.frequency
    omega = 2 * math.pi * f
    accel = exc.waveform.amplitude
    m = constraints.mass_max
    mech = replace(base.mech, mass=m, stiffness=tune_resonance(m, f), z_max=constraints.z_max)
    lo, hi = constraints.load_bounds
    loads = [lo] if lo == hi else [float(x) for x in np.geomspace(lo, hi, load_count)]
    n_v = int(math.floor(constraints.v_pol_max / v_pol_step * (1 + 1e-12)))
    v_grid = [j * v_pol_step for j in range(n_v + 1)]

    cands = []
    for v in v_grid:
        for r in loads:
            d = replace(base, mech=mech, pol=replace(base.pol, v_pol=v), load_ohms=r)
            if validate_design(d):
                continue
            p, clipped = predicted_power(d, omega, accel)
            cands.append(Candidate(d, p, clipped, ("clipped",) if clipped else ()))
    if not cands:
        raise InfeasibleError("no feasible design inside the constraints")
    cands.sort(key=lambda c: (-c.p_avg, c.design.pol.v_pol, c.design.load_ohms))
    live = [c for c in cands if c.p_avg > 0]
    if not live:
        c = cands[0]
        return [replace(c, flags=c.flags + ("zero_power",))]
    return live[:top]
