"""Nonlinear time-domain simulation of the coupled harvester.

Governing equations (relative displacement ``z``, capacitor charge ``q``)::

    m z'' = -k z - b z' - m a(t) + F_es(z, q)
    q'    = (V_pol - q / C(z)) / R
    v_load = R q'

Both equations advance together with classical fixed-step RK4. The power
terms of the energy balance ride along as quadrature states of the same
scheme, so the ledger closes to the integrator's own order. End-stop impacts
are located inside a step by root finding on the RK4 step length, then the
velocity is reset with the restitution coefficient.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import DomainError, NumericalFailure
from .model import HarvesterDesign, cap_at, dcap_dz, require_valid
from .smallsignal import harmonic_response

SERIES_COLUMNS = ("t", "z", "v", "q", "c", "v_cap", "i", "v_load", "p_load")
BASE_ACCEL = "base_accel"
PRESCRIBED = "prescribed_motion"
E_FLOOR = 1e-24  # J
_MAX_IMPACTS_PER_STEP = 64


@dataclass(frozen=True)
class Sine:
    amplitude: float
    frequency: float  # Hz
    phase: float = 0.0  # rad


@dataclass(frozen=True)
class Samples:
    points: tuple  # ((t, value), ...)

    @property
    def t(self):
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def values(self):
        return np.array([p[1] for p in self.points], dtype=float)


@dataclass(frozen=True)
class Excitation:
    """Base acceleration (m/s^2) or prescribed relative displacement (m)."""

    mode: str
    waveform: Sine | Samples

    @classmethod
    def base_sine(cls, accel_amp, frequency, phase=0.0):
        return cls(BASE_ACCEL, Sine(accel_amp, frequency, phase))

    @classmethod
    def prescribed_sine(cls, amplitude, frequency, phase=0.0):
        return cls(PRESCRIBED, Sine(amplitude, frequency, phase))

    @classmethod
    def from_samples(cls, mode, points):
        return cls(mode, Samples(tuple((float(t), float(v)) for t, v in points)))

    @property
    def frequency(self):
        return self.waveform.frequency if isinstance(self.waveform, Sine) else None

    def check(self):
        if self.mode not in (BASE_ACCEL, PRESCRIBED):
            raise DomainError(f"unknown excitation mode {self.mode!r}")
        w = self.waveform
        if isinstance(w, Sine):
            if not w.frequency > 0:
                raise DomainError("sine excitation frequency must be > 0")
        else:
            t = w.t
            if len(t) < 2 or np.any(np.diff(t) <= 0):
                raise DomainError("excitation sample times must be strictly increasing (>= 2 samples)")


@dataclass(frozen=True)
class SimParams:
    dt: float
    t_end: float
    t_settle: float = 0.0
    q0: float = 0.0
    z0: float = 0.0
    v0: float = 0.0


@dataclass(frozen=True)
class Event:
    time: float
    kind: str  # "impact" | "clip_warning"


@dataclass(frozen=True)
class Summary:
    p_avg: float
    v_load_peak_pos: float
    v_load_peak_neg: float
    v_load_rms: float
    dominant_freq: float
    impact_count: int
    low_confidence: bool = False


@dataclass(frozen=True)
class EnergyLedger:
    w_base: float
    w_source: float
    de_kin: float
    de_spring: float
    de_cap: float
    e_load: float
    e_damper: float
    e_impact_loss: float
    residual_rel: float


@dataclass
class TransientResult:
    design: HarvesterDesign
    excitation: Excitation
    sim: SimParams
    series: dict
    events: list
    # Per-step energy increments (length n_steps); index j covers [t_j, t_j+1].
    increments: dict = field(repr=False, default_factory=dict)
    summary: Summary | None = None
    ledger: EnergyLedger | None = None

    @property
    def n_steps(self):
        return len(self.series["t"]) - 1


def dt_bound(design: HarvesterDesign, exc: Excitation) -> float:
    """Largest admissible step: ``min(1/(50 f), R C_min / 20)``."""
    bound = design.load_ohms * design.cap.c_min / 20
    f = exc.frequency
    if f is not None:
        bound = min(bound, 1.0 / (50 * f))
    else:
        bound = min(bound, float(np.min(np.diff(exc.waveform.t))))
    return bound


def check_sim(design, exc, sim):
    if not sim.dt > 0:
        raise DomainError("dt must be > 0")
    if not sim.t_settle < sim.t_end:
        raise DomainError(f"t_settle={sim.t_settle:g} s must be < t_end={sim.t_end:g} s")
    for name in ("dt", "t_end", "t_settle", "q0", "z0", "v0"):
        if not math.isfinite(getattr(sim, name)):
            raise DomainError(f"sim.{name} must be finite")
    bound = dt_bound(design, exc)
    if sim.dt > bound * (1 + 1e-9):
        raise DomainError(f"dt={sim.dt:.6e} s exceeds the step bound {bound:.6e} s")
    if exc.mode == PRESCRIBED and exc.frequency is None:
        # Past the record the imposed velocity would jump to zero mid-step.
        t_last = _grid(sim)[1][-1]
        t_rec = float(exc.waveform.t[-1])
        if t_last > t_rec * (1 + 1e-12):
            raise DomainError(
                f"run ends at {t_last:.6e} s, past the end of the motion record ({t_rec:.6e} s)")


def _grid(sim):
    n = int(round(sim.t_end / sim.dt))
    if n * sim.dt < sim.t_end * (1 - 1e-12):
        n += 1
    return n, np.arange(n + 1) * sim.dt


# -- waveforms --------------------------------------------------------------

def _accel_fn(exc):
    w = exc.waveform
    if isinstance(w, Sine):
        a, om, ph = w.amplitude, 2 * math.pi * w.frequency, w.phase
        sin = math.sin
        return lambda t: a * sin(om * t + ph)
    ts = [p[0] for p in w.points]
    vs = [p[1] for p in w.points]
    last = len(ts) - 1

    def f(t):
        # Zero outside the record: the package is at rest before and after.
        if t < ts[0] or t > ts[last]:
            return 0.0
        j = min(bisect.bisect_right(ts, t) - 1, last - 1)
        u = (t - ts[j]) / (ts[j + 1] - ts[j])
        return vs[j] + u * (vs[j + 1] - vs[j])
    return f


def motion_arrays(exc, t):
    """Imposed displacement and velocity at times ``t``."""
    w = exc.waveform
    t = np.asarray(t, dtype=float)
    if isinstance(w, Sine):
        om = 2 * np.pi * w.frequency
        arg = om * t + w.phase
        return w.amplitude * np.sin(arg), w.amplitude * om * np.cos(arg)
    ts, zs = w.t, w.values
    spline = CubicSpline(ts, zs)
    tc = np.clip(t, ts[0], ts[-1])
    z = spline(tc)
    v = np.where((t < ts[0]) | (t > ts[-1]), 0.0, spline(tc, 1))
    return z, v


# -- simulation -------------------------------------------------------------

def simulate_base_excitation(design: HarvesterDesign, exc: Excitation, sim: SimParams) -> TransientResult:
    require_valid(design)
    exc.check()
    if exc.mode != BASE_ACCEL:
        raise DomainError("simulate_base_excitation needs a base_accel excitation")
    check_sim(design, exc, sim)

    mech = design.mech
    m, k, b = mech.mass, mech.stiffness, mech.damping
    zmax, rest = mech.z_max, mech.restitution
    R, Vp = design.load_ohms, design.pol.v_pol
    capf = design.cap.evaluator()
    accel = _accel_fn(exc)

    def step(t, z, v, q, h):
        a1 = accel(t)
        a2 = accel(t + 0.5 * h)
        a4 = accel(t + h)
        hh = 0.5 * h
        # stage 1
        C, dC = capf(z)
        e = q / C
        i1 = (Vp - e) / R
        dv1 = (-k * z - b * v + 0.5 * e * e * dC) / m - a1
        z2, v2, q2 = z + hh * v, v + hh * dv1, q + hh * i1
        C, dC = capf(z2)
        e = q2 / C
        i2 = (Vp - e) / R
        dv2 = (-k * z2 - b * v2 + 0.5 * e * e * dC) / m - a2
        z3, v3, q3 = z + hh * v2, v + hh * dv2, q + hh * i2
        C, dC = capf(z3)
        e = q3 / C
        i3 = (Vp - e) / R
        dv3 = (-k * z3 - b * v3 + 0.5 * e * e * dC) / m - a2
        z4, v4, q4 = z + h * v3, v + h * dv3, q + h * i3
        C, dC = capf(z4)
        e = q4 / C
        i4 = (Vp - e) / R
        dv4 = (-k * z4 - b * v4 + 0.5 * e * e * dC) / m - a4
        w = h / 6
        return (
            z + w * (v + 2 * v2 + 2 * v3 + v4),
            v + w * (dv1 + 2 * dv2 + 2 * dv3 + dv4),
            q + w * (i1 + 2 * i2 + 2 * i3 + i4),
            -m * w * (a1 * v + 2 * a2 * (v2 + v3) + a4 * v4),
            Vp * w * (i1 + 2 * i2 + 2 * i3 + i4),
            R * w * (i1 * i1 + 2 * i2 * i2 + 2 * i3 * i3 + i4 * i4),
            b * w * (v * v + 2 * v2 * v2 + 2 * v3 * v3 + v4 * v4),
        )

    def step_stuck(z, q, h):
        # Mass held against the end stop: only the charge evolves.
        C, _ = capf(z)
        i1 = (Vp - q / C) / R
        i2 = (Vp - (q + 0.5 * h * i1) / C) / R
        i3 = (Vp - (q + 0.5 * h * i2) / C) / R
        i4 = (Vp - (q + h * i3) / C) / R
        w = h / 6
        return (
            q + w * (i1 + 2 * i2 + 2 * i3 + i4),
            Vp * w * (i1 + 2 * i2 + 2 * i3 + i4),
            R * w * (i1 * i1 + 2 * i2 * i2 + 2 * i3 * i3 + i4 * i4),
        )

    n, t_grid = _grid(sim)
    dt = sim.dt
    zs = [0.0] * (n + 1)
    vs = [0.0] * (n + 1)
    qs = [0.0] * (n + 1)
    inc_base = [0.0] * n
    inc_src = [0.0] * n
    inc_load = [0.0] * n
    inc_damp = [0.0] * n
    inc_imp = [0.0] * n
    events = []

    z, v, q = sim.z0, sim.v0, sim.q0
    stuck = False
    side = 0.0
    if abs(z) >= zmax:
        side = 1.0 if z > 0 else -1.0
        z = side * zmax
        if side * v > 0:
            v = 0.0
            stuck = True
    zs[0], vs[0], qs[0] = z, v, q
    isfinite = math.isfinite

    for j in range(n):
        t = j * dt
        rem = dt
        wb = ws = wl = wd = wi = 0.0
        impacts = 0
        try:
            while rem > 0.0:
                if stuck:
                    C, dC = capf(z)
                    e = q / C
                    a_net = (-k * z + 0.5 * e * e * dC) / m - accel(t)
                    if side * a_net < 0:
                        stuck = False
                    else:
                        q, s_src, s_load = step_stuck(z, q, rem)
                        ws += s_src
                        wl += s_load
                        break
                r = step(t, z, v, q, rem)
                if abs(r[0]) < zmax:
                    z, v, q = r[0], r[1], r[2]
                    wb += r[3]
                    ws += r[4]
                    wl += r[5]
                    wd += r[6]
                    break
                if not isfinite(r[0]):
                    raise NumericalFailure("non-finite displacement", t)
                # End-stop contact inside this (sub)step.
                side = 1.0 if r[0] > 0 else -1.0
                z_s, v_s, q_s = z, v, q

                def gap(h):
                    return side * step(t, z_s, v_s, q_s, h)[0] - zmax

                h_a = 0.0
                if gap(0.0) >= 0.0:
                    h_a = None
                    for p in range(1, 61):
                        h_try = rem * 0.5 ** p
                        if gap(h_try) < 0.0:
                            h_a = h_try
                            break
                if h_a is None:
                    # Cannot leave the wall within this step: plastic contact.
                    wi += 0.5 * m * v * v
                    v = 0.0
                    stuck = True
                    continue
                h_star = brentq(gap, h_a, rem, xtol=1e-16 * dt, rtol=4 * np.finfo(float).eps, maxiter=200)
                r = step(t, z_s, v_s, q_s, h_star)
                wb += r[3]
                ws += r[4]
                wl += r[5]
                wd += r[6]
                v_in = r[1]
                v_out = -rest * v_in
                wi += 0.5 * m * (v_in * v_in - v_out * v_out)
                z, v, q = side * zmax, v_out, r[2]
                t += h_star
                rem -= h_star
                events.append(Event(t, "impact"))
                impacts += 1
                if v_out == 0.0 or impacts >= _MAX_IMPACTS_PER_STEP:
                    wi += 0.5 * m * v * v
                    v = 0.0
                    stuck = True
        except (ValueError, OverflowError, ZeroDivisionError) as err:
            # math.cos(inf) and friends: the state has already diverged.
            raise NumericalFailure(f"non-finite state ({err})", t) from None
        if not (isfinite(z) and isfinite(v) and isfinite(q) and isfinite(wl) and isfinite(wb)):
            raise NumericalFailure("non-finite state", (j + 1) * dt)
        zs[j + 1], vs[j + 1], qs[j + 1] = z, v, q
        inc_base[j], inc_src[j], inc_load[j], inc_damp[j], inc_imp[j] = wb, ws, wl, wd, wi

    result = _assemble(design, exc, sim, t_grid, zs, vs, qs, events, {
        "w_base": inc_base, "w_source": inc_src, "e_load": inc_load,
        "e_damper": inc_damp, "e_impact": inc_imp,
    })
    return result


def simulate_prescribed_motion(design: HarvesterDesign, exc: Excitation, sim: SimParams) -> TransientResult:
    """Impose ``z(t)`` and integrate only the electrical equation."""
    require_valid(design)
    exc.check()
    if exc.mode != PRESCRIBED:
        raise DomainError("simulate_prescribed_motion needs a prescribed_motion excitation")
    check_sim(design, exc, sim)

    R, Vp = design.load_ohms, design.pol.v_pol
    n, t_grid = _grid(sim)
    dt = sim.dt
    t_half = np.arange(2 * n + 1) * (0.5 * dt)
    zh, vh = motion_arrays(exc, t_half)
    ch = cap_at(design.cap, zh)
    dch = dcap_dz(design.cap, zh)
    ch_l, dch_l, vh_l = ch.tolist(), dch.tolist(), vh.tolist()

    qs = [0.0] * (n + 1)
    inc_mech = [0.0] * n
    inc_src = [0.0] * n
    inc_load = [0.0] * n
    q = sim.q0
    qs[0] = q
    for j in range(n):
        a, c_ = 2 * j, 2 * j + 1
        C1, C2, C3 = ch_l[a], ch_l[c_], ch_l[a + 2]
        i1 = (Vp - q / C1) / R
        q2 = q + 0.5 * dt * i1
        i2 = (Vp - q2 / C2) / R
        q3 = q + 0.5 * dt * i2
        i3 = (Vp - q3 / C2) / R
        q4 = q + dt * i3
        i4 = (Vp - q4 / C3) / R
        # Work done by the imposed motion against the electrostatic force.
        e1, e2, e3, e4 = q / C1, q2 / C2, q3 / C2, q4 / C3
        pm = (e1 * e1 * dch_l[a] * vh_l[a]
              + 2 * (e2 * e2 + e3 * e3) * dch_l[c_] * vh_l[c_]
              + e4 * e4 * dch_l[a + 2] * vh_l[a + 2])
        w = dt / 6
        inc_mech[j] = -0.5 * w * pm
        isum = i1 + 2 * i2 + 2 * i3 + i4
        inc_src[j] = Vp * w * isum
        inc_load[j] = R * w * (i1 * i1 + 2 * i2 * i2 + 2 * i3 * i3 + i4 * i4)
        q = q + w * isum
        if not (math.isfinite(q) and math.isfinite(inc_load[j]) and math.isfinite(inc_mech[j])):
            raise NumericalFailure("non-finite charge or energy", (j + 1) * dt)
        qs[j + 1] = q

    zs = zh[::2]
    vs = vh[::2]
    events = []
    over = np.nonzero(np.abs(zs) > design.mech.z_max)[0]
    if len(over):
        events.append(Event(float(t_grid[over[0]]), "clip_warning"))
    zeros = [0.0] * n
    return _assemble(design, exc, sim, t_grid, zs, vs, qs, events, {
        "w_base": inc_mech, "w_source": inc_src, "e_load": inc_load,
        "e_damper": zeros, "e_impact": zeros,
    })


def simulate(design: HarvesterDesign, exc: Excitation, sim: SimParams) -> TransientResult:
    if exc.mode == PRESCRIBED:
        return simulate_prescribed_motion(design, exc, sim)
    return simulate_base_excitation(design, exc, sim)


def _assemble(design, exc, sim, t, zs, vs, qs, events, incs):
    z = np.asarray(zs, dtype=float)
    v = np.asarray(vs, dtype=float)
    q = np.asarray(qs, dtype=float)
    c = cap_at(design.cap, z)
    v_cap = q / c
    v_load = design.pol.v_pol - v_cap
    i = v_load / design.load_ohms
    series = {
        "t": t, "z": z, "v": v, "q": q, "c": c, "v_cap": v_cap,
        "i": i, "v_load": v_load, "p_load": v_load * i,
    }
    result = TransientResult(
        design=design, excitation=exc, sim=sim, series=series, events=events,
        increments={key: np.asarray(val, dtype=float) for key, val in incs.items()},
    )
    result.summary = summarize(result)
    result.ledger = energy_ledger(result, design)
    return result


# -- post-processing --------------------------------------------------------

def energy_ledger(result: TransientResult, design: HarvesterDesign | None = None,
                  t0: float | None = None, t1: float | None = None) -> EnergyLedger:
    """Energy balance over ``[t0, t1]`` (whole run by default).

    For prescribed motion the mechanical side is not modelled: ``w_base`` is
    the work the imposed motion does against the electrostatic force and the
    kinetic, spring and damper terms are zero.
    """
    if design is None:
        design = result.design
    elif design != result.design:
        raise DomainError("ledger design differs from the design that produced the result")
    t = result.series["t"]
    dt = result.sim.dt
    j0 = 0 if t0 is None else int(round(t0 / dt))
    j1 = len(t) - 1 if t1 is None else int(round(t1 / dt))
    j0 = max(0, min(j0, len(t) - 1))
    j1 = max(j0, min(j1, len(t) - 1))
    inc = result.increments

    def total(key):
        return math.fsum(inc[key][j0:j1])

    s = result.series
    q0, q1 = s["q"][j0], s["q"][j1]
    de_cap = q1 * q1 / (2 * s["c"][j1]) - q0 * q0 / (2 * s["c"][j0])
    if result.excitation.mode == PRESCRIBED:
        de_kin = de_spring = 0.0
    else:
        m, k = design.mech.mass, design.mech.stiffness
        de_kin = 0.5 * m * (s["v"][j1] ** 2 - s["v"][j0] ** 2)
        de_spring = 0.5 * k * (s["z"][j1] ** 2 - s["z"][j0] ** 2)
    w_base, w_source = total("w_base"), total("w_source")
    e_load, e_damper, e_imp = total("e_load"), total("e_damper"), total("e_impact")
    resid = math.fsum([w_base, w_source, -de_kin, -de_spring, -de_cap, -e_load, -e_damper, -e_imp])
    return EnergyLedger(
        w_base=w_base, w_source=w_source, de_kin=float(de_kin), de_spring=float(de_spring),
        de_cap=float(de_cap), e_load=e_load, e_damper=e_damper, e_impact_loss=e_imp,
        residual_rel=abs(resid) / max(e_load + e_damper, E_FLOOR),
    )


def count_zero_crossings(x, dead_band=1e-6):
    """Sign changes of ``x``, ignoring samples within ``dead_band * max|x|`` of zero."""
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return 0
    peak = float(np.max(np.abs(x)))
    if peak == 0.0:
        return 0
    s = np.sign(x[np.abs(x) > dead_band * peak])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def summarize(result: TransientResult) -> Summary:
    """Window statistics over ``[t_settle, t_end]``."""
    s = result.series
    t = s["t"]
    mask = t >= result.sim.t_settle - 1e-9 * result.sim.dt
    if np.count_nonzero(mask) < 2:
        raise DomainError("settling window leaves fewer than two samples")
    tw = t[mask]
    vl = s["v_load"][mask]
    window = float(tw[-1] - tw[0])
    crossings = count_zero_crossings(vl)
    f_dom = crossings / (2 * window)
    low_conf = f_dom == 0.0 or window < 5.0 / f_dom
    impacts = sum(1 for e in result.events if e.kind == "impact" and e.time >= tw[0])
    return Summary(
        p_avg=float(np.mean(s["p_load"][mask])),
        v_load_peak_pos=float(np.max(vl)),
        v_load_peak_neg=float(np.min(vl)),
        v_load_rms=float(np.sqrt(np.mean(vl * vl))),
        dominant_freq=float(f_dom),
        impact_count=impacts,
        low_confidence=bool(low_conf),
    )


# -- default run settings ---------------------------------------------------

def static_deflection(design: HarvesterDesign, iters: int = 100) -> float:
    """Rest position under the DC electrostatic force, ``k z = V^2 C'(z) / 2``.

    Fixed-point iteration; it contracts wherever the validated design is
    free of pull-in. Returns 0 for an unpolarized or spring-free device.
    """
    k, vp = design.mech.stiffness, design.pol.v_pol
    if vp == 0.0 or k <= 0.0:
        return 0.0
    z = 0.0
    for _ in range(iters):
        z_new = 0.5 * vp * vp * float(dcap_dz(design.cap, z)) / k
        if abs(z_new - z) <= 1e-15 * max(abs(z_new), 1e-30):
            return z_new
        z = z_new
    return z


def auto_sim_params(design: HarvesterDesign, exc: Excitation, periods: int = 20,
                    steady_start: bool = True, t_settle: float | None = None) -> SimParams:
    """Step at the enforced bound, settle, then ``periods`` excitation periods.

    Base excitation settles for max(10 periods, 5 / resonator bandwidth); with
    ``steady_start`` the run begins on the linearized periodic orbit. Prescribed
    motion settles for ten electrical time constants (whole periods).
    """
    require_valid(design)
    exc.check()
    dt = dt_bound(design, exc)
    f = exc.frequency
    tau = design.load_ohms * design.cap.c_max
    if f is None:
        ts = exc.waveform.t
        settle = 10 * tau if t_settle is None else t_settle
        t_end = max(float(ts[-1]), settle + 100 * dt)
        z0 = v0 = 0.0
        if exc.mode == PRESCRIBED:
            t_end = math.floor(float(ts[-1]) / dt * (1 + 1e-12)) * dt
            z_arr, v_arr = motion_arrays(exc, [0.0])
            z0, v0 = float(z_arr[0]), float(v_arr[0])
        q0 = cap_at(design.cap, z0) * design.pol.v_pol
        return SimParams(dt=dt, t_end=t_end, t_settle=settle, q0=q0, z0=z0, v0=v0)

    period = 1.0 / f
    if exc.mode == PRESCRIBED:
        settle = max(1, math.ceil(10 * tau / period)) * period if t_settle is None else t_settle
        z_arr, v_arr = motion_arrays(exc, [0.0])
        z0, v0 = float(z_arr[0]), float(v_arr[0])
        q0 = cap_at(design.cap, z0) * design.pol.v_pol
        return SimParams(dt=dt, t_end=settle + periods * period, t_settle=settle, q0=q0, z0=z0, v0=v0)

    omega = 2 * math.pi * f
    w = exc.waveform
    rep = harmonic_response(design, omega, w.amplitude)
    bw = (design.mech.damping + rep.z_e.real) / design.mech.mass
    if t_settle is None:
        settle = max(10 * period, 5.0 / bw) if bw > 0 else 10 * period
        settle = math.ceil(settle / period) * period
    else:
        settle = t_settle
    z0 = v0 = 0.0
    q0 = rep.op.c0 * design.pol.v_pol
    if steady_start:
        zs = static_deflection(design)
        rot = complex(math.cos(w.phase), math.sin(w.phase))
        vel = rep.velocity_phasor * rot
        zph = vel / (1j * omega)
        r, c0 = design.load_ohms, rep.op.c0
        qph = rep.op.n * zph / complex(1.0, omega * r * c0)
        z0, v0 = zs + zph.imag, vel.imag
        q0 = float(cap_at(design.cap, zs)) * design.pol.v_pol + qph.imag
        if abs(z0) >= design.mech.z_max:
            z0 = v0 = 0.0
            q0 = rep.op.c0 * design.pol.v_pol
    return SimParams(dt=dt, t_end=settle + periods * period, t_settle=settle, q0=q0, z0=z0, v0=v0)
