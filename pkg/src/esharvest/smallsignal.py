"""Linearized equivalent-circuit analysis around an operating point.

The transducer is a transformer of ratio ``n`` whose electrical port feeds
``C0`` in parallel with the load ``R``. Seen from the mechanical side it
presents the impedance ``n^2 R / (1 + j w R C0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import HarvesterDesign, MechanicalParams, cap_at, require_valid, transformer_ratio


@dataclass(frozen=True)
class OperatingPoint:
    z_eq: float
    c0: float  # F
    n: float  # C/m


@dataclass(frozen=True)
class SmallSignalReport:
    op: OperatingPoint
    omega: float
    z_e: complex  # N*s/m, reflected electromechanical impedance
    z_em_magnitude: float
    r_matched: float
    displacement_amp: float
    velocity_amp: float
    load_power: float
    load_voltage_amp: float
    velocity_phasor: complex = 0j


@dataclass(frozen=True)
class Band:
    f_lo: float
    f_hi: float
    width: float


def operating_point(design: HarvesterDesign, z_eq: float = 0.0) -> OperatingPoint:
    require_valid(design)
    return OperatingPoint(
        z_eq=z_eq,
        c0=cap_at(design.cap, z_eq),
        n=transformer_ratio(design.cap, z_eq, design.pol.v_pol),
    )


def reflected_impedance(op: OperatingPoint, r_load: float, omega: float) -> complex:
    return op.n * op.n * r_load / complex(1.0, omega * r_load * op.c0)


def matched_load(c0: float, omega: float) -> float:
    """Load resistance equal to the reactance of ``c0`` at ``omega``."""
    return 1.0 / (omega * c0)


def zem_matched(op: OperatingPoint, omega: float) -> float:
    return op.n * op.n / (math.sqrt(2.0) * omega * op.c0)


def harmonic_response(design: HarvesterDesign, omega: float, accel_amp: float,
                      z_eq: float = 0.0) -> SmallSignalReport:
    """Steady-state response to a base acceleration ``accel_amp * sin(omega t)``.

    The velocity phasor is relative to the package and referenced to the
    acceleration phasor, so ``velocity_phasor`` carries the phase needed to
    start a transient run on the periodic orbit.
    """
    op = operating_point(design, z_eq)
    m, k, b = design.mech.mass, design.mech.stiffness, design.mech.damping
    r = design.load_ohms
    z_e = reflected_impedance(op, r, omega)
    z_total = b + z_e + 1j * (omega * m - k / omega)
    vel = -m * accel_amp / z_total
    v_amp = abs(vel)
    v_load = v_amp * abs(op.n) * r / abs(complex(1.0, omega * r * op.c0))
    return SmallSignalReport(
        op=op,
        omega=omega,
        z_e=z_e,
        z_em_magnitude=abs(z_e),
        r_matched=matched_load(op.c0, omega),
        displacement_amp=v_amp / omega,
        velocity_amp=v_amp,
        load_power=0.5 * v_amp * v_amp * z_e.real,
        load_voltage_amp=v_load,
        velocity_phasor=vel,
    )


def resonance_frequency(mech: MechanicalParams) -> float:
    return math.sqrt(mech.stiffness / mech.mass) / (2 * math.pi)


def clipped_band(design: HarvesterDesign, accel_amp: float, freq_grid) -> Band:
    """Frequency span around resonance where the free stroke exceeds ``z_max``.

    Band edges are linearly interpolated between the grid points straddling
    the threshold; the span is 0 when the stroke never reaches ``z_max``.
    """
    f = np.asarray(freq_grid, dtype=float)
    if f.ndim != 1 or len(f) < 2 or np.any(np.diff(f) <= 0) or f[0] <= 0:
        raise DomainError("freq_grid must be a strictly increasing list of positive frequencies")
    f_res = resonance_frequency(design.mech)
    if not f[0] <= f_res <= f[-1]:
        raise DomainError(
            f"freq_grid [{f[0]:.6g}, {f[-1]:.6g}] Hz does not bracket the resonance {f_res:.6g} Hz")
    amp = np.array([harmonic_response(design, 2 * math.pi * fi, accel_amp).displacement_amp for fi in f])
    z_max = design.mech.z_max
    i0 = int(np.argmax(amp))
    if amp[i0] <= z_max:
        return Band(math.nan, math.nan, 0.0)
    lo = i0
    while lo > 0 and amp[lo - 1] > z_max:
        lo -= 1
    hi = i0
    while hi < len(f) - 1 and amp[hi + 1] > z_max:
        hi += 1
    f_lo = f[lo] if lo == 0 else _cross(f[lo - 1], f[lo], amp[lo - 1], amp[lo], z_max)
    f_hi = f[hi] if hi == len(f) - 1 else _cross(f[hi], f[hi + 1], amp[hi], amp[hi + 1], z_max)
    return Band(float(f_lo), float(f_hi), float(f_hi - f_lo))


def _cross(f0, f1, a0, a1, level):
    return f0 + (level - a0) * (f1 - f0) / (a1 - a0)
