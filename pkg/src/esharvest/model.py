"""Device description and variable-capacitor model.

All quantities are SI. Displacement ``z`` is the in-plane position of the
seismic mass relative to the package; the capacitance profile ``C(z)`` is
periodic with the electrode pitch for the cosine and triangular kinds.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InvalidDesignError, PullInError

EPS0 = 8.8541878128e-12  # F/m

PROFILE_KINDS = ("cosine", "triangular", "tabulated")
SOURCES = ("external", "electret")


@dataclass(frozen=True)
class MechanicalParams:
    mass: float  # kg
    stiffness: float  # N/m
    damping: float  # N*s/m
    z_max: float  # m, end-stop half travel
    restitution: float = 0.0

    def violations(self):
        out = []
        if not self.mass > 0:
            out.append(Violation("mass", f"mass must be > 0, got {self.mass!r}"))
        if not self.stiffness > 0:
            out.append(Violation("stiffness", f"stiffness must be > 0, got {self.stiffness!r}"))
        if not self.damping >= 0:
            out.append(Violation("damping", f"damping must be >= 0, got {self.damping!r}"))
        if not self.z_max > 0:
            out.append(Violation("z_max", f"z_max must be > 0, got {self.z_max!r}"))
        if not 0 <= self.restitution <= 1:
            out.append(Violation("restitution", f"restitution must lie in [0, 1], got {self.restitution!r}"))
        return out


@dataclass(frozen=True)
class CapProfile:
    """Capacitance versus displacement.

    Periodic kinds are ``c_par + c_mid + delta_c * w((z - z_offset) / pitch)``
    where ``w`` is a unit cosine or a unit triangle wave (crest at phase 0).
    The tabulated kind is ``c_par`` plus a monotone cubic (PCHIP) through
    ``samples``, held constant outside the sampled range.
    """

    kind: str = "cosine"
    c_par: float = 0.0
    c_mid: float = 0.0
    delta_c: float = 0.0
    pitch: float = 0.0
    z_offset: float = 0.0
    smoothing: float = 0.0
    samples: tuple = ()

    @classmethod
    def cosine(cls, c_par, c_mid, delta_c, pitch, z_offset=0.0):
        return cls("cosine", c_par, c_mid, delta_c, pitch, z_offset)

    @classmethod
    def triangular(cls, c_par, c_mid, delta_c, pitch, z_offset=0.0, smoothing=None):
        if smoothing is None:
            smoothing = pitch / 40
        return cls("triangular", c_par, c_mid, delta_c, pitch, z_offset, smoothing)

    @classmethod
    def tabulated(cls, samples, c_par=0.0):
        pts = tuple((float(z), float(c)) for z, c in samples)
        return cls("tabulated", c_par=c_par, samples=pts)

    @property
    def periodic(self):
        return self.kind in ("cosine", "triangular")

    @property
    def c_min(self):
        if self.periodic:
            return self.c_par + self.c_mid - self.delta_c
        # PCHIP never overshoots the data, so the sample minimum is the floor.
        return self.c_par + min(c for _, c in self.samples)

    @property
    def c_max(self):
        if self.periodic:
            return self.c_par + self.c_mid + self.delta_c
        return self.c_par + max(c for _, c in self.samples)

    @property
    def slope_peak(self):
        """Largest |dC/dz| of the profile (F/m)."""
        if self.kind == "cosine":
            return 2 * math.pi * abs(self.delta_c) / self.pitch
        if self.kind == "triangular":
            return 4 * abs(self.delta_c) / (self.pitch - 2 * self.smoothing)
        zs = np.linspace(self.samples[0][0], self.samples[-1][0], 20001)
        return float(np.max(np.abs(self._pchip(zs, 1))))

    def violations(self):
        out = []
        if self.kind not in PROFILE_KINDS:
            return [Violation("profile_kind", f"unknown profile kind {self.kind!r}")]
        if self.periodic:
            if not self.pitch > 0:
                out.append(Violation("pitch", f"pitch must be > 0, got {self.pitch!r}"))
            if self.delta_c < 0:
                out.append(Violation("delta_c", "delta_c must be >= 0"))
            if not self.c_min > 0:
                out.append(Violation(
                    "positivity",
                    f"c_par + c_mid - delta_c = {self.c_min:.6g} F; capacitance must stay > 0",
                ))
            if self.kind == "triangular" and not 0 < self.smoothing < self.pitch / 4:
                out.append(Violation(
                    "smoothing", "triangular profiles need 0 < smoothing < pitch/4",
                ))
        else:
            if len(self.samples) < 4:
                out.append(Violation("samples", f"tabulated profile needs >= 4 samples, got {len(self.samples)}"))
            zs = [z for z, _ in self.samples]
            if any(b <= a for a, b in zip(zs, zs[1:])):
                out.append(Violation("samples", "sample z values must be strictly increasing"))
            if any(not c > 0 for _, c in self.samples):
                out.append(Violation("positivity", "tabulated capacitance samples must be > 0"))
            if self.c_par < 0:
                out.append(Violation("positivity", "c_par must be >= 0"))
        return out

    def check(self):
        v = self.violations()
        if v:
            raise InvalidDesignError("invalid capacitance profile: " + "; ".join(x.message for x in v), v)

    # Tabulated profile internals. cached_property writes straight into
    # __dict__, which a frozen dataclass permits.
    @cached_property
    def _interp(self):
        self.check()
        z = np.array([p[0] for p in self.samples])
        c = np.array([p[1] for p in self.samples])
        return PchipInterpolator(z, c, extrapolate=False)

    def _pchip(self, z, nu):
        z = np.asarray(z, dtype=float)
        lo, hi = self.samples[0][0], self.samples[-1][0]
        zc = np.clip(z, lo, hi)
        out = self._interp(zc, nu)
        if nu == 1:
            out = np.where((z < lo) | (z > hi), 0.0, out)
        return out

    def evaluator(self):
        """Return a fast scalar function ``z -> (C, dC/dz)`` for the integrator."""
        self.check()
        c0 = self.c_par + self.c_mid
        dc = self.delta_c
        if self.kind == "cosine":
            k = 2 * math.pi / self.pitch
            off = self.z_offset
            cos, sin = math.cos, math.sin

            def f(z):
                ph = k * (z - off)
                return c0 + dc * cos(ph), -dc * k * sin(ph)
            return f

        if self.kind == "triangular":
            p, s, off = self.pitch, self.smoothing, self.z_offset
            half = 0.5 * p

            def f(z):
                w, dw = _tri_unit(z - off, p, s, half)
                return c0 + dc * w, dc * dw
            return f

        interp = self._interp
        xs = list(interp.x)
        coef = [tuple(interp.c[:, j]) for j in range(interp.c.shape[1])]
        lo, hi = xs[0], xs[-1]
        c_lo = self.c_par + self.samples[0][1]
        c_hi = self.c_par + self.samples[-1][1]
        cp = self.c_par
        last = len(coef) - 1

        def f(z):
            if z <= lo:
                return c_lo, 0.0
            if z >= hi:
                return c_hi, 0.0
            j = min(bisect.bisect_right(xs, z) - 1, last)
            a3, a2, a1, a0 = coef[j]
            u = z - xs[j]
            return cp + ((a3 * u + a2) * u + a1) * u + a0, (3 * a3 * u + 2 * a2) * u + a1
        return f


def _tri_unit(x, p, s, half):
    """Unit triangle wave with parabolic corners, rescaled to reach exactly +-1."""
    x = (x + half) % p - half
    w = abs(x)
    y = half - w
    norm = 1.0 - 2.0 * s / p
    if w < s:
        g = 1.0 - (4.0 / p) * (w * w / (2 * s) + s / 2)
        dg = -(4.0 / p) * w / s
    elif y < s:
        g = -1.0 + (4.0 / p) * (y * y / (2 * s) + s / 2)
        dg = -(4.0 / p) * y / s
    else:
        g = 1.0 - 4.0 * w / p
        dg = -4.0 / p
    sgn = 1.0 if x > 0 else (-1.0 if x < 0 else 0.0)
    return g / norm, dg * sgn / norm


def _tri_unit_array(x, p, s):
    half = 0.5 * p
    x = np.mod(x + half, p) - half
    w = np.abs(x)
    y = half - w
    norm = 1.0 - 2.0 * s / p
    ss = s if s > 0 else 1.0  # s == 0 never selects the rounded branches
    g = np.where(
        w < s, 1.0 - (4.0 / p) * (w * w / (2 * ss) + s / 2),
        np.where(y < s, -1.0 + (4.0 / p) * (y * y / (2 * ss) + s / 2), 1.0 - 4.0 * w / p),
    )
    dg = np.where(w < s, -(4.0 / p) * w / ss, np.where(y < s, -(4.0 / p) * y / ss, -4.0 / p))
    return g / norm, dg * np.sign(x) / norm


def _scalar_or_array(z, values):
    if np.ndim(z) == 0:
        return float(values)
    return values


def cap_at(profile: CapProfile, z):
    """Capacitance at displacement ``z`` (float or array), in farads."""
    profile.check()
    za = np.asarray(z, dtype=float)
    if profile.kind == "cosine":
        c = profile.c_par + profile.c_mid + profile.delta_c * np.cos(
            2 * np.pi * (za - profile.z_offset) / profile.pitch)
    elif profile.kind == "triangular":
        w, _ = _tri_unit_array(za - profile.z_offset, profile.pitch, profile.smoothing)
        c = profile.c_par + profile.c_mid + profile.delta_c * w
    else:
        c = profile.c_par + profile._pchip(za, 0)
    return _scalar_or_array(z, c)


def dcap_dz(profile: CapProfile, z):
    """Analytic derivative of :func:`cap_at` with respect to ``z`` (F/m)."""
    profile.check()
    za = np.asarray(z, dtype=float)
    if profile.kind == "cosine":
        k = 2 * np.pi / profile.pitch
        d = -profile.delta_c * k * np.sin(k * (za - profile.z_offset))
    elif profile.kind == "triangular":
        _, dw = _tri_unit_array(za - profile.z_offset, profile.pitch, profile.smoothing)
        d = profile.delta_c * dw
    else:
        d = profile._pchip(za, 1)
    return _scalar_or_array(z, d)


@dataclass(frozen=True)
class CombGeometry:
    """Array of parallel variable-overlap electrode cells."""

    footprint_width: float  # m, extent along the motion axis
    pitch: float  # m
    finger_fill: float  # electrode width / pitch
    finger_length: float  # m
    gap: float  # m, vertical electrode separation
    permittivity: float = EPS0
    fringe_floor: float = 0.0  # C_min / C_max per cell
    c_par: float = 0.0

    @property
    def cell_count(self):
        # The small slack keeps W/p = 100 from flooring to 99 in binary.
        return int(math.floor(self.footprint_width / self.pitch * (1 + 1e-12)))

    def violations(self):
        out = []
        for name in ("footprint_width", "pitch", "finger_length", "gap", "permittivity"):
            if not getattr(self, name) > 0:
                out.append(Violation(name, f"{name} must be > 0"))
        if not 0 < self.finger_fill <= 0.5:
            out.append(Violation("finger_fill", "finger_fill must lie in (0, 0.5]"))
        if not 0 <= self.fringe_floor < 1:
            out.append(Violation("fringe_floor", "fringe_floor must lie in [0, 1)"))
        if self.c_par < 0:
            out.append(Violation("c_par", "c_par must be >= 0"))
        if not out and self.cell_count < 1:
            out.append(Violation(
                "cells", f"footprint {self.footprint_width:.3e} m holds no {self.pitch:.3e} m cell",
            ))
        return out


def profile_from_geometry(geom: CombGeometry) -> CapProfile:
    """Cosine profile of ``N = floor(W / pitch)`` parallel-plate cells."""
    v = geom.violations()
    if v:
        raise InvalidDesignError("invalid geometry: " + "; ".join(x.message for x in v), v)
    n = geom.cell_count
    c_max = geom.permittivity * (geom.finger_fill * geom.pitch) * geom.finger_length / geom.gap
    c_min = geom.fringe_floor * c_max
    return CapProfile.cosine(
        c_par=geom.c_par,
        c_mid=n * (c_max + c_min) / 2,
        delta_c=n * (c_max - c_min) / 2,
        pitch=geom.pitch,
    )


def transformer_ratio(profile: CapProfile, z, v_pol):
    """Current per unit velocity, ``n = dC/dz * V_pol`` (C/m)."""
    return dcap_dz(profile, z) * v_pol


def electrostatic_force(profile: CapProfile, z, q):
    """Force on the mass at constant charge, ``(q/C)^2 dC/dz / 2``."""
    e = q / cap_at(profile, z)
    return 0.5 * e * e * dcap_dz(profile, z)


def stored_energy(profile: CapProfile, z, q):
    return q * q / (2 * cap_at(profile, z))


@dataclass(frozen=True)
class Polarization:
    source: str = "external"
    v_pol: float = 0.0  # V
    v_pullin: float = 15.0  # V

    def violations(self):
        out = []
        if self.source not in SOURCES:
            out.append(Violation("source", f"source must be one of {SOURCES}, got {self.source!r}"))
        if not self.v_pol >= 0:
            out.append(Violation("v_pol", "v_pol must be >= 0"))
        if not self.v_pullin > 0:
            out.append(Violation("v_pullin", "v_pullin must be > 0"))
        return out


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class HarvesterDesign:
    mech: MechanicalParams
    cap: CapProfile
    pol: Polarization
    load_ohms: float

    def with_load(self, r):
        return replace(self, load_ohms=r)

    def with_v_pol(self, v):
        return replace(self, pol=replace(self.pol, v_pol=v))


def validate_design(design: HarvesterDesign) -> list[Violation]:
    """Collect every invariant violation; an empty list means simulatable."""
    out = []
    out += design.mech.violations()
    out += design.cap.violations()
    out += design.pol.violations()
    if not design.load_ohms > 0:
        out.append(Violation("load", f"load_ohms must be > 0, got {design.load_ohms!r}"))
    if design.pol.v_pol >= design.pol.v_pullin:
        out.append(Violation(
            "pull_in",
            f"v_pol={design.pol.v_pol:g} V reaches the pull-in threshold {design.pol.v_pullin:g} V",
        ))
    return out


def require_valid(design: HarvesterDesign) -> None:
    """Raise :class:`PullInError` or :class:`InvalidDesignError` on violations."""
    v = validate_design(design)
    if not v:
        return
    msg = "; ".join(x.message for x in v)
    if any(x.code == "pull_in" for x in v):
        raise PullInError(msg, v)
    raise InvalidDesignError(msg, v)
