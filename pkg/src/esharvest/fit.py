"""Least-squares calibration of periodic capacitance profiles to C(z) data."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, FitError
from .model import CapProfile, _tri_unit_array, cap_at

MIN_SAMPLES = 8


@dataclass(frozen=True)
class CapMeasurement:
    samples: tuple  # ((z_m, c_f), ...)

    @classmethod
    def from_arrays(cls, z, c):
        return cls(tuple((float(a), float(b)) for a, b in zip(z, c)))

    @property
    def z(self):
        return np.array([s[0] for s in self.samples], dtype=float)

    @property
    def c(self):
        return np.array([s[1] for s in self.samples], dtype=float)

    @property
    def span(self):
        return self.samples[-1][0] - self.samples[0][0]

    def check(self):
        if len(self.samples) < MIN_SAMPLES:
            raise DomainError(f"need >= {MIN_SAMPLES} capacitance samples, got {len(self.samples)}")
        if np.any(np.diff(self.z) <= 0):
            raise DomainError("measurement z values must be strictly increasing")
        if not np.all(np.isfinite(self.c)):
            raise DomainError("measurement contains non-finite capacitance values")


@dataclass(frozen=True)
class FitResult:
    profile: CapProfile
    rmse: float
    max_abs_err: float
    iterations: int


def estimate_pitch(z, c):
    """Dominant spatial period from the autocorrelation of detrended data.

    Returns ``None`` when the autocorrelation shows no peak after its first
    negative lobe, i.e. the record is shorter than about one period.
    """
    z = np.asarray(z, dtype=float)
    c = np.asarray(c, dtype=float)
    n = max(len(z), 64)
    zu = np.linspace(z[0], z[-1], n)
    cu = np.interp(zu, z, c)
    cu = cu - np.polyval(np.polyfit(zu, cu, 1), zu)
    if not np.any(cu):
        return None
    # Biased estimate: the (1 - lag/n) taper makes the first period the
    # highest peak, so noise cannot promote a multiple of the pitch.
    r = np.correlate(cu, cu, mode="full")[n - 1:]
    r = r / r[0]
    neg = np.nonzero(r < 0)[0]
    if len(neg) == 0:
        return None
    stop = max(neg[0] + 2, int(0.9 * n))
    seg = r[neg[0]:stop]
    if len(seg) < 3:
        return None
    j = int(np.argmax(seg)) + neg[0]
    if j <= neg[0] or j >= stop - 1 or r[j] <= 0:
        return None
    # Parabolic refinement of the peak position.
    y0, y1, y2 = r[j - 1], r[j], r[j + 1]
    den = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
    return (j + shift) * (zu[1] - zu[0])


def _scan_pitch(z, c, span):
    """Fallback: best linear cos/sin fit over a pitch grid."""
    best = None
    for p in np.geomspace(4 * span / len(z), span, 400):
        k = 2 * np.pi / p
        a = np.column_stack([np.ones_like(z), np.cos(k * z), np.sin(k * z)])
        coef, res, *_ = np.linalg.lstsq(a, c, rcond=None)
        sse = float(np.sum((a @ coef - c) ** 2))
        if best is None or sse < best[0]:
            best = (sse, p)
    return best[1]


def _linear_phase(z, c, pitch):
    k = 2 * np.pi / pitch
    a = np.column_stack([np.ones_like(z), np.cos(k * z), np.sin(k * z)])
    (off, ca, sa), *_ = np.linalg.lstsq(a, c, rcond=None)
    amp = math.hypot(ca, sa)
    z0 = math.atan2(sa, ca) / k
    return off, amp, z0


def fit_cap_profile(meas: CapMeasurement, kind: str = "cosine", smoothing_fraction: float = 1 / 40,
                    max_iter: int = 200, xtol: float = 1e-9) -> FitResult:
    """Fit ``offset + delta_c * w(2 pi (z - z_offset) / pitch)`` to the samples.

    ``offset`` is returned as ``c_mid`` with ``c_par = 0``. For the triangular
    kind the corner smoothing is held at ``smoothing_fraction * pitch``.
    """
    meas.check()
    if kind not in ("cosine", "triangular"):
        raise DomainError(f"cannot fit profile kind {kind!r}")
    z, c = meas.z, meas.c
    span = meas.span
    pitch0 = estimate_pitch(z, c)
    if pitch0 is None:
        pitch0 = _scan_pitch(z, c, span)
    off0, amp0, z00 = _linear_phase(z, c, pitch0)

    # Work in data-scaled units so all parameters are O(1).
    cs = float(np.max(np.abs(c)))
    zs = span
    zn = (z - z[0]) / zs
    cn = c / cs
    x0 = np.array([off0 / cs, amp0 / cs, pitch0 / zs, (z00 - z[0]) / zs])

    def model(x, zz):
        off, amp, p, z0 = x
        if kind == "cosine":
            return off + amp * np.cos(2 * np.pi * (zz - z0) / p)
        w, _ = _tri_unit_array(zz - z0, p, smoothing_fraction * p)
        return off + amp * w

    def resid(x):
        return model(x, zn) - cn

    def jac(x):
        off, amp, p, z0 = x
        ph = 2 * np.pi * (zn - z0) / p
        s = np.sin(ph)
        return np.column_stack([np.ones_like(zn), np.cos(ph), amp * s * ph / p, amp * s * 2 * np.pi / p])

    if kind == "cosine":
        sol = least_squares(resid, x0, jac=jac, method="lm", xtol=xtol, ftol=1e-15, gtol=1e-15,
                            max_nfev=max_iter)
        iters = int(sol.njev) if sol.njev is not None else int(sol.nfev)
    else:
        sol = least_squares(resid, x0, jac="2-point", method="lm", xtol=xtol, ftol=1e-15, gtol=1e-15,
                            max_nfev=max_iter * (len(x0) + 1))
        iters = int(sol.nfev) // (len(x0) + 1)

    off, amp, p, z0 = (float(v) for v in sol.x)
    if amp < 0:
        amp, z0 = -amp, z0 + p / 2
    pitch = p * zs
    z_off = float((z0 * zs + z[0]) % pitch)
    profile = CapProfile(kind, 0.0, off * cs, amp * cs, pitch, z_off,
                         smoothing_fraction * pitch if kind == "triangular" else 0.0)
    err = cap_at(profile, z) - c if profile.c_min > 0 and pitch > 0 else np.full_like(c, np.inf)
    result = FitResult(
        profile=profile,
        rmse=float(np.sqrt(np.mean(err * err))),
        max_abs_err=float(np.max(np.abs(err))),
        iterations=iters,
    )
    if not np.isfinite(pitch) or pitch <= 0:
        raise FitError("fit diverged to a non-positive pitch", best=result, diagnostic=sol.message)
    if pitch > 1.05 * span:
        raise DomainError(
            f"data span {span:.4e} m is shorter than one fitted period ({pitch:.4e} m); "
            "need at least one full period")
    if sol.status <= 0:
        raise FitError(f"fit did not converge in {max_iter} iterations", best=result,
                       diagnostic=sol.message)
    return result
