import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from esharvest.errors import DomainError, NumericalFailure, PullInError
from esharvest.model import (
    CapProfile, HarvesterDesign, MechanicalParams, Polarization, cap_at, dcap_dz, stored_energy,
)
from esharvest.smallsignal import harmonic_response
from esharvest.transient import (
    SERIES_COLUMNS, Excitation, SimParams, TransientResult, auto_sim_params, count_zero_crossings,
    dt_bound, energy_ledger, simulate, static_deflection, summarize,
)

PF = 1e-12
UM = 1e-6
PITCH = 20 * UM
F0 = 2600.0
W0 = 2 * math.pi * F0


def device(v_pol=10.0, b=1e-3, z_max=10 * UM, restitution=0.0, profile=None, r=1e6):
    profile = profile or CapProfile.cosine(2 * PF, 8 * PF, 2.12 * PF, PITCH, PITCH / 4)
    mech = MechanicalParams(1e-5, 1e-5 * W0 ** 2, b, z_max, restitution)
    return HarvesterDesign(mech, profile, Polarization("external", v_pol, 15.0), r)


def flat(c=10 * PF):
    return CapProfile.cosine(0.0, c, 0.0, PITCH)


# -- static rest position ---------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 14.0), st.floats(0.0, 1.0))
def test_static_deflection_balances_dc_force(v_pol, phase):
    prof = CapProfile.cosine(2 * PF, 8 * PF, 2.12 * PF, PITCH, phase * PITCH)
    d = device(v_pol=v_pol, profile=prof)
    zs = static_deflection(d)
    force = 0.5 * v_pol ** 2 * float(dcap_dz(prof, zs))
    assert d.mech.stiffness * zs == pytest.approx(force, rel=1e-12, abs=1e-30)
    assert static_deflection(device(v_pol=0.0)) == 0.0


# -- electrical relaxation --------------------------------------------------

def test_rc_relaxation():
    d = device(profile=flat())
    exc = Excitation.prescribed_sine(0.0, 1000.0)
    tau = 1e6 * 10 * PF
    res = simulate(d, exc, SimParams(dt=tau / 100, t_end=10 * tau))
    t = res.series["t"]
    q_exact = 1e-10 * (1 - np.exp(-t / tau))
    assert np.allclose(res.series["q"], q_exact, rtol=0, atol=1e-18)
    assert res.series["v_load"][0] == pytest.approx(10.0)
    assert np.allclose(res.series["v_load"], 10 * np.exp(-t / tau), rtol=0, atol=1e-7)
    led = res.ledger
    e_cap = stored_energy(d.cap, 0.0, res.series["q"][-1])
    assert led.w_source == pytest.approx(2 * e_cap, rel=1e-4)
    assert led.e_load == pytest.approx(e_cap, rel=1e-3)
    assert led.residual_rel < 1e-9


def test_rc_relaxation_base_mode_no_motion():
    d = device(profile=flat())
    exc = Excitation.base_sine(0.0, F0)
    res = simulate(d, exc, SimParams(dt=2e-7, t_end=1e-4))
    assert np.all(res.series["z"] == 0.0) and np.all(res.series["v"] == 0.0)
    assert res.series["q"][-1] == pytest.approx(1e-10 * (1 - math.exp(-10)), rel=1e-9)


def test_unpolarized_is_silent():
    d = device(v_pol=0.0)
    exc = Excitation.base_sine(9.81, F0)
    res = simulate(d, exc, auto_sim_params(d, exc, periods=5))
    assert np.max(np.abs(res.series["v_load"])) == 0.0
    assert res.summary.p_avg == 0.0
    assert res.ledger.w_source == 0.0 and res.ledger.e_load == 0.0


def test_zero_amplitude_motion_is_silent_after_settling():
    d = device()
    exc = Excitation.prescribed_sine(0.0, 200.0)
    res = simulate(d, exc, SimParams(dt=dt_bound(d, exc), t_end=0.01, t_settle=0.005,
                                     q0=0.5 * cap_at(d.cap, 0.0) * 10.0))
    mask = res.series["t"] >= 0.005
    assert np.max(np.abs(res.series["v_load"][mask])) < 1e-9


# -- run-time checks --------------------------------------------------------

def test_pull_in_refused():
    d = device(v_pol=16.0)
    with pytest.raises(PullInError):
        simulate(d, Excitation.base_sine(9.81, F0), SimParams(dt=1e-7, t_end=1e-3))


def test_step_bound_enforced():
    d = device()
    exc = Excitation.base_sine(9.81, F0)
    bound = dt_bound(d, exc)
    assert bound == pytest.approx(min(1 / (50 * F0), 1e6 * d.cap.c_min / 20))
    with pytest.raises(DomainError):
        simulate(d, exc, SimParams(dt=1.01 * bound, t_end=1e-3))
    with pytest.raises(DomainError):
        simulate(d, exc, SimParams(dt=bound, t_end=1e-3, t_settle=1e-3))


def test_numerical_failure_reports_time():
    d = device()
    exc = Excitation.base_sine(9.81, F0)
    dt = dt_bound(d, exc)
    # Squared field overflows, so the force is infinite on the first stage.
    with pytest.raises(NumericalFailure) as err:
        simulate(d, exc, SimParams(dt=dt, t_end=1e-3, z0=1 * UM, q0=1e160))
    assert 0.0 <= err.value.time <= dt


def test_prescribed_overflow_is_numerical_failure():
    d = device()
    exc = Excitation.prescribed_sine(1 * UM, 100.0)
    with pytest.raises(NumericalFailure):
        simulate(d, exc, SimParams(dt=dt_bound(d, exc), t_end=1e-3, q0=1e160))


# -- series and determinism -------------------------------------------------

def test_series_layout_and_determinism():
    d = device()
    exc = Excitation.base_sine(9.81, F0)
    sim = auto_sim_params(d, exc, periods=5)
    a, b = simulate(d, exc, sim), simulate(d, exc, sim)
    assert tuple(a.series) == SERIES_COLUMNS
    t = a.series["t"]
    assert np.all(np.diff(t) > 0)
    assert np.allclose(np.diff(t), sim.dt, rtol=1e-9, atol=0)
    for col in SERIES_COLUMNS:
        assert a.series[col].tobytes() == b.series[col].tobytes()
    assert a.summary == b.summary and a.ledger == b.ledger
    assert a.summary.p_avg >= 0


# -- impacts ----------------------------------------------------------------

@pytest.mark.parametrize("restitution", [0.0, 0.5])
def test_impacts_respect_end_stop(restitution):
    d = device(z_max=2 * UM, restitution=restitution)
    exc = Excitation.base_sine(9.81, F0)
    sim = auto_sim_params(d, exc, periods=10, steady_start=False)
    res = simulate(d, exc, sim)
    z, v = res.series["z"], res.series["v"]
    travel = np.max(np.abs(v)) * sim.dt
    assert np.max(np.abs(z)) <= d.mech.z_max + travel
    assert res.summary.impact_count > 0
    assert any(e.kind == "impact" for e in res.events)
    assert res.ledger.e_impact_loss > 0
    assert res.ledger.residual_rel < 1e-4


def test_elastic_impacts_lose_no_energy():
    d = device(z_max=2 * UM, restitution=1.0)
    exc = Excitation.base_sine(9.81, F0)
    res = simulate(d, exc, auto_sim_params(d, exc, periods=5, steady_start=False))
    assert res.summary.impact_count > 0
    assert abs(res.ledger.e_impact_loss) < 1e-12 * res.ledger.e_damper


def test_prescribed_overtravel_warns():
    d = device(z_max=10 * UM)
    exc = Excitation.prescribed_sine(20 * UM, 200.0)
    res = simulate(d, exc, auto_sim_params(d, exc, periods=1))
    assert [e.kind for e in res.events] == ["clip_warning"]
    assert res.summary.impact_count == 0


# -- energy -----------------------------------------------------------------

def test_no_spontaneous_energy():
    d = device()
    exc = Excitation.base_sine(0.0, F0)
    q0 = 0.3 * cap_at(d.cap, 1 * UM) * 10.0
    res = simulate(d, exc, SimParams(dt=dt_bound(d, exc), t_end=3e-3, z0=1 * UM, v0=0.02, q0=q0))
    s, inc = res.series, res.increments
    m, k = d.mech.mass, d.mech.stiffness
    n = res.n_steps
    for j0 in range(0, n, n // 7):
        stored = (0.5 * m * s["v"][j0] ** 2 + 0.5 * k * s["z"][j0] ** 2
                  + s["q"][j0] ** 2 / (2 * s["c"][j0]))
        for j1 in (j0 + 1, (j0 + n) // 2, n):
            e_load = math.fsum(inc["e_load"][j0:j1])
            w_src = math.fsum(inc["w_source"][j0:j1])
            assert e_load <= w_src + stored


def test_ledger_windows_add_up():
    d = device()
    exc = Excitation.base_sine(9.81, F0)
    res = simulate(d, exc, auto_sim_params(d, exc, periods=4))
    mid = res.sim.t_end / 2
    a = energy_ledger(res, t1=mid)
    b = energy_ledger(res, t0=mid)
    whole = res.ledger
    assert a.e_load + b.e_load == pytest.approx(whole.e_load, rel=1e-12)
    assert a.w_base + b.w_base == pytest.approx(whole.w_base, rel=1e-12)
    assert b.residual_rel < 1e-4
    with pytest.raises(DomainError):
        energy_ledger(res, device(b=2e-3))


# -- prescribed motion ------------------------------------------------------

def _mirror_error(res, exc, turn_index, n_quarter):
    vl = res.series["v_load"]
    taus = np.arange(1, n_quarter, 97)
    after = np.abs(vl[turn_index + taus])
    before = np.abs(vl[turn_index - taus])
    return float(np.max(np.abs(after - before)) / np.max(np.abs(vl)))


def _mirror_run(amp, f):
    d = device(z_max=100 * UM)
    period = 1 / f
    exc = Excitation.prescribed_sine(amp, f)
    n_quarter = math.ceil(period / 4 / dt_bound(d, exc))
    dt = period / 4 / n_quarter
    cz0 = cap_at(d.cap, 0.0) * d.pol.v_pol
    res = simulate(d, exc, SimParams(dt=dt, t_end=period, q0=cz0))
    wrc = 2 * math.pi * f * d.load_ohms * d.cap.c_max
    return wrc, _mirror_error(res, exc, 3 * n_quarter, n_quarter)


@pytest.mark.parametrize("amp, f", [
    (20 * UM, 10.0),
    (5 * UM, 40.0),
    # omega*R*C0 = 3e-3 here, but the lag at the multiplied frequency still
    # gives about 2.4% asymmetry; the 2% bound needs omega*R*C0*2*pi*A/p < ~0.01.
    pytest.param(20 * UM, 40.0, marks=pytest.mark.xfail(strict=True, reason="RC lag at 8x f")),
])
def test_quasi_static_mirror_symmetry(amp, f):
    wrc, err = _mirror_run(amp, f)
    assert wrc < 1e-2
    assert err < 0.02


def test_mirror_asymmetry_is_rc_lag():
    # The residual asymmetry is the RC lag at the local electrical frequency
    # omega * 2 pi A / p, so it halves with the drive frequency.
    _, e40 = _mirror_run(20 * UM, 40.0)
    _, e20 = _mirror_run(20 * UM, 20.0)
    assert e40 / e20 == pytest.approx(2.0, rel=0.05)


@pytest.mark.parametrize("amp_in_pitches", [1.0, 1.5, 2.0, 3.0])
def test_frequency_multiplication(amp_in_pitches):
    prof = CapProfile.cosine(2 * PF, 8 * PF, 2.12 * PF, PITCH, 0.0)
    d = device(profile=prof, z_max=100 * UM)
    f = 40.0
    exc = Excitation.prescribed_sine(amp_in_pitches * PITCH, f)
    res = simulate(d, exc, auto_sim_params(d, exc, periods=3))
    window = res.sim.t_end - res.sim.t_settle
    expected = round(4 * amp_in_pitches) * f
    assert not res.summary.low_confidence
    assert abs(res.summary.dominant_freq - expected) <= 1 / (2 * window) + 1e-9


def test_sampled_motion_matches_sine():
    d = device(z_max=100 * UM)
    f = 100.0
    sine = Excitation.prescribed_sine(15 * UM, f)
    ts = np.linspace(0.0, 0.03, 3001)
    samples = Excitation.from_samples("prescribed_motion", zip(ts, 15 * UM * np.sin(2 * math.pi * f * ts)))
    dt = dt_bound(d, sine)
    q0 = cap_at(d.cap, 0.0) * 10.0
    sim = SimParams(dt=dt, t_end=0.029, t_settle=0.01, q0=q0)
    a, b = simulate(d, sine, sim), simulate(d, samples, sim)
    assert b.summary.p_avg == pytest.approx(a.summary.p_avg, rel=1e-3)
    assert b.ledger.residual_rel < 1e-9
    with pytest.raises(DomainError):
        simulate(d, samples, SimParams(dt=dt, t_end=0.031, t_settle=0.01, q0=q0))
    auto = auto_sim_params(d, samples)
    assert auto.t_end <= 0.03
    assert simulate(d, samples, auto).ledger.residual_rel < 1e-9


def test_sampled_base_accel_matches_sine():
    d = device()
    sine = Excitation.base_sine(2.0, F0)
    sim = auto_sim_params(d, sine, periods=10)
    ts = np.arange(0.0, sim.t_end + 1e-5, 1e-5)
    samples = Excitation.from_samples("base_accel", zip(ts, 2.0 * np.sin(W0 * ts)))
    a, b = simulate(d, sine, sim), simulate(d, samples, sim)
    assert b.summary.p_avg == pytest.approx(a.summary.p_avg, rel=2e-2)


# -- linear regime ----------------------------------------------------------

@pytest.mark.parametrize("v_pol", [5.0, 10.0])
def test_linear_regime_matches_small_signal(v_pol):
    d = device(v_pol=v_pol)
    unit = harmonic_response(d, W0, 1.0)
    accel = (PITCH / 40) / unit.displacement_amp  # peak-to-peak stroke = pitch / 20
    exc = Excitation.base_sine(accel, F0)
    rep = harmonic_response(d, W0, accel)
    assert d.mech.damping >= 10 * rep.z_e.real
    res = simulate(d, exc, auto_sim_params(d, exc, periods=20))
    assert res.summary.p_avg == pytest.approx(rep.load_power, rel=0.05)


# -- summary ----------------------------------------------------------------

def _fake(v_load, dt, r=1e6, t_settle=0.0):
    n = len(v_load)
    t = np.arange(n) * dt
    series = {c: np.zeros(n) for c in SERIES_COLUMNS}
    series.update(t=t, v_load=v_load, i=v_load / r, p_load=v_load * v_load / r)
    return TransientResult(device(), Excitation.base_sine(0.0, F0), SimParams(dt, t[-1], t_settle),
                           series, [])


def test_summary_of_pure_sine():
    dt = 1 / (F0 * 400)
    t = np.arange(400 * 50 + 1) * dt
    s = summarize(_fake(0.3 * np.sin(W0 * t + 0.1), dt))
    assert s.v_load_rms == pytest.approx(0.3 / math.sqrt(2), rel=1e-3)
    assert s.v_load_rms == pytest.approx(0.212, rel=2e-3)
    assert s.p_avg == pytest.approx(45e-9, rel=1e-3)
    assert s.dominant_freq == pytest.approx(F0, abs=1 / (2 * t[-1]))
    assert not s.low_confidence


def test_summary_identity_and_zero():
    dt = 1e-6
    v = np.full(1000, 0.3)
    s = summarize(_fake(v, dt))
    assert s.p_avg == pytest.approx(s.v_load_rms ** 2 / 1e6, rel=1e-12)
    assert s.p_avg == pytest.approx(90e-9, rel=1e-12)
    z = summarize(_fake(np.zeros(1000), dt))
    assert z.p_avg == 0 and z.v_load_rms == 0 and z.v_load_peak_pos == 0 and z.v_load_peak_neg == 0


def test_short_window_is_low_confidence():
    dt = 1 / (F0 * 100)
    t = np.arange(200) * dt
    s = summarize(_fake(np.sin(W0 * t + 0.1), dt))
    assert s.low_confidence


def test_zero_crossing_dead_band():
    x = np.array([1.0, 1e-9, -1e-9, 1.0, -1.0])
    assert count_zero_crossings(x) == 1
    assert count_zero_crossings(np.zeros(5)) == 0
