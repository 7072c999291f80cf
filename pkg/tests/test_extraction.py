from __future__ import annotations

import numpy as np
import pytest

from wgphase.emitter import EmitterParams, transmission
from wgphase.extraction import (NoFringeError, continue_phase_branch,
                                estimate_path_length_fft, extract_phasor_series,
                                window_phasors)
from wgphase.interferometer import (ConstantPhase, FringeTrace, InterferometerConfig,
                                    fringe_trace)
from wgphase.units import TWO_PI, detuning_angular, wrap_angle

EMITTER = EmitterParams.isotropic(gamma=12.3, gamma_dp=3.9, beta=1.0, phi0=-0.25)


def make_pair(delta_l=25.0, span=12.0, points=15001, p=EMITTER, visibility=0.65,
              phi_env=0.0):
    cfg = InterferometerConfig(delta_l=delta_l, visibility=visibility, p_lo=1e6,
                               p_sig=1e4, integration_time=0.1,
                               phi_env=ConstantPhase(phi_env))
    freq = np.linspace(-span, span, points)
    on = fringe_trace(cfg, p, freq, qd_on=True)
    off = fringe_trace(cfg, p, freq, qd_on=False)
    return cfg, on, off


def test_fft_recovers_path_length():
    cfg, _, off = make_pair(delta_l=2.78, span=15.0, points=4501)
    est = estimate_path_length_fft(off)
    assert est == pytest.approx(2.78, rel=5e-3)


def test_fft_linearity_over_path_lengths():
    for dl in (0.5, 1.0, 2.0, 2.78, 5.0, 10.0):
        _, _, off = make_pair(delta_l=dl, span=15.0, points=6001)
        assert estimate_path_length_fft(off) == pytest.approx(dl, rel=5e-3)


def test_fft_constant_trace_rejected():
    trace = FringeTrace(freq=np.linspace(0, 1, 512), intensity=np.full(512, 10.0))
    with pytest.raises(NoFringeError):
        estimate_path_length_fft(trace)


def test_fft_two_component_returns_dominant():
    freq = np.linspace(-10, 10, 6000)
    c = 299792458.0
    main = 2.78
    theta1 = TWO_PI * freq * 1e9 * main / c
    theta2 = TWO_PI * freq * 1e9 * (main / 2) / c
    counts = 1e4 + 2e3 * np.cos(theta1) + 0.3 * 2e3 * np.cos(theta2)
    est = estimate_path_length_fft(FringeTrace(freq=freq, intensity=counts))
    assert est == pytest.approx(main, rel=5e-3)


def test_fft_tie_break_prefers_smaller_path():
    freq = np.linspace(-10, 10, 6000)
    c = 299792458.0
    theta1 = TWO_PI * freq * 1e9 * 3.0 / c
    theta2 = TWO_PI * freq * 1e9 * 1.5 / c
    counts = 1e4 + 2e3 * np.cos(theta1) + 2e3 * np.cos(theta2)
    with pytest.warns(RuntimeWarning, match="within 1%"):
        est = estimate_path_length_fft(FringeTrace(freq=freq, intensity=counts))
    assert est == pytest.approx(1.5, rel=5e-3)


def test_fft_nonuniform_grid_rejected():
    freq = np.sort(np.random.default_rng(0).uniform(0, 10, 500))
    trace = FringeTrace(freq=freq, intensity=np.cos(freq * 40) + 2)
    with pytest.raises(ValueError, match="uniform"):
        estimate_path_length_fft(trace)


def test_self_comparison_is_identity():
    _, _, off = make_pair(delta_l=2.78, span=15.0, points=4501)
    points = extract_phasor_series(off, off, delta_l=2.78)
    assert len(points) > 30
    for q in points:
        assert q.phase_shift == pytest.approx(0.0, abs=1e-12)
        assert q.amp_ratio == pytest.approx(1.0, abs=1e-12)
        assert q.offset_ratio == pytest.approx(1.0, abs=1e-12)


def test_far_detuned_phase_vanishes():
    # resonance far outside the sweep: no emitter response left (the phase
    # tail falls off as (beta*gamma/2)/detuning, so "far" means detunings
    # large enough to push it below the 1e-6 target)
    p = EMITTER.with_(f0=-1e7, phi0=0.0)
    _, on, off = make_pair(delta_l=2.78, span=15.0, points=4501, p=p)
    for q in extract_phasor_series(on, off, delta_l=2.78):
        assert abs(q.phase_shift) < 1e-6
        assert q.amp_ratio == pytest.approx(1.0, abs=1e-6)


def test_noiseless_extraction_matches_model_pointwise():
    # window span (set by the fringe period at this path imbalance) keeps the
    # local-polynomial bias below 1e-6
    _, on, off = make_pair(delta_l=25.0, span=12.0, points=15001)
    points = extract_phasor_series(on, off, delta_l=25.0)
    freq = np.array([q.freq for q in points])
    t, i_t = transmission(EMITTER, detuning_angular(freq, 0.0), 0.0, True)
    want_phase = wrap_angle(np.angle(t) + EMITTER.phi0)
    got_phase = np.array([q.phase_shift for q in points])
    np.testing.assert_allclose(got_phase, want_phase, atol=1e-6)
    np.testing.assert_allclose([q.amp_ratio for q in points], np.abs(t), atol=1e-6)
    np.testing.assert_allclose([q.offset_ratio for q in points], i_t, atol=5e-6)


def test_phase_shift_wrapped_range():
    # an ideal chiral emitter pushes the shift to +/- pi; outputs stay in (-pi, pi]
    p = EmitterParams.chiral(gamma=12.3, beta_dir=1.0, phi0=0.0)
    _, on, off = make_pair(delta_l=25.0, span=12.0, points=15001, p=p)
    points = extract_phasor_series(on, off, delta_l=25.0)
    shifts = np.array([q.phase_shift for q in points])
    assert np.all(shifts > -np.pi) and np.all(shifts <= np.pi)
    assert np.max(np.abs(shifts)) > 3.0


def test_env_phase_2pi_invariance():
    _, on_a, off_a = make_pair(phi_env=0.4)
    _, on_b, off_b = make_pair(phi_env=0.4 + TWO_PI)
    pa = extract_phasor_series(on_a, off_a, delta_l=25.0)
    pb = extract_phasor_series(on_b, off_b, delta_l=25.0)
    for qa, qb in zip(pa, pb):
        assert qa.phase_shift == pytest.approx(qb.phase_shift, abs=1e-9)
        assert qa.amp_ratio == pytest.approx(qb.amp_ratio, abs=1e-9)


def test_constant_env_phase_shifts_window_phase():
    # each trace's fringe phase shifts by the environmental constant; the
    # on/off difference is unchanged
    shift = 0.6
    _, on_a, _ = make_pair(phi_env=0.0)
    _, on_b, _ = make_pair(phi_env=shift)
    wa = window_phasors(on_a, 25.0)
    wb = window_phasors(on_b, 25.0)
    for a, b in zip(wa, wb):
        assert wrap_angle(b.phase - a.phase) == pytest.approx(shift, abs=1e-7)


def test_grid_mismatch_rejected():
    _, on, _ = make_pair(points=15001)
    _, _, off = make_pair(points=14001)
    with pytest.raises(ValueError, match="share a frequency grid"):
        extract_phasor_series(on, off)


def test_low_contrast_flagged_not_dropped():
    # ideal coupling with no dephasing: fringe amplitude vanishes near
    # resonance, those windows must be flagged but present
    from wgphase.interferometer import apply_shot_noise

    p = EmitterParams.isotropic(gamma=12.3, gamma_dp=0.0, beta=1.0, phi0=0.0)
    cfg = InterferometerConfig(delta_l=2.78, visibility=0.65, p_lo=1e6, p_sig=400.0,
                               integration_time=0.1, phi_env=ConstantPhase(0.0))
    freq = np.linspace(-15, 15, 4501)
    on = fringe_trace(cfg, p, freq, qd_on=True)
    off = fringe_trace(cfg, p, freq, qd_on=False)
    points = extract_phasor_series(apply_shot_noise(on, 1), apply_shot_noise(off, 2),
                                   delta_l=2.78)
    flagged = [q for q in points if q.low_contrast]
    assert flagged, "expected low-contrast windows near the extinction point"
    assert all(abs(q.freq) < 1.5 for q in flagged)
    assert len(points) == len(extract_phasor_series(on, off, delta_l=2.78))


def test_window_must_cover_one_period():
    _, on, off = make_pair(points=4501)
    with pytest.raises(ValueError, match="at least one fringe period"):
        extract_phasor_series(on, off, window_periods=0.5, delta_l=25.0)


def test_continue_phase_branch():
    raw = wrap_angle(np.linspace(0, 4 * np.pi, 40))
    smooth = continue_phase_branch(raw)
    assert np.all(np.diff(smooth) >= -1e-9)
    np.testing.assert_allclose(smooth, np.linspace(0, 4 * np.pi, 40), atol=1e-9)


def test_extraction_with_estimated_path_length():
    # delta_l defaults to the FFT estimate of the off trace; results must
    # match the known-path extraction closely
    _, on, off = make_pair(delta_l=2.78, span=15.0, points=4501)
    auto = extract_phasor_series(on, off)
    known = extract_phasor_series(on, off, delta_l=2.78)
    assert len(auto) == len(known)
    for a, k in zip(auto, known):
        assert a.phase_shift == pytest.approx(k.phase_shift, abs=5e-4)
        assert a.amp_ratio == pytest.approx(k.amp_ratio, abs=5e-4)
