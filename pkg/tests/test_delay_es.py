import math

import numpy as np
import pytest

from unbiased_es.delay_es import (
    DelayLoopParams,
    actuator_value,
    default_dt,
    initial_state,
    run_delay_scenario,
    step_delay_loop,
    step_grid,
    theta_hat_derivative,
    validate_params_delay,
)
from unbiased_es.errors import DomainError
from unbiased_es.signals import DitherParams


def _params(qmap, k=0.03, lam=0.04, omega_h=1.0, D=5.0, **kw):
    return DelayLoopParams(k=k, dither=DitherParams(0.8, 5.0, lam, D), omega_h=omega_h, map=qmap, **kw)


def test_validate_nominal(qmap):
    report = validate_params_delay(_params(qmap), 2.0)
    assert report.passed
    assert [c.passed for c in report.conditions] == [True, True]
    assert report[0].margin == pytest.approx(0.46)
    assert report[1].margin == pytest.approx(0.01)


def test_validate_filter_condition(qmap):
    report = validate_params_delay(_params(qmap, lam=0.6), 2.0)
    assert [c.passed for c in report.conditions] == [False, False]
    assert not report.conditions[0].passed


def test_validate_gain_condition(qmap):
    report = validate_params_delay(_params(qmap, k=0.01), 2.0)
    assert [c.passed for c in report.conditions] == [True, False]
    assert "FAIL" in report.format()


def test_validate_rejects_bad_hessian_bound(qmap):
    with pytest.raises(DomainError):
        validate_params_delay(_params(qmap), 0.0)


def test_params_validation(qmap):
    with pytest.raises(DomainError):
        _params(qmap, k=0.0)
    with pytest.raises(DomainError):
        _params(qmap, omega_h=0.0)
    with pytest.raises(DomainError):
        _params(qmap, dt=-1.0)


def _state_with_drift(qmap, drift):
    params = _params(qmap, D=1.0)
    state = initial_state(params, 0.1)
    # replace the history with a ramp so theta_hat(t) - theta_hat(t - 1) = drift
    from unbiased_es.engine import HistoryBuffer

    buf = HistoryBuffer()
    for i in range(-20, 1):
        buf.append(0.1 * i, drift * (1.0 + 0.1 * i))
    state.history = buf
    state.theta_hat = drift
    return state


def test_theta_hat_derivative_examples(qmap):
    state = _state_with_drift(qmap, 0.0)
    assert theta_hat_derivative(state, 0.0, 2.0, 0.03, 1.0) == 0.0
    state = _state_with_drift(qmap, 0.5)
    assert theta_hat_derivative(state, 1.0, 2.0, 0.03, 1.0) == pytest.approx(-0.06, abs=1e-12)
    # no delay: only the gradient step survives
    assert theta_hat_derivative(state, 1.0, 2.0, 0.03, 0.0) == pytest.approx(-0.03)


def test_actuator_value(qmap):
    params = _params(qmap)
    state = initial_state(params, 0.1)
    assert actuator_value(state, params) == pytest.approx(-0.0866883584229909, abs=1e-12)
    state.t = -5.0
    assert actuator_value(state, params) == 0.0
    state.theta_hat = 2.0
    state.t = -5.0
    assert actuator_value(state, params) == 2.0


def test_default_dt_and_grid():
    assert default_dt(DitherParams(0.8, 5.0, 0.04, 5.0)) == pytest.approx(2 * math.pi / 5 / 40)
    assert default_dt(DitherParams(0.8, 5.0, 0.04, 0.5)) == pytest.approx(0.01)
    n, dt = step_grid(300.0, 0.031, 5)
    assert n % 5 == 0
    assert n * dt == pytest.approx(300.0, rel=1e-15)
    assert dt <= 0.031


def test_step_larger_than_delay(qmap):
    params = _params(qmap, D=0.05)
    state = initial_state(params, 0.01)
    with pytest.raises(DomainError):
        step_delay_loop(state, params, 0.1)


def test_zero_horizon(qmap):
    traj = run_delay_scenario(_params(qmap, horizon=0.0))
    assert len(traj) == 1
    assert traj["t"][0] == 0.0
    assert traj["estimate"][0] == 0.0


def test_recording_is_lossless(qmap):
    # with D a whole number of samples the delayed output equals the map of an earlier recorded input
    params = _params(qmap, dt=0.05, horizon=20.0, sample_stride=5)
    traj = run_delay_scenario(params)
    lag = int(round(5.0 / traj.sample_dt))
    assert traj["t"][-1] == pytest.approx(20.0)
    y_pred = np.array([qmap(v) for v in traj["theta"][:-lag]])
    assert np.max(np.abs(traj["y"][lag:] - y_pred)) < 1e-12
    S = np.array([0.8 * math.exp(-0.04 * (t + 5)) * math.sin(5 * (t + 5)) for t in traj["t"]])
    assert np.max(np.abs(traj["theta"] - traj["estimate"] - S)) < 1e-14


def test_deterministic(qmap):
    a = run_delay_scenario(_params(qmap, horizon=30.0))
    b = run_delay_scenario(_params(qmap, horizon=30.0))
    for name in a.names:
        assert np.array_equal(a[name], b[name])


def test_low_gain_flagged_and_runs(qmap, caplog):
    traj = run_delay_scenario(_params(qmap, k=0.01, horizon=20.0))
    assert not traj.meta["report"].passed
    assert "violate" in caplog.text
    assert np.all(np.isfinite(traj["theta"]))


def test_classical_es_keeps_oscillating(qmap):
    params = DelayLoopParams(k=0.3, dither=DitherParams(0.8, 5.0, 0.0, 0.0), omega_h=1.0, map=qmap, horizon=150.0)
    traj = run_delay_scenario(params)
    late = traj.window(140.0, 150.0)
    amp = np.max(np.abs(traj["theta"][late] - 2.0))
    assert amp >= 0.8 * 0.5 * 0.5
    # the average input has still found the optimum
    assert abs(np.mean(traj["estimate"][late]) - 2.0) < 0.1


def test_delay_free_unbiased_loop_converges(qmap):
    params = DelayLoopParams(k=0.03, dither=DitherParams(0.8, 5.0, 0.04, 0.0), omega_h=1.0, map=qmap, horizon=300.0)
    traj = run_delay_scenario(params)
    assert np.max(np.abs(traj["theta"][traj.window(250, 300)] - 2.0)) < 0.02
