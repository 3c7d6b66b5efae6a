import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscillatornet.models import CanonicalWeights, ChainSystem, ResNetWeights, RetrainPolicy, SolverState, Trajectory
from oscillatornet.solver import (
    StepModel, apply_step_matrix, discrete_energy, free_forecast, step_coupled, step_euler_resnet, step_matrix,
    step_single, step_single_conservative, verlet_amplitude,
)
from oscillatornet.simulator import simulate_single
from oscillatornet.utils.data_transform import peak_decay, relative_rmse
from oscillatornet.utils.errors import DivergedForecastError, InvalidArgumentError

from conftest import COUPLED_TRUTH, DELTA, SINGLE_STATE, SINGLE_TRUTH

state = st.floats(min_value=-2.0, max_value=2.0)


def _recurrence(w, x0, x1, n, step=step_single):
    xs = [x0, x1]
    for _ in range(n - 2):
        xs.append(step(w, SolverState(xs[-2], xs[-1]), DELTA))
    return np.array(xs)


def test_single_step_by_hand():
    w = CanonicalWeights(2.0, 1.5, 40.0)
    s = SolverState(0.9, 1.0)
    expected = -(1.5 * DELTA / 2.0) * 0.1 - (40.0 * DELTA ** 2 / 2.0) * 1.0 + 2.0 - 0.9
    assert step_single(w, s, DELTA) == pytest.approx(expected, rel=1e-15)


def test_rest_stays_at_rest():
    assert step_single(SINGLE_TRUTH, SolverState(0.0, 0.0), DELTA) == 0.0
    assert step_coupled(COUPLED_TRUTH, SolverState((0.0, 0.0), (0.0, 0.0)), DELTA) == (0.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(state, state, state, state, st.floats(min_value=-3.0, max_value=3.0))
def test_steps_are_linear_in_the_state(x1, x2, x1p, x2p, c):
    s = SolverState((x1p, x2p), (x1, x2))
    scaled = SolverState((c * x1p, c * x2p), (c * x1, c * x2))
    for a, b in zip(step_coupled(COUPLED_TRUTH, scaled, DELTA), step_coupled(COUPLED_TRUTH, s, DELTA)):
        assert a == pytest.approx(c * b, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(state, state, state, state)
def test_step_matrix_matches_the_step(x1, x2, x1p, x2p):
    s = SolverState((x1p, x2p), (x1, x2))
    np.testing.assert_allclose(
        apply_step_matrix(step_matrix(COUPLED_TRUTH, DELTA), s), step_coupled(COUPLED_TRUTH, s, DELTA), atol=1e-13,
    )
    one = SolverState(x1p, x1)
    np.testing.assert_allclose(apply_step_matrix(step_matrix(SINGLE_TRUTH, DELTA), one), [step_single(SINGLE_TRUTH, one, DELTA)], atol=1e-13)


def test_step_matrix_shape():
    assert step_matrix(SINGLE_TRUTH, DELTA).matrix.shape == (1, 2)
    assert step_matrix(COUPLED_TRUTH, DELTA).size == 2
    with pytest.raises(InvalidArgumentError):
        step_matrix(ResNetWeights(1.0))


def test_conservative_step_is_time_reversible():
    w = CanonicalWeights(2.0, 0.0, 40.0)
    xs = _recurrence(w, 1.0, 0.95, 50, step_single_conservative)
    back = _recurrence(w, xs[-1], xs[-2], 50, step_single_conservative)[::-1]
    np.testing.assert_allclose(back, xs, atol=1e-9)


def test_conservative_step_conserves_discrete_energy():
    w = CanonicalWeights(2.0, 1.5, 40.0)
    xs = _recurrence(w, 1.0, 0.95, 1002, step_single_conservative)
    energy = discrete_energy(w, SolverState(xs[:-1], xs[1:]), DELTA)
    assert np.max(np.abs(energy - energy[0])) / energy[0] < 1e-10
    amplitude = verlet_amplitude(w, SolverState(xs[:-1], xs[1:]), DELTA)
    assert np.max(np.abs(amplitude - amplitude[0])) / amplitude[0] < 1e-10


def test_damped_step_loses_discrete_energy():
    xs = _recurrence(SINGLE_TRUTH, 1.0, 0.95, 300)
    energy = discrete_energy(SINGLE_TRUTH, SolverState(xs[:-1], xs[1:]), DELTA)
    assert energy[-1] < 0.1 * energy[0]


def test_euler_resnet_step():
    assert step_euler_resnet(-2.0, 1.0, 0.1) == pytest.approx(0.8)
    assert step_euler_resnet(-2.0, SolverState(0.0, 1.0), 0.1) == pytest.approx(0.8)
    with pytest.raises(InvalidArgumentError):
        step_euler_resnet(1.0, 1.0, 0.0)


def test_free_forecast_reproduces_the_recurrence():
    xs = _recurrence(SINGLE_TRUTH, 1.0, 0.95, 40)
    seed = Trajectory(xs[:2], DELTA)
    forecast = free_forecast(StepModel(SINGLE_TRUTH, DELTA), seed, 38)
    np.testing.assert_allclose(forecast.samples, xs[2:], rtol=1e-12, atol=1e-14)
    assert forecast.t0 == pytest.approx(2 * DELTA)


def test_free_forecast_coupled_channels(coupled_data):
    forecast = free_forecast(StepModel(COUPLED_TRUTH, DELTA), coupled_data, 10)
    assert isinstance(forecast, tuple) and len(forecast) == 2
    assert len(forecast[0]) == 10
    assert forecast[0].t0 == pytest.approx(coupled_data[0].t_end + DELTA)


def test_free_forecast_zero_horizon(single_data):
    assert len(free_forecast(StepModel(SINGLE_TRUTH, DELTA), single_data, 0)) == 0


def test_unstable_weights_diverge(single_data):
    # kΔ²/m > 4：差分步不再振盪，數值會爆掉
    unstable = CanonicalWeights(1.0, 0.0, 1000.0)
    with pytest.raises(DivergedForecastError) as info:
        free_forecast(StepModel(unstable, DELTA), single_data, 500)
    assert info.value.step < 500


def test_free_forecast_argument_checks(single_data, coupled_data):
    model = StepModel(SINGLE_TRUTH, DELTA)
    with pytest.raises(InvalidArgumentError):
        free_forecast(model, single_data, -1)
    with pytest.raises(InvalidArgumentError):
        free_forecast(model, coupled_data, 5)
    with pytest.raises(InvalidArgumentError):
        free_forecast(model, single_data, 5, retrain=RetrainPolicy('per_step'))
    with pytest.raises(InvalidArgumentError):
        free_forecast(model, single_data.window(0, 1), 5)


def test_true_weights_forecast_the_continuation():
    truth = simulate_single(SINGLE_TRUTH, SINGLE_STATE, DELTA, 120)
    forecast = free_forecast(StepModel(SINGLE_TRUTH, DELTA), truth.window(0, 60), 60)
    assert relative_rmse(forecast, truth.window(60, 120), truth.amplitude()) <= 0.02


def test_conservative_forecast_keeps_its_amplitude():
    truth = simulate_single(SINGLE_TRUTH, SINGLE_STATE, DELTA, 120)
    w = CanonicalWeights(SINGLE_TRUTH.mass, 0.0, SINGLE_TRUTH.spring)
    seed = truth.window(0, 60)
    forecast = free_forecast(StepModel(w, DELTA, conservative=True), seed, 60)
    history = np.concatenate([seed.samples[-1:], forecast.samples])
    amplitude = verlet_amplitude(w, SolverState(history[:-1], history[1:]), DELTA)
    assert abs(1 - amplitude[-1] / amplitude[0]) < 0.01
    # 真值在同一段時間明顯衰減
    assert peak_decay(truth.window(60, 120).samples, 30) > 0.05
