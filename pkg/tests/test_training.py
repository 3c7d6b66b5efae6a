import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscillatornet.models import (
    CanonicalWeights, ChainSystem, CombinedWeights, FitConfig, MappingConfig, ResNetWeights, SolverState, Trajectory,
)
from oscillatornet.network import OscillatorNet, as_tensor
from oscillatornet.simulator import simulate_single
from oscillatornet.solver import free_forecast, step_coupled, step_single
from oscillatornet.training import _collapsed, cosine_floor, fit, fit_partial, gradient, one_step_loss
from oscillatornet.utils.data_transform import relative_rmse
from oscillatornet.utils.errors import InvalidArgumentError
from oscillatornet.utils.parametrization import canonical_to_combined, weights_to_dict

from conftest import COUPLED_INIT, COUPLED_TRUTH, DELTA, SINGLE_INIT, SINGLE_STATE, SINGLE_TRUTH


def _single_recurrence(w, n=60):
    xs = [1.0, 0.97]
    for _ in range(n - 2):
        xs.append(step_single(w, SolverState(xs[-2], xs[-1]), DELTA))
    return Trajectory(xs, DELTA)


def _coupled_recurrence(chain, n=60):
    xs = [(1.0, 0.5), (0.97, 0.52)]
    for _ in range(n - 2):
        xs.append(step_coupled(chain, SolverState(xs[-2], xs[-1]), DELTA))
    xs = np.array(xs)
    return Trajectory(xs[:, 0], DELTA), Trajectory(xs[:, 1], DELTA)


def _central_difference(weights, observed, name, rel=1e-6):
    values = weights_to_dict(weights)
    h = rel * abs(values[name])
    up, down = dict(values), dict(values)
    up[name] += h
    down[name] -= h
    rebuild = type(weights) if not isinstance(weights, ChainSystem) else None

    def _make(v):
        if rebuild is CanonicalWeights:
            return CanonicalWeights(v['m'], v['b'], v['k'])
        if rebuild is CombinedWeights:
            return CombinedWeights(*(v[n] for n in ('param_a', 'param_b', 'param_c', 'param_d', 'param_e')))
        return ChainSystem((CanonicalWeights(v['m1'], v['b1'], v['k1']), CanonicalWeights(v['m2'], v['b2'], v['k2'])))

    return (one_step_loss(_make(up), observed) - one_step_loss(_make(down), observed)) / (2 * h)


# ==========================================================
# loss / gradient
# ==========================================================

def test_true_weights_give_a_small_loss(single_data):
    assert one_step_loss(SINGLE_TRUTH, single_data) <= 1e-5
    assert one_step_loss(SINGLE_INIT, single_data) > 10 * one_step_loss(SINGLE_TRUTH, single_data)


def test_gradient_vanishes_on_step_generated_data():
    data = _single_recurrence(SINGLE_TRUTH)
    assert one_step_loss(SINGLE_TRUTH, data) < 1e-25
    assert all(abs(g) <= 1e-10 for g in gradient(SINGLE_TRUTH, data).values())
    pair = _coupled_recurrence(COUPLED_TRUTH)
    assert all(abs(g) <= 1e-10 for g in gradient(COUPLED_TRUTH, pair).values())


weight = st.floats(min_value=0.5, max_value=3.0)
spring = st.floats(min_value=5.0, max_value=50.0)


@settings(max_examples=100, deadline=None)
@given(weight, st.floats(min_value=0.1, max_value=3.0), spring)
def test_single_gradient_matches_central_differences(single_data, m, b, k):
    w = CanonicalWeights(m, b, k)
    grad = gradient(w, single_data)
    for name in ('m', 'b', 'k'):
        assert grad[name] == pytest.approx(_central_difference(w, single_data, name), rel=1e-5, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(weight, weight, st.floats(min_value=0.1, max_value=2.0), st.floats(min_value=0.1, max_value=2.0), spring, spring)
def test_coupled_gradient_matches_central_differences(coupled_data, m1, m2, b1, b2, k1, k2):
    chain = ChainSystem((CanonicalWeights(m1, b1, k1), CanonicalWeights(m2, b2, k2)))
    grad = gradient(chain, coupled_data)
    for name in grad:
        assert grad[name] == pytest.approx(_central_difference(chain, coupled_data, name), rel=1e-5, abs=1e-8)


def test_combined_gradient_matches_central_differences(coupled_data):
    u = canonical_to_combined(COUPLED_INIT[0], COUPLED_INIT[1], DELTA)
    grad = gradient(u, coupled_data)
    for name in grad:
        assert grad[name] == pytest.approx(_central_difference(u, coupled_data, name), rel=1e-5, abs=1e-8)


def test_closed_form_gradient_matches_autograd(coupled_data):
    values = weights_to_dict(COUPLED_INIT)
    net = OscillatorNet('coupled', values, DELTA)
    x = as_tensor(np.stack([tr.samples for tr in coupled_data], axis=1))
    net.loss(x).backward()
    grad = gradient(COUPLED_INIT, coupled_data)
    for name, g in grad.items():
        assert float(net.params[name].grad) == pytest.approx(g, rel=1e-9)
    assert float(net.loss(x)) == pytest.approx(one_step_loss(COUPLED_INIT, coupled_data), rel=1e-12)


def test_resnet_loss_and_gradient(single_data):
    w = ResNetWeights(-0.5)
    assert one_step_loss(w, single_data) > 0
    assert set(gradient(w, single_data)) == {'theta'}


def test_loss_needs_three_samples(single_data):
    with pytest.raises(InvalidArgumentError):
        one_step_loss(SINGLE_TRUTH, single_data.window(0, 2))


# ==========================================================
# fit
# ==========================================================

def test_cosine_floor_schedule():
    factor = cosine_floor(100, 0.01)
    assert factor(0) == pytest.approx(1.0)
    assert factor(100) == pytest.approx(0.01)
    assert factor(500) == pytest.approx(0.01)
    assert factor(50) == pytest.approx(0.505)


TABLE1_CONFIG = FitConfig(learning_rate=0.05, max_iterations=5000)


@pytest.fixture(scope='module')
def single_fit(single_data):
    return fit(SINGLE_INIT, single_data, TABLE1_CONFIG, truth=SINGLE_TRUTH)


def _ratios(learned, anchor):
    return {name: value / learned[anchor] for name, value in learned.items() if name != anchor}


def test_fit_recovers_the_single_oscillator_ratios(single_fit):
    # 尺度由初始值決定，只有 b/m 與 k/m 可辨識
    assert single_fit.init == {'m': 1.0, 'b': 1.0, 'k': 15.0}
    assert single_fit.trainable == ('m', 'b', 'k')
    assert set(single_fit.extras['scale_free_rel_error']) == {'b/m', 'k/m'}
    assert max(single_fit.extras['scale_free_rel_error'].values()) <= 0.05
    assert single_fit.loss_history[-1] < single_fit.loss_history[0]
    assert single_fit.valid


def test_raw_errors_report_the_unfixed_scale(single_fit):
    ratio = single_fit.learned['m'] / SINGLE_TRUTH.mass
    assert single_fit.rel_error['m'] == pytest.approx(abs(1 - ratio))
    assert single_fit.extras['reference_mass'] is None


def test_scaled_initialization_learns_the_same_ratios(single_fit, single_data):
    scaled = CanonicalWeights(2 * SINGLE_INIT.mass, 2 * SINGLE_INIT.damping, 2 * SINGLE_INIT.spring)
    other = fit(scaled, single_data, TABLE1_CONFIG)
    base, moved = _ratios(single_fit.learned, 'm'), _ratios(other.learned, 'm')
    for name in base:
        assert moved[name] == pytest.approx(base[name], rel=0.01)


def test_trained_model_forecasts_the_continuation(single_fit):
    truth = simulate_single(SINGLE_TRUTH, SINGLE_STATE, DELTA, 120)
    forecast = free_forecast(single_fit.trainer.model, truth.window(0, 60), 60)
    assert relative_rmse(forecast, truth.window(60, 120), truth.amplitude()) <= 0.05


def test_fit_is_deterministic(single_data):
    config = FitConfig(learning_rate=0.05, max_iterations=200, seed=7)
    a = fit(SINGLE_INIT, single_data, config, truth=SINGLE_TRUTH)
    b = fit(SINGLE_INIT, single_data, config, truth=SINGLE_TRUTH)
    assert a.learned == b.learned
    assert a.loss_history == b.loss_history
    assert a.to_dict() == b.to_dict()


def test_measured_mass_fixes_the_scale(single_data):
    config = FitConfig(learning_rate=0.05, max_iterations=5000, reference_mass=3.0)
    report = fit(SINGLE_INIT, single_data, config, truth=SINGLE_TRUTH)
    assert report.learned['m'] == pytest.approx(3.0)
    assert report.trainable == ('b', 'k')
    assert max(report.extras['scale_free_rel_error'].values()) <= 0.05


def test_fit_recovers_the_coupled_ratios(coupled_data):
    config = FitConfig(learning_rate=0.05, max_iterations=8000)
    report = fit(COUPLED_INIT, coupled_data, config, truth=COUPLED_TRUTH)
    assert list(report.learned) == ['m1', 'm2', 'b1', 'b2', 'k1', 'k2']
    assert max(report.extras['scale_free_rel_error'].values()) <= 0.05


def test_invalid_learned_weights_are_flagged(single_data):
    # 從負阻尼出發且凍結 b：報表要標出違規的權重
    start = CanonicalWeights(1.0, -0.5, 15.0, checked=False)
    report = fit(start, single_data, FitConfig(max_iterations=5, frozen=('b',)))
    assert not report.valid
    assert report.invalid == {'b': -0.5}
    assert report.to_dict()['invalid'] == {'b': -0.5}


def test_fit_stops_early_at_the_minimum():
    data = _single_recurrence(SINGLE_TRUTH)
    report = fit(SINGLE_TRUTH, data, FitConfig(max_iterations=1000, patience=10))
    assert report.converged
    assert report.iterations <= 11
    assert report.learned['k'] == pytest.approx(40.0, rel=1e-9)


def test_plain_gradient_descent_moves_downhill(single_data):
    report = fit(SINGLE_INIT, single_data, FitConfig(optimizer='plain_gd', learning_rate=1.0, max_iterations=50))
    assert report.loss_history[-1] < report.loss_history[0]


def test_frozen_parameters_stay_put(single_data):
    report = fit(SINGLE_INIT, single_data, FitConfig(max_iterations=100, frozen=('m', 'b')))
    assert report.learned['m'] == 1.0
    assert report.learned['b'] == 1.0
    assert report.learned['k'] != 15.0


def test_fit_rejects_channel_mismatch(single_data, coupled_data):
    with pytest.raises(InvalidArgumentError):
        fit(COUPLED_INIT, single_data, FitConfig(max_iterations=5))
    with pytest.raises(InvalidArgumentError):
        fit(SINGLE_INIT, coupled_data, FitConfig(max_iterations=5))


def test_combined_fit_reports_combined_names(coupled_data):
    config = FitConfig(parametrization='combined', max_iterations=200, learning_rate=1e-3)
    report = fit(COUPLED_INIT, coupled_data, config, truth=COUPLED_TRUTH)
    assert list(report.learned) == ['param_a', 'param_b', 'param_c', 'param_d', 'param_e']
    assert report.truth['param_e'] == pytest.approx(1.4)


def test_conservative_and_resnet_baselines(single_data):
    cons = fit(SINGLE_INIT, single_data, FitConfig(model='conservative', max_iterations=200))
    assert set(cons.learned) == {'m', 'k'}
    res = fit(ResNetWeights(0.0), single_data, FitConfig(model='resnet', max_iterations=200))
    assert set(res.learned) == {'theta'}


def test_retraining_keeps_the_trainer(single_data):
    report = fit(SINGLE_INIT, single_data, FitConfig(max_iterations=20))
    before = report.trainer.iterations
    report.trainer.train(5)
    assert report.trainer.iterations == before + 5
    for group in report.trainer.optimizer.param_groups:
        assert group['lr'] == pytest.approx(1e-2 * 1e-2)


# ==========================================================
# fit_partial
# ==========================================================

def test_partial_fit_freezes_everything_outside_the_subset(coupled_data):
    config = FitConfig(parametrization='combined', learning_rate=1e-3, max_iterations=200)
    report = fit_partial(COUPLED_INIT, coupled_data[0], MappingConfig(kernel=1), config, truth=COUPLED_TRUTH)
    assert report.trainable == ('param_a', 'param_c', 'param_e')
    assert report.learned['param_b'] == report.init['param_b']
    assert report.learned['param_d'] == report.init['param_d']
    assert report.init['param_d'] == pytest.approx(0.0222, abs=1e-4)
    assert report.init['param_b'] == pytest.approx(0.074, abs=1e-3)
    assert report.extras['collapsed'] == {}


def test_partial_fit_wide_kernel_trains_the_kernel(coupled_data):
    config = FitConfig(parametrization='canonical', learning_rate=1e-3, max_iterations=100)
    report = fit_partial(COUPLED_INIT, coupled_data[0], MappingConfig(kernel=25, padding='causal'), config,
                         truth=COUPLED_TRUTH)
    assert 'wide_kernel' in report.trainable
    assert report.learned['m2'] == report.init['m2'] == 0.9
    assert report.learned['b2'] == report.init['b2'] == 0.3
    assert len(report.extras['mapping_kernel']) == 25
    assert report.extras['mapping_kernel'] != report.extras['init_mapping_kernel']


def test_partial_fit_hidden_init_from_init(coupled_data):
    config = FitConfig(parametrization='canonical', max_iterations=5)
    report = fit_partial(COUPLED_INIT, coupled_data[0], MappingConfig(hidden_init='init'), config)
    assert report.init['m2'] == 1.0
    assert report.truth is None


def test_partial_fit_needs_a_single_trajectory(coupled_data):
    with pytest.raises(InvalidArgumentError):
        fit_partial(COUPLED_INIT, coupled_data, MappingConfig(), FitConfig(max_iterations=5))


def test_collapsed_parameters_are_reported():
    init = {'param_a': 1.0, 'param_c': 0.5, 'param_e': 2.0}
    learned = {'param_a': 1e-4, 'param_c': 0.4, 'param_e': 1e-3}
    assert _collapsed(learned, init, ('param_a', 'param_c')) == {'param_a': 1e-4}
    assert _collapsed(init, init, tuple(init)) == {}
