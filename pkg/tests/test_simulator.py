import numpy as np
import pytest

from oscillatornet.models import CanonicalWeights, ChainSystem, InitialState
from oscillatornet.simulator import (
    add_noise, analytic_single, chain_energy, damped_period, simulate_chain, simulate_coupled, simulate_single,
    simulate_states,
)
from oscillatornet.utils.errors import InvalidArgumentError, UnsupportedRegimeError

from conftest import COUPLED_STATE, COUPLED_TRUTH, DELTA, SINGLE_STATE, SINGLE_TRUTH


def test_first_sample_is_the_initial_condition(single_data):
    assert single_data.samples[0] == 1.0
    assert len(single_data) == 60


def test_single_matches_closed_form(single_data):
    exact = analytic_single(SINGLE_TRUTH, SINGLE_STATE, single_data.times)
    np.testing.assert_allclose(single_data.samples, exact, atol=1e-8)


def test_closed_form_scalar():
    assert analytic_single(SINGLE_TRUTH, SINGLE_STATE, 0.0) == pytest.approx(1.0)


def test_halving_the_substep_changes_little():
    coarse = simulate_single(SINGLE_TRUTH, SINGLE_STATE, DELTA, 60, substeps=50)
    fine = simulate_single(SINGLE_TRUTH, SINGLE_STATE, DELTA, 60, substeps=100)
    assert np.max(np.abs(coarse.samples - fine.samples)) < 1e-8


def test_overdamped_closed_form_is_unsupported():
    with pytest.raises(UnsupportedRegimeError):
        analytic_single(CanonicalWeights(1.0, 10.0, 1.0), SINGLE_STATE, 0.5)
    with pytest.raises(UnsupportedRegimeError):
        damped_period(CanonicalWeights(1.0, 2.0, 1.0))


def test_damped_period():
    sigma = 1.5 / 4.0
    omega = np.sqrt(20.0 - sigma ** 2)
    assert damped_period(SINGLE_TRUTH) == pytest.approx(2 * np.pi / omega)


@pytest.mark.parametrize('n', [0, 1, 2])
def test_too_few_samples(n):
    with pytest.raises(InvalidArgumentError):
        simulate_single(SINGLE_TRUTH, SINGLE_STATE, DELTA, n)


def test_coupled_needs_two_oscillators():
    with pytest.raises(InvalidArgumentError):
        simulate_coupled(ChainSystem((SINGLE_TRUTH,)), SINGLE_STATE, DELTA, 10)
    with pytest.raises(InvalidArgumentError):
        simulate_coupled(COUPLED_TRUTH, SINGLE_STATE, DELTA, 10)


def test_coupled_shapes(coupled_data):
    x1, x2 = coupled_data
    assert len(x1) == len(x2) == 60
    assert (x1.samples[0], x2.samples[0]) == (1.0, 0.5)


def test_undamped_chain_conserves_energy():
    chain = ChainSystem((CanonicalWeights(1.5, 0.0, 14.0), CanonicalWeights(0.9, 0.0, 35.0)))
    states = simulate_states(chain, COUPLED_STATE, DELTA, 200)
    energy = chain_energy(chain, states[:, :2].T, states[:, 2:].T)
    assert np.max(np.abs(energy - energy[0])) / energy[0] < 1e-8


def test_damped_chain_loses_energy():
    states = simulate_states(COUPLED_TRUTH, COUPLED_STATE, DELTA, 200)
    energy = chain_energy(COUPLED_TRUTH, states[:, :2].T, states[:, 2:].T)
    assert energy[-1] < energy[0]


def test_normal_mode_initial_condition():
    # 初始位移落在慢模態的特徵向量上：x1 只剩單一頻率的餘弦
    chain = ChainSystem((CanonicalWeights(1.0, 0.0, 10.0), CanonicalWeights(1.0, 0.0, 10.0)))
    eigvals = np.linalg.eigvals(np.array([[20.0, -10.0], [-10.0, 10.0]]))
    x1, _ = simulate_chain(chain, InitialState((1.0, 1.618033988749895), (0.0, 0.0)), 0.01, 400)
    omega = np.sqrt(np.min(eigvals))
    np.testing.assert_allclose(x1.samples, np.cos(omega * x1.times), atol=1e-8)


def test_noise_is_seeded(single_data):
    a = add_noise(single_data, 0.01, seed=3)
    b = add_noise(single_data, 0.01, seed=3)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert add_noise(single_data, 0.0) is single_data
    with pytest.raises(InvalidArgumentError):
        add_noise(single_data, -1.0)
