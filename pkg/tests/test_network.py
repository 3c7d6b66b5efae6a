import numpy as np
import pytest
import torch

from oscillatornet.mapping import map_to_hidden
from oscillatornet.models import MappingConfig
from oscillatornet.network import OscillatorNet, PartialOscillatorNet, ResNetBaseline, as_tensor
from oscillatornet.utils.errors import InvalidArgumentError
from oscillatornet.utils.parametrization import canonical_to_combined, weights_to_dict

from conftest import COUPLED_TRUTH, DELTA, SINGLE_TRUTH


def _partial(parametrization='canonical', kernel=1, padding='valid', frozen=()):
    if parametrization == 'canonical':
        values = weights_to_dict(COUPLED_TRUTH)
    else:
        values = weights_to_dict(canonical_to_combined(COUPLED_TRUTH[0], COUPLED_TRUTH[1], DELTA))
    return PartialOscillatorNet(parametrization, values, DELTA, MappingConfig(kernel=kernel, padding=padding), frozen)


def test_parameters_are_float64():
    net = OscillatorNet('single', weights_to_dict(SINGLE_TRUTH), DELTA)
    assert all(p.dtype == torch.float64 for p in net.parameters())
    assert net.values() == {'m': 2.0, 'b': 1.5, 'k': 40.0}


def test_unknown_kind_and_missing_values():
    with pytest.raises(InvalidArgumentError):
        OscillatorNet('triple', {}, DELTA)
    with pytest.raises(InvalidArgumentError):
        OscillatorNet('single', {'m': 1.0, 'b': 1.0}, DELTA)
    with pytest.raises(InvalidArgumentError):
        OscillatorNet('single', weights_to_dict(SINGLE_TRUTH), DELTA, frozen=('theta',))


def test_forward_shapes(coupled_data):
    net = OscillatorNet('coupled', weights_to_dict(COUPLED_TRUTH), DELTA)
    x = as_tensor(np.stack([tr.samples for tr in coupled_data], axis=1))
    pred, target = net(x)
    assert pred.shape == target.shape == (58, 2)
    assert net.predict_next(x[:2].numpy()).shape == (2,)


def test_resnet_baseline_forward(single_data):
    net = ResNetBaseline({'theta': -1.0}, DELTA)
    pred, target = net(as_tensor(single_data.samples))
    assert pred.shape == target.shape == (59,)
    assert net.record().theta == -1.0


@pytest.mark.parametrize('padding', ['valid', 'causal'])
@pytest.mark.parametrize('parametrization', ['canonical', 'combined'])
def test_shared_hidden_channel_matches_the_projection(coupled_data, padding, parametrization):
    net = _partial(parametrization, padding=padding)
    mapped = map_to_hidden(coupled_data[0], net.mapping_params(), net.bank)
    np.testing.assert_allclose(net.hidden(coupled_data[0].samples), mapped.samples, rtol=1e-10, atol=1e-12)


def test_wide_kernel_starts_as_the_shared_kernel(coupled_data):
    shared = _partial(kernel=1)
    wide = _partial(kernel=25)
    assert wide.kernel().shape == (25,)
    x1 = coupled_data[0].samples
    np.testing.assert_allclose(wide.hidden(x1), shared.hidden(x1)[18:], rtol=1e-10, atol=1e-12)
    causal_shared = _partial(kernel=1, padding='causal')
    causal_wide = _partial(kernel=25, padding='causal')
    np.testing.assert_allclose(causal_wide.hidden(x1), causal_shared.hidden(x1), rtol=1e-10, atol=1e-12)


def test_partial_forward_predicts_x1_only(coupled_data):
    net = _partial()
    pred, target = net(as_tensor(coupled_data[0].samples))
    assert pred.shape == target.shape == (52, 1)
    net = _partial(kernel=25, padding='causal')
    pred, target = net(as_tensor(coupled_data[0].samples))
    assert pred.shape == target.shape == (58, 1)


def test_partial_loss_is_small_at_the_truth(coupled_data):
    net = _partial()
    loss = float(net.loss(as_tensor(coupled_data[0].samples)))
    assert loss < 1e-3


def test_partial_trainable_names():
    net = _partial('combined', kernel=25, frozen=('param_b', 'param_d'))
    assert net.trainable_names() == ('param_a', 'param_c', 'param_e', 'wide_kernel')
    assert net.offset == 24
    assert _partial(padding='causal').offset == 0


def test_partial_rejects_short_windows(coupled_data):
    net = _partial(kernel=25)
    with pytest.raises(InvalidArgumentError):
        net(as_tensor(coupled_data[0].samples[:20]))
