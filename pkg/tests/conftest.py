import hypothesis
import numpy as np
import pytest

from oscillatornet import create_app
from oscillatornet.models import CanonicalWeights, ChainSystem, InitialState
from oscillatornet.simulator import simulate_chain, simulate_single

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False)

DELTA = 0.0667

SINGLE_TRUTH = CanonicalWeights(2.0, 1.5, 40.0)
SINGLE_INIT = CanonicalWeights(1.0, 1.0, 15.0)
COUPLED_TRUTH = ChainSystem((CanonicalWeights(1.5, 0.5, 14.0), CanonicalWeights(0.9, 0.3, 35.0)))
COUPLED_INIT = ChainSystem((CanonicalWeights(1.0, 1.0, 15.0), CanonicalWeights(1.0, 1.0, 15.0)))
SINGLE_STATE = InitialState((1.0,), (0.0,))
COUPLED_STATE = InitialState((1.0, 0.5), (0.0, 0.0))


@pytest.fixture
def app(tmp_path):
    app = create_app({
        'TESTING': True,
        'OUTPUT_DIR': str(tmp_path / 'output'),
        'PROGRESS': False,
        'LOG_LEVEL': 'WARNING',
    })
    yield app


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture(scope='session')
def single_data():
    return simulate_single(SINGLE_TRUTH, SINGLE_STATE, DELTA, 60)


@pytest.fixture(scope='session')
def coupled_data():
    return simulate_chain(COUPLED_TRUTH, COUPLED_STATE, DELTA, 60)
