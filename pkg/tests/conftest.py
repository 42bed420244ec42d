import numpy as np
import pytest

from cisim import protocol
from cisim.fockspace import HilbertConfig
from cisim.hamiltonians import ModelParams

# Interference time of the default model, frozen from the converged reference
# run (see test_acceptance.py::test_interference_time, which recomputes it).
T_REF = 1.6075e-3


@pytest.fixture(scope="session")
def model():
    return ModelParams()


@pytest.fixture(scope="session")
def hilbert():
    return HilbertConfig(n_max=24)


@pytest.fixture(scope="session")
def hilbert_small():
    return HilbertConfig(n_max=10)


@pytest.fixture(scope="session")
def initial_state(model, hilbert):
    return protocol.initialise(protocol.prepare(hilbert), model)


@pytest.fixture(scope="session")
def evolved_states(model, initial_state):
    """States at t = 0, 0.9T, T, 2T in the lab frame, one integration pass."""
    times = np.array([0.0, 0.9 * T_REF, T_REF, 2 * T_REF])
    states = protocol.evolve_jt(initial_state, model, times[-1], t_eval=times)
    return dict(zip(("t0", "t09", "t1", "t2"), states))
