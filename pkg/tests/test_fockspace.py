import math

import numpy as np
import pytest

from cisim.fockspace import (
    HilbertConfig,
    TruncationOverflowError,
    basis_state,
    coherent_state,
    compose_pure,
    displacement_block,
    displacement_op,
    ladder_ops,
    mode_op,
    position_momentum_ops,
    thermal_state,
)


@pytest.fixture
def cfg():
    return HilbertConfig(n_max=16)


def test_config_validation():
    with pytest.raises(ValueError):
        HilbertConfig(n_max=1)
    assert HilbertConfig(n_max=24).dim == 2 * 24**2


def test_ladder_identities(cfg):
    a, adag = ladder_ops(cfg)
    one = np.zeros(cfg.n_max)
    one[1] = 1.0
    lowered = a @ one
    assert np.allclose(lowered, np.eye(cfg.n_max)[0])
    number = adag @ a
    assert np.allclose(np.diag(number), np.arange(cfg.n_max))


def test_commutator_away_from_edge(cfg):
    a, adag = ladder_ops(cfg)
    comm = a @ adag - adag @ a
    inner = np.diag(comm)[: cfg.n_max - 1]
    assert np.allclose(inner, 1.0)


def test_position_momentum(cfg):
    q, p = position_momentum_ops(cfg)
    assert np.allclose(q, q.conj().T)
    assert np.allclose(p, p.conj().T)
    vac = np.eye(cfg.n_max)[0]
    assert abs(vac @ q @ vac) < 1e-14
    assert abs(vac @ q @ q @ vac - 0.5) < 1e-14
    # <n|Q|n> vanishes exactly for every Fock state
    assert np.allclose(np.diag(q), 0.0)


def test_coherent_state_displacement(cfg):
    alpha = 0.8
    psi = coherent_state(alpha, cfg)
    q, _ = position_momentum_ops(cfg)
    assert abs(psi.conj() @ q @ psi - np.sqrt(2) * alpha) < 1e-10


def test_coherent_state_gaussian_tail(cfg):
    # oracle: <Q> = sqrt2 Re alpha, var 1/2, Gaussian tail above zero
    alpha = -1.5 / np.sqrt(2)
    psi = coherent_state(alpha, cfg)
    from cisim.tomography import hermite_functions

    qs = np.linspace(-6, 6, 2001)
    h = hermite_functions(cfg.n_max, qs)
    wave = psi @ h
    dens = np.abs(wave) ** 2
    p_pos = np.trapezoid(dens[qs >= 0], qs[qs >= 0])
    oracle = 0.5 * math.erfc(1.5)
    assert abs(p_pos - oracle) < 1e-6
    assert abs(oracle - 0.017) < 2e-3


def test_coherent_precondition_and_overflow():
    cfg = HilbertConfig(n_max=8)
    with pytest.raises(ValueError):
        coherent_state(2.0, cfg)  # |alpha|^2 = 4 > n_max/4
    with pytest.raises(TruncationOverflowError):
        coherent_state(np.sqrt(8 / 4.0) * 0.999, cfg)


def test_thermal_state(cfg):
    rho0 = thermal_state(0.0, cfg)
    assert abs(rho0[0, 0] - 1.0) < 1e-15
    rho = thermal_state(0.04, cfg)
    assert abs(np.trace(rho).real - 1.0) < 1e-12
    assert abs(rho[0, 0].real - 1.0 / 1.04) < 1e-10


def test_displacement_unitarity(cfg):
    rng = np.random.default_rng(11)
    for _ in range(5):
        alpha = (rng.normal() + 1j * rng.normal()) * np.sqrt(cfg.n_max) / 8
        d = displacement_op(alpha, cfg)
        prod = displacement_op(-alpha, cfg) @ d
        assert np.max(np.abs(prod - np.eye(cfg.n_max))) < 1e-8


def test_displacement_block_matches_padded_expm():
    n = 12
    pad = HilbertConfig(n_max=96)
    for alpha in (0.5, 1.7j, -1.1 + 0.6j, 4.0j):
        exact = displacement_block(alpha, n)
        padded = displacement_op(alpha, pad)[:n, :n]
        assert np.max(np.abs(exact - padded)) < 1e-10


def test_truncation_monotonicity(model=None):
    from cisim import protocol
    from cisim.hamiltonians import ModelParams

    model = ModelParams()
    obs = {}
    for n in (24, 29):
        cfg = HilbertConfig(n_max=n)
        s = protocol.initialise(protocol.prepare(cfg), model)
        q, _ = position_momentum_ops(cfg)
        obs[n] = (
            s.expect(mode_op(q, 1, cfg)).real,
            s.mode_occupation(1),
            s.mode_occupation(2),
        )
    assert np.max(np.abs(np.array(obs[24]) - np.array(obs[29]))) < 1e-6


def test_state_containers(cfg):
    psi = basis_state(cfg, qubit=1, n1=2, n2=3)
    assert psi.tensor[1, 2, 3] == 1.0
    assert psi.norm() == 1.0
    qubit = np.array([1.0, 1.0]) / np.sqrt(2)
    st = compose_pure(qubit, coherent_state(0.5, cfg), coherent_state(0.0, cfg), cfg)
    assert abs(st.norm() - 1.0) < 1e-12
    assert abs(st.qubit_populations()[0] - 0.5) < 1e-12
    rho = st.to_mixed()
    rho.validate()
    assert abs(rho.mode_occupation(1) - st.mode_occupation(1)) < 1e-12
