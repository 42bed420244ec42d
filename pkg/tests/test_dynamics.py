import numpy as np
import pytest

from cisim import protocol
from cisim.dynamics import (
    IntegratorConfig,
    NoiseParams,
    evolve_lindblad,
    evolve_unitary,
    noise_collapse_ops,
)
from cisim.fockspace import (
    HilbertConfig,
    MixedState,
    basis_state,
    coherent_state,
    compose_pure,
    ladder_ops,
    mode_op,
)
from cisim.hamiltonians import ModelParams, SdfParams, jt_terms, sdf_terms


@pytest.fixture
def cfg():
    return HilbertConfig(n_max=10)


def test_noise_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(heating_rate=-1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.5)


def test_free_evolution_is_identity(cfg):
    psi = basis_state(cfg, qubit=0, n1=2, n2=1)
    out = evolve_unitary(psi, [], 0.0, 1e-3)
    assert abs(psi.overlap(out)) ** 2 > 1 - 1e-12


def test_resonant_sdf_displacement(cfg):
    # force on the prepared sigma_phi eigenstate displaces by -i rabi tau/2 e^{i phi_m}
    rng = np.random.default_rng(2)
    for _ in range(3):
        rabi = 2 * np.pi * rng.uniform(0.5e3, 2e3)
        tau = rng.uniform(30e-6, 120e-6)
        phi_m = rng.uniform(0, 2 * np.pi)
        phi_s = rng.uniform(0, 2 * np.pi)
        # qubit along +sigma_phi
        qubit = np.array([1.0, np.exp(1j * phi_s)]) / np.sqrt(2)
        vac = np.zeros(cfg.n_max, dtype=complex)
        vac[0] = 1.0
        psi = compose_pure(qubit, vac, vac, cfg)
        terms = sdf_terms(SdfParams(1, phi_s, 0.0, rabi, phi_m), cfg)
        out = evolve_unitary(psi, terms, 0.0, tau)
        alpha = -1j * rabi * tau * np.exp(1j * phi_m) / 2.0
        expected = compose_pure(qubit, coherent_state(alpha, cfg), vac, cfg)
        assert abs(out.overlap(expected)) ** 2 > 1 - 1e-8


def test_heating_rate(cfg):
    c_ops = noise_collapse_ops(
        NoiseParams(heating_rate=0.2, dephasing_t2star=np.inf), cfg)
    rho = basis_state(cfg).to_mixed()
    out = evolve_lindblad(rho, [], c_ops, 0.0, 0.1)
    for mode in (1, 2):
        n_t = out.mode_occupation(mode)
        assert abs(n_t - 0.2 * 0.1) / (0.2 * 0.1) < 0.01


def test_dephasing_rate(cfg):
    t2 = 0.035
    noise = NoiseParams(heating_rate=0.0, dephasing_t2star=t2)
    c_ops = noise_collapse_ops(noise, cfg)
    qubit = np.array([1.0, 0.0])
    mode1 = np.zeros(cfg.n_max, dtype=complex)
    mode1[0] = mode1[1] = 1 / np.sqrt(2)
    vac = np.zeros(cfg.n_max, dtype=complex)
    vac[0] = 1.0
    rho = compose_pure(qubit, mode1, vac, cfg).to_mixed()
    a, _ = ladder_ops(cfg)
    a1 = mode_op(a, 1, cfg)
    for t in (0.01, 0.035):
        out = evolve_lindblad(rho, [], c_ops, 0.0, t)
        coherence = abs(out.expect(a1))
        expected = 0.5 * np.exp(-t / t2)
        assert abs(coherence - expected) / expected < 0.01


def test_lindblad_matches_unitary_without_noise(cfg):
    m = ModelParams()
    psi = protocol.initialise(protocol.prepare(HilbertConfig(n_max=12)), m)
    cfg12 = psi.cfg
    terms = jt_terms(m, cfg12)
    icfg = IntegratorConfig(max_step=m.period / 200)
    t = 0.3e-3
    pure = evolve_unitary(psi, terms, 0.0, t, icfg)
    mixed = evolve_lindblad(psi.to_mixed(), terms, [], 0.0, t, icfg)
    diff = mixed.rho - pure.to_mixed().rho
    # trace distance = half the nuclear norm of the difference
    tdist = 0.5 * np.abs(np.linalg.eigvalsh(diff)).sum()
    assert tdist < 1e-6
    assert abs(mixed.trace() - 1.0) < 1e-6


def test_lindblad_linearity(cfg):
    rng = np.random.default_rng(8)
    noise = NoiseParams()
    small = HilbertConfig(n_max=6)
    c_ops = noise_collapse_ops(noise, small)
    terms = sdf_terms(SdfParams(1, 0.0, 2 * np.pi * 500, 2 * np.pi * 1e3, 0.3), small)

    def random_rho():
        v = rng.normal(size=(small.dim, 2)) + 1j * rng.normal(size=(small.dim, 2))
        rho = v @ v.conj().T
        return MixedState(rho / np.trace(rho), small)

    r1, r2 = random_rho(), random_rho()
    w = 0.3
    mix = MixedState(w * r1.rho + (1 - w) * r2.rho, small)
    t = 2e-4
    out_mix = evolve_lindblad(mix, terms, c_ops, 0.0, t)
    out1 = evolve_lindblad(r1, terms, c_ops, 0.0, t)
    out2 = evolve_lindblad(r2, terms, c_ops, 0.0, t)
    recombined = w * out1.rho + (1 - w) * out2.rho
    assert np.max(np.abs(out_mix.rho - recombined)) < 1e-7


def test_integrator_convergence(model, initial_state):
    terms = jt_terms(model, initial_state.cfg)
    t = 1.6075e-3
    base = IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10, max_step=model.period / 200)
    tight = IntegratorConfig(rel_tol=5e-9, abs_tol=5e-11, max_step=model.period / 200)
    out1 = evolve_unitary(initial_state, terms, 0.0, t, base)
    out2 = evolve_unitary(initial_state, terms, 0.0, t, tight)
    assert abs(out1.fidelity(out2) - 1.0) < 1e-6


def test_zero_duration_returns_copy(cfg):
    psi = basis_state(cfg)
    out = evolve_unitary(psi, [], 0.0, 0.0)
    assert out is not psi
    assert np.array_equal(out.amplitudes, psi.amplitudes)
