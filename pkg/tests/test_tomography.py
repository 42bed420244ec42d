import numpy as np
import pytest

from cisim import protocol
from cisim.fockspace import HilbertConfig, PureState
from cisim.hamiltonians import ModelParams
from cisim.protocol import CharGrid, exact_char_grid
from cisim.tomography import (
    DensityGrid,
    NoTailPointsError,
    WindowError,
    baseline_correct,
    density_1d,
    density_2d,
    extend_hermitian,
    find_interference_time,
    hermite_functions,
    node_contrast,
    rms_radius,
    state_density,
    state_density_q2,
    _trapezoid_weights,
)
from conftest import T_REF


def analytic_grid(model, beta1_axis, beta2_axis, offset=0.0):
    """Characteristic function of the initialized coherent state, plus offset."""
    alpha = -model.ratio / np.sqrt(2.0)
    b1 = np.asarray(beta1_axis)[:, None]
    b2 = np.asarray(beta2_axis)[None, :]
    vals = (np.exp(-(b1**2 + b2**2) / 2.0) * np.exp(2j * b1 * alpha)) + offset
    shape = vals.shape
    ones = np.ones(shape)
    return CharGrid(beta1_axis, beta2_axis, vals, ones, 0 * ones,
                    np.zeros(shape, dtype=int))


def l1_distance(a: DensityGrid, b: DensityGrid) -> float:
    w = np.outer(_trapezoid_weights(a.q1_axis), _trapezoid_weights(a.q2_axis))
    return float((w * np.abs(a.values - b.values)).sum())


def test_hermite_functions_orthonormal():
    q = np.linspace(-9, 9, 3001)
    h = hermite_functions(8, q)
    gram = h @ h.T * (q[1] - q[0])
    assert np.max(np.abs(gram - np.eye(8))) < 1e-6


def test_extend_hermitian_properties(model):
    bax = np.linspace(0, 4, 11)
    grid = analytic_grid(model, bax, bax)
    ext = extend_hermitian(grid)
    assert len(ext.beta1_axis) == 21
    assert not ext.sampled_quadrant
    # point reflection conjugates
    v = ext.values
    assert np.max(np.abs(v[::-1, ::-1].conj() - v)) < 1e-12
    # extending an already extended grid is rejected
    with pytest.raises(ValueError):
        extend_hermitian(ext)


def test_extend_real_grid_mirrors():
    bax = np.linspace(0, 3, 7)
    vals = np.exp(-np.add.outer(bax**2, bax**2) / 2).astype(complex)
    ones = np.ones_like(vals, dtype=float)
    grid = CharGrid(bax, bax, vals, ones, 0 * ones, np.zeros_like(ones, dtype=int))
    ext = extend_hermitian(grid)
    assert np.max(np.abs(ext.values - ext.values[::-1, :])) < 1e-12
    assert np.max(np.abs(ext.values - ext.values[:, ::-1])) < 1e-12


def test_extend_mixed_rule_against_exact(model, evolved_states):
    """The even-in-beta2 fill is validated against directly computed values."""
    s = evolved_states["t1"]
    bax = np.linspace(0, 3, 7)
    vals = exact_char_grid(s, bax, bax)
    ones = np.ones_like(vals, dtype=float)
    grid = CharGrid(bax, bax, vals, ones, 0 * ones, np.zeros_like(ones, dtype=int))
    ext = extend_hermitian(grid, mixed_rule="even")
    direct = exact_char_grid(s, ext.beta1_axis, ext.beta2_axis)
    assert np.max(np.abs(ext.values - direct)) < 1e-8


def test_baseline_correct(model):
    bax = np.linspace(0, 4, 11)
    clean = analytic_grid(model, bax, bax)
    corrected = baseline_correct(clean)
    assert corrected.baseline_correction < 2e-3  # tail of the true chi only
    shifted = baseline_correct(analytic_grid(model, bax, bax, offset=0.02))
    assert abs(shifted.baseline_correction - 0.02) < 2e-3
    assert np.max(np.abs(shifted.values - clean.values)) < 2e-3
    with pytest.raises(NoTailPointsError):
        baseline_correct(analytic_grid(model, np.linspace(0, 1, 5),
                                       np.linspace(0, 1, 5)))


def test_density_vacuum(hilbert_small):
    s = protocol.prepare(hilbert_small)
    bax = np.linspace(0, 4.5, 19)
    vals = exact_char_grid(s, bax, bax)
    ones = np.ones_like(vals, dtype=float)
    grid = extend_hermitian(
        CharGrid(bax, bax, vals, ones, 0 * ones, np.zeros_like(ones, dtype=int)))
    q = np.linspace(-4, 4, 81)
    dens = density_2d(grid, q, q)
    dens.validate()
    ref = np.exp(-q[:, None] ** 2 - q[None, :] ** 2) / np.pi
    assert np.max(np.abs(dens.values - ref)) < 1e-3
    # second moment of the vacuum is 1/2 per axis
    w = np.outer(_trapezoid_weights(q), _trapezoid_weights(q))
    q2 = (w * dens.values * q[:, None] ** 2).sum() / (w * dens.values).sum()
    assert abs(q2 - 0.5) < 1e-3


def test_density_initial_gaussian_center(model, initial_state):
    bax = np.linspace(0, 4.5, 19)
    grid = extend_hermitian(analytic_grid(model, bax, bax))
    q = np.linspace(-4, 4, 81)
    dens = density_2d(grid, q, q)
    w = np.outer(_trapezoid_weights(q), _trapezoid_weights(q))
    tot = (w * dens.values).sum()
    c1 = (w * dens.values * q[:, None]).sum() / tot
    assert abs(c1 + 1.5) < 0.05
    assert abs(tot - 1.0) < 0.05


def test_density_1d_vacuum(hilbert_small):
    s = protocol.prepare(hilbert_small)
    bax = np.linspace(0, 5, 26)
    vals = exact_char_grid(s, [0.0], bax)
    ones = np.ones_like(vals, dtype=float)
    grid = CharGrid([0.0], bax, vals, ones, 0 * ones,
                    np.zeros_like(ones, dtype=int), one_mode=True)
    ext = extend_hermitian(grid)
    dens = density_1d(ext)
    ref = np.exp(-dens.q2_axis**2) / np.sqrt(np.pi)
    assert np.max(np.abs(dens.values - ref)) < 1e-3
    assert abs(dens.norm - 1.0) < 0.05


def test_density_1d_dip_at_interference_time(model, evolved_states):
    s = evolved_states["t1"]
    bax = np.linspace(0, 5, 26)
    vals = exact_char_grid(s, [0.0], bax)
    # imaginary part vanishes by symmetry of the Q2 marginal
    assert np.max(np.abs(vals.imag)) < 1e-9
    ones = np.ones_like(vals, dtype=float)
    grid = extend_hermitian(CharGrid([0.0], bax, vals, ones, 0 * ones,
                                     np.zeros_like(ones, dtype=int), one_mode=True))
    dens = density_1d(grid)
    q = dens.q2_axis
    j0 = int(np.argmin(np.abs(q)))
    center = dens.values[j0]
    lobes = dens.values[np.abs(np.abs(q) - 1.0) < 0.3].max()
    assert center < 0.5 * lobes
    # direct marginal shows the same dip
    direct = state_density_q2(s, q)
    assert abs(direct.values[j0] - center) < 0.02


def test_round_trip_random_states():
    cfg = HilbertConfig(n_max=12)
    rng = np.random.default_rng(21)
    q = np.linspace(-4.5, 4.5, 91)
    bax = np.linspace(0, 5.5, 23)
    for _ in range(3):
        amps = rng.normal(size=cfg.dim) + 1j * rng.normal(size=cfg.dim)
        t = amps.reshape(2, cfg.n_max, cfg.n_max)
        t[:, 5:, :] = 0
        t[:, :, 5:] = 0
        amps = t.reshape(-1)
        s = PureState(amps / np.linalg.norm(amps), cfg)
        vals = exact_char_grid(s, bax, bax)
        ones = np.ones_like(vals, dtype=float)
        # mixed quadrants computed directly: generic states are not Q2-symmetric
        full_b = np.concatenate([-bax[:0:-1], bax])
        direct = exact_char_grid(s, full_b, full_b)
        grid = CharGrid(full_b, full_b, direct, np.ones_like(direct, dtype=float),
                        np.zeros(direct.shape), np.zeros(direct.shape, dtype=int),
                        sampled_quadrant=False)
        dens = density_2d(grid, q, q)
        ref = state_density(s, q, q)
        assert l1_distance(dens, ref) < 0.05
        assert dens.imag_residue < 0.01


def test_find_interference_time(model):
    t_star = find_interference_time(model, hilbert=HilbertConfig(n_max=24))
    assert abs(t_star - T_REF) < 0.02e-3
    with pytest.raises(WindowError):
        find_interference_time(model, window=(2.7e-3, 3.05e-3),
                               hilbert=HilbertConfig(n_max=16), n_samples=15)


def test_find_interference_time_scales(model):
    doubled = ModelParams(kappa=2 * model.kappa, omega=2 * model.omega)
    t_double = find_interference_time(doubled, hilbert=HilbertConfig(n_max=24))
    assert abs(t_double - T_REF / 2) < 0.01e-3


def test_width_returns_near_initial_at_revival(evolved_states):
    # frozen from the reference run: 1.00 at t = 0, ~1.97 at T, ~1.47 at 2T
    q = np.linspace(-4, 4, 81)
    w0 = rms_radius(state_density(evolved_states["t0"], q, q))
    w1 = rms_radius(state_density(evolved_states["t1"], q, q))
    w2 = rms_radius(state_density(evolved_states["t2"], q, q))
    assert abs(w0 - 1.0) < 0.02
    assert abs(w2 - 1.47) < 0.05
    assert w2 < 0.8 * w1


def test_node_contrast_initial(model, evolved_states):
    q = np.linspace(-4, 4, 81)
    d0 = state_density(evolved_states["t0"], q, q)
    assert node_contrast(d0) > 0.9
    dT = state_density(evolved_states["t1"], q, q)
    assert node_contrast(dT) > 0.8
    # suppression along the nodal strip relative to the global peak
    v = dT.normalized().values
    j0 = int(np.argmin(np.abs(q)))
    strip = v[(q >= 0.5) & (q <= 2.5), j0]
    assert strip.max() < 0.2 * v.max()


def test_rms_radius_plane_rotation_invariance(model, evolved_states):
    """Rotating the (Q1, Q2) plane leaves the RMS radius unchanged."""
    s = evolved_states["t1"]
    q = np.linspace(-6.5, 6.5, 131)
    dens = state_density(s, q, q)
    w0 = rms_radius(dens)
    # rotate the density by interpolation
    from scipy.interpolate import RegularGridInterpolator

    interp = RegularGridInterpolator((q, q), dens.values, bounds_error=False,
                                     fill_value=0.0)
    th = 0.7
    g1, g2 = np.meshgrid(q, q, indexing="ij")
    pts = np.stack([np.cos(th) * g1 - np.sin(th) * g2,
                    np.sin(th) * g1 + np.cos(th) * g2], axis=-1)
    from cisim.tomography import DensityGrid as DG

    rotated = DG(q, q, np.maximum(interp(pts), 0.0))
    assert abs(rms_radius(rotated) - w0) < 0.01


def test_density_csv_round_trip(tmp_path, model, initial_state):
    q = np.linspace(-3, 3, 21)
    dens = state_density(initial_state, q, q)
    path = tmp_path / "d.csv"
    dens.to_csv(path)
    back = DensityGrid.from_csv(path)
    assert np.allclose(back.values, dens.values, atol=1e-12)
    marg = state_density_q2(initial_state, q)
    path1 = tmp_path / "m.csv"
    marg.to_csv(path1)
    back1 = DensityGrid.from_csv(path1)
    assert back1.q1_axis is None
    assert np.allclose(back1.values, marg.values, atol=1e-12)
