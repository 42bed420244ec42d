"""Time evolution: Schrodinger equation for pure states, Lindblad for mixed.

Both integrators are adaptive explicit Runge-Kutta (DOP853 via solve_ivp) on
the interaction-picture equations.  Norm and trace drift are checked after
every call and reported through warnings, never silently renormalized.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .fockspace import HilbertConfig, MixedState, PureState, ladder_ops, mode_op
from .hamiltonians import HamiltonianTerms, terms_apply

__all__ = [
    "NoiseParams",
    "IntegratorConfig",
    "IntegrationError",
    "NormDriftWarning",
    "evolve_unitary",
    "evolve_lindblad",
    "noise_collapse_ops",
]

NORM_DRIFT_TOL = 1e-7
TRACE_DRIFT_TOL = 1e-6


class IntegrationError(RuntimeError):
    """Adaptive step control could not meet the requested tolerance."""


class NormDriftWarning(UserWarning):
    """State norm or trace drifted past the reporting threshold."""


@dataclass(frozen=True)
class NoiseParams:
    """Measured decoherence figures: heating, dephasing, preparation, readout."""

    heating_rate: float = 0.2          # quanta/s per mode
    dephasing_t2star: float = 0.035    # s
    initial_n_bar: float = 0.04
    spam_error: float = 0.005

    def __post_init__(self):
        for name in ("heating_rate", "dephasing_t2star", "initial_n_bar", "spam_error"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = np.inf

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not (0 < v <= 1e-2):
                raise ValueError(f"{name} must lie in (0, 1e-2], got {v}")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")


def _solve(rhs, y0, t0, t1, cfg, t_eval):
    sol = solve_ivp(
        rhs,
        (t0, t1),
        y0,
        method="DOP853",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=cfg.max_step,
        t_eval=t_eval,
        dense_output=False,
    )
    if not sol.success:
        raise IntegrationError(sol.message)
    return sol


def evolve_unitary(
    psi: PureState,
    terms: HamiltonianTerms,
    t0: float,
    t1: float,
    cfg: IntegratorConfig | None = None,
    t_eval=None,
):
    """Integrate i dpsi/dt = H(t) psi from t0 to t1.

    With t_eval a list of sample times, returns a list of PureState; otherwise
    the state at t1.
    """
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    cfg = cfg or IntegratorConfig()
    if t1 == t0:
        out = PureState(psi.amplitudes.copy(), psi.cfg)
        return [out] if t_eval is not None else out

    def rhs(t, y):
        return -1j * terms_apply(terms, t, y)

    sol = _solve(rhs, psi.amplitudes.astype(complex), t0, t1, cfg, t_eval)
    states = []
    for k in range(sol.y.shape[1]):
        amps = sol.y[:, k]
        drift = abs(np.linalg.norm(amps) - 1.0)
        if drift > NORM_DRIFT_TOL:
            warnings.warn(
                f"norm drifted by {drift:.2e} at t = {sol.t[k]:.3e} s",
                NormDriftWarning,
            )
        states.append(PureState(amps, psi.cfg))
    return states if t_eval is not None else states[-1]


def noise_collapse_ops(noise: NoiseParams, cfg: HilbertConfig) -> list[sp.csr_matrix]:
    """Collapse operators for symmetric heating and number dephasing, both modes.

    Heating uses equal up/down jump rates Gamma = heating_rate so that
    d<n>/dt = heating_rate; dephasing uses sqrt(2/T2*) a_dag a so a 0-1 Fock
    coherence decays as exp(-t/T2*).
    """
    a, adag = ladder_ops(cfg)
    n_op = adag @ a
    ops: list[sp.csr_matrix] = []
    for mode in (1, 2):
        if noise.heating_rate > 0:
            root = np.sqrt(noise.heating_rate)
            ops.append(root * mode_op(a, mode, cfg))
            ops.append(root * mode_op(adag, mode, cfg))
        if noise.dephasing_t2star > 0 and np.isfinite(noise.dephasing_t2star):
            ops.append(np.sqrt(2.0 / noise.dephasing_t2star) * mode_op(n_op, mode, cfg))
    return ops


def evolve_lindblad(
    rho: MixedState,
    terms: HamiltonianTerms,
    c_ops,
    t0: float,
    t1: float,
    cfg: IntegratorConfig | None = None,
    t_eval=None,
):
    """Integrate drho/dt = -i[H(t), rho] + sum_k D[L_k] rho.

    c_ops is a list of (sparse) collapse operators L_k.  Returns MixedState,
    or a list when t_eval is given.
    """
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    cfg = cfg or IntegratorConfig()
    if t1 == t0:
        out = MixedState(rho.rho.copy(), rho.cfg)
        return [out] if t_eval is not None else out

    d = rho.rho.shape[0]
    h_mats = [mat for mat, _ in terms]
    h_mats_t = [mat.T.tocsr() for mat in h_mats]
    coefs = [coef for _, coef in terms]
    ls = [sp.csr_matrix(L) for L in c_ops]
    ls_conj = [L.conj().tocsr() for L in ls]
    gain = None
    for L in ls:
        piece = (L.conj().T @ L).tocsr()
        gain = piece if gain is None else gain + piece
    gain_t = gain.T.tocsr() if gain is not None else None

    def rhs(t, y):
        r = y.reshape(d, d)
        rt = r.T
        out = np.zeros_like(r)
        for mat, mat_t, coef in zip(h_mats, h_mats_t, coefs):
            f = coef(t)
            out += (-1j * f) * (mat @ r)
            out += (1j * f) * (mat_t @ rt).T
        for L, Lc in zip(ls, ls_conj):
            out += L @ (Lc @ rt).T
        if gain is not None:
            out -= 0.5 * (gain @ r)
            out -= 0.5 * (gain_t @ rt).T
        return out.reshape(-1)

    sol = _solve(rhs, rho.rho.reshape(-1).astype(complex), t0, t1, cfg, t_eval)
    states = []
    for k in range(sol.y.shape[1]):
        mat = sol.y[:, k].reshape(d, d)
        drift = abs(np.real(np.trace(mat)) - 1.0)
        if drift > TRACE_DRIFT_TOL:
            warnings.warn(
                f"trace drifted by {drift:.2e} at t = {sol.t[k]:.3e} s",
                NormDriftWarning,
            )
        states.append(MixedState(mat, rho.cfg))
    return states if t_eval is not None else states[-1]
