"""Jahn-Teller model and spin-dependent-force drive Hamiltonians.

Energies and rates are angular frequencies (rad/s) with hbar = 1.  Time
dependent Hamiltonians are represented as lists of (sparse matrix, coefficient
function) terms, H(t) = sum_k f_k(t) M_k, with Hermitian-conjugate terms
listed explicitly so the sum is Hermitian at every t.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .fockspace import (
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    HilbertConfig,
    ladder_ops,
    spin_mode_op,
)

__all__ = [
    "ModelParams",
    "SdfParams",
    "SidebandParams",
    "HamiltonianTerms",
    "sigma_phi",
    "jt_surfaces",
    "sdf_terms",
    "sdf_hamiltonian",
    "jt_terms",
    "jt_interaction_hamiltonian",
    "sideband_sdf_terms",
    "sideband_sdf_hamiltonian",
    "terms_matrix",
    "terms_apply",
]

Term = tuple[sp.csr_matrix, Callable[[float], complex]]
HamiltonianTerms = Sequence[Term]


@dataclass(frozen=True)
class ModelParams:
    """Vibronic coupling strength and common mode frequency, rad/s."""

    kappa: float = 2 * np.pi * 1000.0
    omega: float = 2 * np.pi * 667.0

    def __post_init__(self):
        if self.kappa <= 0 or self.omega <= 0:
            raise ValueError("kappa and omega must be positive")

    @property
    def ratio(self) -> float:
        """Dimensionless displacement kappa/omega of the potential minimum."""
        return self.kappa / self.omega

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega


@dataclass(frozen=True)
class SdfParams:
    """One spin-dependent force: mode, spin basis angle, detuning, strength."""

    mode: int
    spin_phase: float = 0.0
    detuning: float = 0.0
    rabi: float = 0.0
    motional_phase: float = 0.0

    def __post_init__(self):
        if self.mode not in (1, 2):
            raise ValueError(f"mode must be 1 or 2, got {self.mode}")


@dataclass(frozen=True)
class SidebandParams:
    """Full red+blue sideband drive with independent center-line and motional detunings.

    rabi is the sideband Rabi frequency with the Lamb-Dicke factor already
    absorbed (eta * Omega_r = eta * Omega_b).
    """

    center_line_detuning: float = 0.0
    motional_detuning: float = 0.0
    rabi: float = 0.0
    spin_phase: float = 0.0
    motional_phase: float = 0.0

    def __post_init__(self):
        for name in ("center_line_detuning", "motional_detuning", "rabi",
                     "spin_phase", "motional_phase"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def sigma_phi(phi_s: float) -> np.ndarray:
    """Equatorial Pauli operator sigma_x cos(phi_s) + sigma_y sin(phi_s)."""
    return SIGMA_X * np.cos(phi_s) + SIGMA_Y * np.sin(phi_s)


def jt_surfaces(q1, q2, model: ModelParams):
    """Adiabatic surfaces E_-/E_+ = omega r^2 / 2 -/+ kappa r at (Q1, Q2)."""
    r = np.hypot(np.asarray(q1, dtype=float), np.asarray(q2, dtype=float))
    harm = 0.5 * model.omega * r**2
    return harm - model.kappa * r, harm + model.kappa * r


def _rotating(freq: float, phase: float) -> Callable[[float], complex]:
    def coef(t: float) -> complex:
        return np.exp(1j * (freq * t + phase))

    return coef


def sdf_terms(s: SdfParams, cfg: HilbertConfig) -> list[Term]:
    """Terms of H = (rabi/2) sigma_phi (a_dag e^{i(phi_m + delta t)} + h.c.)."""
    _, adag = ladder_ops(cfg)
    raise_half = (s.rabi / 2.0) * spin_mode_op(sigma_phi(s.spin_phase), adag, s.mode, cfg)
    return [
        (raise_half, _rotating(s.detuning, s.motional_phase)),
        (raise_half.conj().T.tocsr(), _rotating(-s.detuning, -s.motional_phase)),
    ]


def sdf_hamiltonian(s: SdfParams, cfg: HilbertConfig, t: float) -> sp.csr_matrix:
    return terms_matrix(sdf_terms(s, cfg), t)


def jt_terms(model: ModelParams, cfg: HilbertConfig) -> list[Term]:
    """Interaction-picture Jahn-Teller coupling as two simultaneous forces.

    Identical to sdf_terms for (mode 1, sigma_z) + (mode 2, sigma_x), both
    with detuning omega and rabi sqrt(2) kappa.
    """
    _, adag = ladder_ops(cfg)
    pref = model.kappa / np.sqrt(2.0)
    raising = (
        pref * spin_mode_op(SIGMA_Z, adag, 1, cfg)
        + pref * spin_mode_op(SIGMA_X, adag, 2, cfg)
    ).tocsr()
    return [
        (raising, _rotating(model.omega, 0.0)),
        (raising.conj().T.tocsr(), _rotating(-model.omega, 0.0)),
    ]


def jt_interaction_hamiltonian(
    model: ModelParams, cfg: HilbertConfig, t: float
) -> sp.csr_matrix:
    """H_I(t) built directly: (kappa/sqrt2) [sigma_z (a1d e^{iwt} + a1 e^{-iwt}) + x<->2]."""
    a, adag = ladder_ops(cfg)
    pref = model.kappa / np.sqrt(2.0)
    ph = np.exp(1j * model.omega * t)
    m1 = pref * (ph * adag + np.conjugate(ph) * a)
    return (
        spin_mode_op(SIGMA_Z, m1, 1, cfg) + spin_mode_op(SIGMA_X, m1, 2, cfg)
    ).tocsr()


def sideband_sdf_terms(
    s: SidebandParams, mode: int, cfg: HilbertConfig
) -> list[Term]:
    """Simultaneous red/blue sideband drive on one mode.

    H = (rabi/2) sigma_plus e^{i(dw0 t + phi_s)}
        [a e^{-i(dwm t + phi_m)} + a_dag e^{i(dwm t + phi_m)}] + h.c.

    Reduces to sdf_terms when dw0 = 0 and dwm = delta.
    """
    a, adag = ladder_ops(cfg)
    half = s.rabi / 2.0
    red = half * spin_mode_op(SIGMA_PLUS, a, mode, cfg)
    blue = half * spin_mode_op(SIGMA_PLUS, adag, mode, cfg)
    dw0, dwm = s.center_line_detuning, s.motional_detuning
    phs, phm = s.spin_phase, s.motional_phase
    terms: list[Term] = []
    for mat, freq, phase in (
        (red, dw0 - dwm, phs - phm),
        (blue, dw0 + dwm, phs + phm),
    ):
        terms.append((mat, _rotating(freq, phase)))
        terms.append((mat.conj().T.tocsr(), _rotating(-freq, -phase)))
    return terms


def sideband_sdf_hamiltonian(
    s: SidebandParams, mode: int, cfg: HilbertConfig, t: float
) -> sp.csr_matrix:
    return terms_matrix(sideband_sdf_terms(s, mode, cfg), t)


def terms_matrix(terms: HamiltonianTerms, t: float) -> sp.csr_matrix:
    """Assemble H(t) = sum_k f_k(t) M_k as a CSR matrix."""
    out = None
    for mat, coef in terms:
        piece = coef(t) * mat
        out = piece if out is None else out + piece
    return out.tocsr()


def terms_apply(terms: HamiltonianTerms, t: float, vec: np.ndarray) -> np.ndarray:
    """Apply H(t) to a vector without assembling the matrix."""
    out = np.zeros_like(vec)
    for mat, coef in terms:
        out += coef(t) * (mat @ vec)
    return out
