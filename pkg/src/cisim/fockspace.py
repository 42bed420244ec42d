"""Truncated Fock-space operators and states for one qubit and two bosonic modes.

Composite basis ordering is qubit index slowest, then mode 1, then mode 2,
so a state vector of length 2*n_max**2 reshapes to (2, n_max, n_max).
Single-mode operators are dense numpy arrays; composite embeddings are
scipy CSR matrices so that time stepping stays cheap at n_max = 24.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln

__all__ = [
    "HilbertConfig",
    "PureState",
    "MixedState",
    "TruncationOverflowError",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SIGMA_PLUS",
    "ladder_ops",
    "number_op",
    "position_momentum_ops",
    "displacement_op",
    "displacement_block",
    "coherent_state",
    "thermal_state",
    "qubit_op",
    "mode_op",
    "spin_mode_op",
    "basis_state",
    "compose_pure",
]


class TruncationOverflowError(RuntimeError):
    """Population too close to the Fock cutoff for the result to be trusted."""


# Pauli matrices in the (|down>, |up>) ordering used throughout: index 0 is
# the optically pumped state |down>, and sigma_z|down> = +|down>.  The sign
# of SIGMA_Y fixes the phase-space handedness assumed by the drive phase
# conventions; all pulse phases in this package are stated in this gauge.
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |up><down|


@dataclass(frozen=True)
class HilbertConfig:
    """Truncation of the composite qubit (x) mode1 (x) mode2 space.

    n_max counts the retained Fock states |0> .. |n_max-1> per mode.
    """

    n_max: int = 24
    mode_count: int = 2
    qubit_dim: int = 2

    def __post_init__(self):
        if self.n_max < 2:
            raise ValueError(f"n_max must be >= 2, got {self.n_max}")
        if self.mode_count != 2 or self.qubit_dim != 2:
            raise ValueError("composite space is fixed at one qubit and two modes")

    @property
    def dim(self) -> int:
        return self.qubit_dim * self.n_max**2


def ladder_ops(cfg: HilbertConfig) -> tuple[np.ndarray, np.ndarray]:
    """Single-mode annihilation and creation operators (dense, n_max square).

    The top Fock state is annihilated upward: a_dag|n_max-1> = 0.
    """
    n = cfg.n_max
    a = np.zeros((n, n), dtype=complex)
    for k in range(1, n):
        a[k - 1, k] = np.sqrt(k)
    return a, a.conj().T


def number_op(cfg: HilbertConfig) -> np.ndarray:
    return np.diag(np.arange(cfg.n_max, dtype=float)).astype(complex)


def position_momentum_ops(cfg: HilbertConfig) -> tuple[np.ndarray, np.ndarray]:
    """Dimensionless quadratures Q = (a_dag + a)/sqrt(2), P = i(a_dag - a)/sqrt(2)."""
    a, adag = ladder_ops(cfg)
    q = (adag + a) / np.sqrt(2.0)
    p = 1.0j * (adag - a) / np.sqrt(2.0)
    return q, p


def displacement_op(alpha: complex, cfg: HilbertConfig) -> np.ndarray:
    """Single-mode displacement exp(alpha a_dag - alpha* a) by dense expm.

    Accurate only well inside the truncation; use displacement_block when
    exact matrix elements are needed near or beyond the cutoff.
    """
    a, adag = ladder_ops(cfg)
    return expm(alpha * adag - np.conjugate(alpha) * a)


def displacement_block(alpha: complex, n_levels: int) -> np.ndarray:
    """Exact matrix elements <m|D(alpha)|n> for m, n < n_levels.

    Unlike expm of the truncated generator, these are the matrix elements of
    the untruncated displacement operator, so expectation values taken over
    states supported inside the truncation are exact for any |alpha|.
    """
    if alpha == 0:
        return np.eye(n_levels, dtype=complex)
    x = abs(alpha) ** 2
    phase = alpha / abs(alpha)
    out = np.zeros((n_levels, n_levels), dtype=complex)
    pref = np.exp(-x / 2.0)
    for m in range(n_levels):
        for n in range(m + 1):
            k = m - n
            mag = np.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1))) * abs(alpha) ** k
            lag = eval_genlaguerre(n, k, x)
            out[m, n] = pref * mag * lag * phase**k
            if k:
                out[n, m] = pref * mag * lag * (-np.conjugate(phase)) ** k
    return out


def coherent_state(alpha: complex, cfg: HilbertConfig) -> np.ndarray:
    """Single-mode coherent state D(alpha)|0> as a length-n_max vector.

    Requires |alpha|**2 <= n_max/4 so the Poisson tail stays far from the
    cutoff; raises TruncationOverflowError if the top two Fock levels carry
    more than 1e-6 population anyway.
    """
    if abs(alpha) ** 2 > cfg.n_max / 4.0:
        raise ValueError(
            f"|alpha|^2 = {abs(alpha)**2:.3f} exceeds n_max/4 = {cfg.n_max / 4.0:.3f}"
        )
    vac = np.zeros(cfg.n_max, dtype=complex)
    vac[0] = 1.0
    psi = displacement_op(alpha, cfg) @ vac
    edge = float(np.sum(np.abs(psi[cfg.n_max - 2 :]) ** 2))
    if edge > 1e-6:
        raise TruncationOverflowError(
            f"coherent state leaks {edge:.2e} past n_max - 2 = {cfg.n_max - 2}"
        )
    return psi / np.linalg.norm(psi)


def thermal_state(n_bar: float, cfg: HilbertConfig) -> np.ndarray:
    """Single-mode thermal density matrix, renormalized on the truncated space."""
    if n_bar < 0:
        raise ValueError("n_bar must be >= 0")
    if n_bar == 0:
        rho = np.zeros((cfg.n_max, cfg.n_max), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    ratio = n_bar / (n_bar + 1.0)
    pops = ratio ** np.arange(cfg.n_max)
    pops /= pops.sum()
    return np.diag(pops).astype(complex)


# ---------------------------------------------------------------------------
# composite embeddings


def qubit_op(sigma: np.ndarray, cfg: HilbertConfig) -> sp.csr_matrix:
    """Embed a 2x2 qubit operator into the composite space."""
    eye = sp.identity(cfg.n_max**2, format="csr", dtype=complex)
    return sp.kron(sp.csr_matrix(sigma), eye, format="csr")


def mode_op(op: np.ndarray, mode: int, cfg: HilbertConfig) -> sp.csr_matrix:
    """Embed a single-mode operator on mode 1 or 2 into the composite space."""
    return spin_mode_op(np.eye(2, dtype=complex), op, mode, cfg)


def spin_mode_op(
    sigma: np.ndarray, op: np.ndarray, mode: int, cfg: HilbertConfig
) -> sp.csr_matrix:
    """Embed sigma (x) op acting on the given mode, identity elsewhere."""
    if mode not in (1, 2):
        raise ValueError(f"mode must be 1 or 2, got {mode}")
    eye = sp.identity(cfg.n_max, format="csr", dtype=complex)
    m1 = sp.csr_matrix(op) if mode == 1 else eye
    m2 = sp.csr_matrix(op) if mode == 2 else eye
    return sp.kron(sp.csr_matrix(sigma), sp.kron(m1, m2, format="csr"), format="csr")


# ---------------------------------------------------------------------------
# states


@dataclass
class PureState:
    """Composite state vector; treat as immutable after construction."""

    amplitudes: np.ndarray
    cfg: HilbertConfig

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.cfg.dim,):
            raise ValueError(
                f"amplitude vector has shape {self.amplitudes.shape}, "
                f"expected ({self.cfg.dim},)"
            )

    @property
    def tensor(self) -> np.ndarray:
        """View of the amplitudes as (qubit, n1, n2)."""
        n = self.cfg.n_max
        return self.amplitudes.reshape(2, n, n)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "PureState") -> float:
        return abs(self.overlap(other)) ** 2

    def expect(self, op) -> complex:
        return complex(np.vdot(self.amplitudes, op @ self.amplitudes))

    def qubit_populations(self) -> np.ndarray:
        t = self.tensor
        return np.array([np.sum(np.abs(t[0]) ** 2), np.sum(np.abs(t[1]) ** 2)])

    def qubit_reduced(self) -> np.ndarray:
        t = self.tensor.reshape(2, -1)
        return t @ t.conj().T

    def mode_populations(self, mode: int) -> np.ndarray:
        """Fock populations of one mode, traced over everything else."""
        t = self.tensor
        axis = (0, 2) if mode == 1 else (0, 1)
        return np.sum(np.abs(t) ** 2, axis=axis)

    def mode_occupation(self, mode: int) -> float:
        pops = self.mode_populations(mode)
        return float(np.dot(pops, np.arange(self.cfg.n_max)))

    def edge_population(self, levels: int = 2) -> float:
        """Worst-mode population within `levels` of the Fock cutoff."""
        return max(
            float(np.sum(self.mode_populations(m)[self.cfg.n_max - levels :]))
            for m in (1, 2)
        )

    def to_mixed(self) -> "MixedState":
        return MixedState(np.outer(self.amplitudes, self.amplitudes.conj()), self.cfg)


@dataclass
class MixedState:
    """Composite density operator; treat as immutable after construction."""

    rho: np.ndarray
    cfg: HilbertConfig

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        d = self.cfg.dim
        if self.rho.shape != (d, d):
            raise ValueError(f"rho has shape {self.rho.shape}, expected ({d}, {d})")

    @property
    def tensor(self) -> np.ndarray:
        """View as (q, n1, n2, q', m1, m2)."""
        n = self.cfg.n_max
        return self.rho.reshape(2, n, n, 2, n, n)

    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)))

    def validate(self, trace_tol=1e-7, herm_tol=1e-9, eig_tol=1e-8) -> None:
        if abs(self.trace() - 1.0) > trace_tol:
            raise ValueError(f"trace deviates by {abs(self.trace() - 1.0):.2e}")
        herm = np.max(np.abs(self.rho - self.rho.conj().T))
        if herm > herm_tol:
            raise ValueError(f"Hermiticity violated by {herm:.2e}")
        lo = float(np.linalg.eigvalsh(self.rho).min())
        if lo < -eig_tol:
            raise ValueError(f"negative eigenvalue {lo:.2e}")

    def expect(self, op) -> complex:
        return complex(np.trace(op @ self.rho)) if not sp.issparse(op) else complex(
            (op @ self.rho).diagonal().sum()
        )

    def qubit_populations(self) -> np.ndarray:
        n2 = self.cfg.n_max**2
        blocks = self.rho.reshape(2, n2, 2, n2)
        return np.array(
            [float(np.real(np.trace(blocks[0, :, 0, :]))),
             float(np.real(np.trace(blocks[1, :, 1, :])))]
        )

    def mode_populations(self, mode: int) -> np.ndarray:
        t = self.tensor
        if mode == 1:
            # trace over qubit and mode 2, diagonal in mode 1
            return np.real(np.einsum("qabqab->a", t)).copy()
        return np.real(np.einsum("qabqab->b", t)).copy()

    def mode_occupation(self, mode: int) -> float:
        pops = self.mode_populations(mode)
        return float(np.dot(pops, np.arange(self.cfg.n_max)))

    def edge_population(self, levels: int = 2) -> float:
        return max(
            float(np.sum(self.mode_populations(m)[self.cfg.n_max - levels :]))
            for m in (1, 2)
        )


def basis_state(cfg: HilbertConfig, qubit: int = 0, n1: int = 0, n2: int = 0) -> PureState:
    amps = np.zeros(cfg.dim, dtype=complex)
    amps[(qubit * cfg.n_max + n1) * cfg.n_max + n2] = 1.0
    return PureState(amps, cfg)


def compose_pure(
    qubit: np.ndarray, mode1: np.ndarray, mode2: np.ndarray, cfg: HilbertConfig
) -> PureState:
    """Tensor a qubit vector with two single-mode vectors."""
    amps = np.einsum("q,i,j->qij", qubit, mode1, mode2).reshape(-1)
    return PureState(amps, cfg)
