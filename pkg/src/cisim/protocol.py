"""Four-stage experiment emulation: prepare, initialise, evolve, reconstruct.

The evolution runs in the interaction picture of the bare mode Hamiltonian and
is converted to the lab (Schrodinger) frame before anything is measured, so
reconstructed densities line up with the adiabatic-surface picture.

Measurement emulation follows the pulse sequence literally: optional qubit
flip, mid-circuit projection keeping |down>, optional quarter rotation for the
imaginary part, controlled displacements in the sigma_x basis, then <sigma_z>.
Sign conventions are fixed so that a positive beta yields the displacement
D(i beta / 2) per branch and the readout returns +Re chi (or +Im chi).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dynamics import (
    IntegratorConfig,
    NoiseParams,
    evolve_lindblad,
    evolve_unitary,
    noise_collapse_ops,
)
from .fockspace import (
    SIGMA_X,
    SIGMA_Y,
    HilbertConfig,
    MixedState,
    PureState,
    TruncationOverflowError,
    basis_state,
    displacement_block,
    displacement_op,
    thermal_state,
)
from .hamiltonians import ModelParams, SdfParams, sdf_terms, sideband_sdf_terms

__all__ = [
    "ExperimentConfig",
    "CharGrid",
    "MeasureResult",
    "ScheduleResult",
    "DEFAULT_INIT_RABI",
    "DEFAULT_PROBE_RABI",
    "prepare",
    "initialise",
    "evolve_jt",
    "apply_qubit_rotation",
    "exact_char_function",
    "exact_char_grid",
    "measure_char_point",
    "run_reconstruction_experiment",
    "simulate_schedule",
]

# Sideband Rabi frequencies used when none are supplied (rad/s).
DEFAULT_INIT_RABI = 2 * np.pi * 2.23e3
DEFAULT_PROBE_RABI = 2 * np.pi * 2.31e3

STATE_EDGE_TOL = 1e-6


# ---------------------------------------------------------------------------
# state preparation and evolution


def prepare(cfg: HilbertConfig, noise: NoiseParams | None = None):
    """Fiducial state: qubit |down>, modes in vacuum or thermal n_bar."""
    if noise is None:
        return basis_state(cfg)
    if noise.initial_n_bar == 0:
        return basis_state(cfg).to_mixed()
    qubit = np.zeros((2, 2), dtype=complex)
    qubit[0, 0] = 1.0
    th = thermal_state(noise.initial_n_bar, cfg)
    rho = np.kron(qubit, np.kron(th, th))
    return MixedState(rho, cfg)


def apply_qubit_rotation(state, theta: float, axis_phase: float = 0.0):
    """R(theta) = exp(-i theta sigma_phi / 2) applied to the qubit."""
    sig = SIGMA_X * np.cos(axis_phase) + SIGMA_Y * np.sin(axis_phase)
    u = np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * sig
    if isinstance(state, PureState):
        t = np.einsum("pq,qij->pij", u, state.tensor)
        return PureState(t.reshape(-1), state.cfg)
    t = np.einsum("pq,qijrab,rs->pijsab", u, state.tensor, u.conj().T)
    return MixedState(t.reshape(state.cfg.dim, state.cfg.dim), state.cfg)


def _controlled_displacement(state: PureState, mode: int, phi_s: float,
                             xi_plus: complex) -> PureState:
    """Exact propagator of a resonant SDF pulse: D(+-xi) on the sigma_phi branches."""
    t = state.tensor
    # components along the sigma_phi eigenvectors (1, e^{i phi_s})/sqrt2
    ph = np.exp(1j * phi_s)
    plus = (t[0] + np.conjugate(ph) * t[1]) / np.sqrt(2.0)
    minus = (t[0] - np.conjugate(ph) * t[1]) / np.sqrt(2.0)
    n = state.cfg.n_max
    d_plus = displacement_op(xi_plus, state.cfg)
    d_minus = displacement_op(-xi_plus, state.cfg)
    axis = mode - 1
    plus = np.tensordot(d_plus, plus, axes=(1, axis))
    minus = np.tensordot(d_minus, minus, axes=(1, axis))
    if mode == 2:  # tensordot moved the contracted axis to the front
        plus = plus.T
        minus = minus.T
    out = np.empty((2, n, n), dtype=complex)
    out[0] = (plus + minus) / np.sqrt(2.0)
    out[1] = ph * (plus - minus) / np.sqrt(2.0)
    return PureState(out.reshape(-1), state.cfg)


def initialise(state, model: ModelParams, rabi: float = DEFAULT_INIT_RABI,
               noise: NoiseParams | None = None,
               integrator: IntegratorConfig | None = None):
    """Displace mode 1 by -kappa/(sqrt2 omega) with the qubit returned to |down>.

    Pulse sequence: R_x(pi/2), resonant SDF on mode 1 in the sigma_y basis with
    motional phase pi/2 for tau = 2|alpha|/rabi, then R_x(-pi/2).
    """
    alpha = model.ratio / np.sqrt(2.0)
    tau = 2.0 * alpha / rabi
    state = apply_qubit_rotation(state, np.pi / 2)
    if isinstance(state, PureState) and noise is None:
        # the sigma_y = -1 branch the qubit sits in picks up D(-rabi tau / 2)
        state = _controlled_displacement(state, 1, np.pi / 2, rabi * tau / 2.0)
    else:
        if isinstance(state, PureState):
            state = state.to_mixed()
        params = SdfParams(mode=1, spin_phase=np.pi / 2, detuning=0.0,
                           rabi=rabi, motional_phase=np.pi / 2)
        terms = sdf_terms(params, state.cfg)
        c_ops = noise_collapse_ops(noise, state.cfg) if noise else []
        cfg = integrator or IntegratorConfig(max_step=tau / 50)
        state = evolve_lindblad(state, terms, c_ops, 0.0, tau, cfg)
    return apply_qubit_rotation(state, -np.pi / 2)


def _to_schrodinger(state, model: ModelParams, t: float):
    """Rotate an interaction-picture state into the lab frame at time t."""
    n = state.cfg.n_max
    phases = np.exp(-1j * model.omega * t * np.add.outer(np.arange(n), np.arange(n)))
    if isinstance(state, PureState):
        return PureState((state.tensor * phases[None]).reshape(-1), state.cfg)
    t6 = state.tensor * phases[None, :, :, None, None, None]
    t6 = t6 * phases.conj()[None, None, None, None, :, :]
    return MixedState(t6.reshape(state.cfg.dim, state.cfg.dim), state.cfg)


def evolve_jt(state, model: ModelParams, t: float,
              noise: NoiseParams | None = None,
              integrator: IntegratorConfig | None = None,
              t_eval=None, frame: str = "schrodinger"):
    """Evolve under the two simultaneous spin-dependent forces for duration t.

    Both forces act at once (no Trotter splitting).  The default output frame
    is the lab frame; pass frame="interaction" for the raw rotating-frame
    state.  With t_eval, returns one state per sample time.
    """
    from .hamiltonians import jt_terms

    if frame not in ("schrodinger", "interaction"):
        raise ValueError(f"unknown frame {frame!r}")
    cfg = integrator or IntegratorConfig(max_step=model.period / 200.0)
    terms = jt_terms(model, state.cfg)
    if noise is not None or isinstance(state, MixedState):
        if isinstance(state, PureState):
            state = state.to_mixed()
        c_ops = noise_collapse_ops(noise, state.cfg) if noise else []
        out = evolve_lindblad(state, terms, c_ops, 0.0, t, cfg, t_eval=t_eval)
    else:
        out = evolve_unitary(state, terms, 0.0, t, cfg, t_eval=t_eval)
    if frame == "interaction":
        return out
    if t_eval is None:
        return _to_schrodinger(out, model, t)
    return [_to_schrodinger(s, model, tk) for s, tk in zip(out, t_eval)]


# ---------------------------------------------------------------------------
# characteristic function, exact route


@lru_cache(maxsize=256)
def _cached_block(alpha: complex, n: int) -> np.ndarray:
    return displacement_block(alpha, n)


def _check_state_edge(state) -> None:
    edge = state.edge_population(levels=1)
    if edge > STATE_EDGE_TOL:
        raise TruncationOverflowError(
            f"state carries {edge:.2e} population above Fock level n_max - 2; "
            f"increase n_max"
        )


def exact_char_function(state, beta1: float, beta2: float) -> complex:
    """<D1(i beta1) D2(i beta2)> by direct operator application.

    Uses exact displacement matrix elements, so the value is reliable at any
    beta provided the state itself is converged within the truncation.
    """
    _check_state_edge(state)
    n = state.cfg.n_max
    d1 = _cached_block(1j * float(beta1), n)
    d2 = _cached_block(1j * float(beta2), n)
    if isinstance(state, PureState):
        t = state.tensor
        disp = np.einsum("ai,bj,qij->qab", d1, d2, t)
        return complex(np.vdot(t, disp))
    # Tr[rho (D1 x D2)] over the (q, n1, n2 | q', m1, m2) tensor
    t = state.tensor
    return complex(np.einsum("qabqcd,ca,db->", t, d1, d2))


def exact_char_grid(state, beta1_axis, beta2_axis) -> np.ndarray:
    """exact_char_function on the outer product of two beta axes."""
    out = np.empty((len(beta1_axis), len(beta2_axis)), dtype=complex)
    for i, b1 in enumerate(beta1_axis):
        for j, b2 in enumerate(beta2_axis):
            out[i, j] = exact_char_function(state, b1, b2)
    return out


# ---------------------------------------------------------------------------
# measurement emulation


@dataclass
class MeasureResult:
    expectation: float
    estimate: float | None
    p_branch: float


def _measurement_levels(state, beta_max: float) -> int:
    """Fock levels needed so displaced branches stay clear of the cutoff."""
    n = state.cfg.n_max
    worst = 0.0
    for mode in (1, 2):
        pops = np.maximum(state.mode_populations(mode), 0.0)
        tail = np.cumsum(pops[::-1])[::-1]
        below = np.nonzero(tail < 1e-9)[0]
        support = int(below[0]) if below.size else n
        reach = (np.sqrt(max(support, 1)) + abs(beta_max) / 2.0) ** 2
        worst = max(worst, reach + 6.0 * np.sqrt(reach) + 10.0)
    return max(n, int(np.ceil(worst)))


@lru_cache(maxsize=512)
def _cached_displacement(xi: complex, n: int) -> np.ndarray:
    return displacement_op(xi, HilbertConfig(n_max=n))


def _branch_motional(state, branch: str):
    """Mid-circuit selection: probability and the kept motional state.

    Pure input -> (p, (n, n) wavefunction); mixed -> (p, (n, n, n, n) rho).
    The motional state is None when the branch never post-selects (p ~ 0).
    """
    if branch not in ("down", "up"):
        raise ValueError(f"branch must be 'down' or 'up', got {branch}")
    if branch == "up":
        state = apply_qubit_rotation(state, np.pi)
    if isinstance(state, PureState):
        comp = state.tensor[0]
        p = float(np.sum(np.abs(comp) ** 2))
        if p < 1e-12:
            return p, None
        return p, comp / np.sqrt(p)
    block = state.tensor[0, :, :, 0, :, :]
    p = float(np.real(np.einsum("abab->", block)))
    if p < 1e-12:
        return p, None
    return p, block / p


def _part_coefficients(part: str) -> tuple[complex, complex]:
    """sigma_x-basis amplitudes of the re-prepared qubit before displacement.

    The imaginary pass uses the quarter rotation whose sign makes the readout
    equal +Im chi in this gauge.
    """
    if part == "real":
        q = np.array([1.0, 0.0], dtype=complex)
    elif part == "imag":
        q = np.array([1.0, 1j], dtype=complex) / np.sqrt(2.0)  # R_x(-pi/2)|down>
    else:
        raise ValueError(f"part must be 'real' or 'imag', got {part}")
    return (q[0] + q[1]) / np.sqrt(2.0), (q[0] - q[1]) / np.sqrt(2.0)


def _readout_pure(phi: np.ndarray, part: str, beta1: float, beta2: float,
                  n_meas: int) -> float:
    """<sigma_z> after the controlled displacements, on a padded Fock grid."""
    n = phi.shape[0]
    padded = np.zeros((n_meas, n_meas), dtype=complex)
    padded[:n, :n] = phi
    c_plus, c_minus = _part_coefficients(part)
    comp = {}
    for s, c in ((1.0, c_plus), (-1.0, c_minus)):
        branch = padded
        for mode, beta in ((1, beta1), (2, beta2)):
            if beta == 0.0:
                continue
            d = _cached_displacement(-1j * s * beta / 2.0, n_meas)
            branch = np.tensordot(d, branch, axes=(1, mode - 1))
            if mode == 2:
                branch = branch.T
        comp[s] = c * branch
    down = (comp[1.0] + comp[-1.0]) / np.sqrt(2.0)
    up = (comp[1.0] - comp[-1.0]) / np.sqrt(2.0)
    return float(np.sum(np.abs(down) ** 2) - np.sum(np.abs(up) ** 2))


def _readout_mixed(rho_m: np.ndarray, part: str, beta1: float, beta2: float) -> float:
    """Same readout for a motional density operator, via the trace formula."""
    n = rho_m.shape[0]
    d1 = _cached_block(1j * float(beta1), n)
    d2 = _cached_block(1j * float(beta2), n)
    overlap = complex(np.einsum("abcd,ca,db->", rho_m, d1, d2))
    c_plus, c_minus = _part_coefficients(part)
    return float(2.0 * np.real(np.conjugate(c_plus) * c_minus * overlap))


def _sample_mean(expectation: float, shots: int, spam: float, rng) -> float:
    p_up = float(np.clip((1.0 + expectation) / 2.0, 0.0, 1.0))
    p_rep = p_up * (1.0 - spam) + (1.0 - p_up) * spam
    hits = rng.binomial(shots, p_rep)
    return 2.0 * hits / shots - 1.0


def measure_char_point(state, beta1: float, beta2: float, part: str = "real",
                       branch: str = "down", shots: int | None = None,
                       spam: float = 0.0, rng=None,
                       n_meas: int | None = None) -> MeasureResult:
    """One reconstruction point through the full mid-circuit pulse sequence.

    Returns the infinite-shot expectation (SPAM-shrunk when spam > 0), a
    binomially sampled estimate when shots is given, and the branch
    probability seen at the mid-circuit measurement.
    """
    p, motional = _branch_motional(state, branch)
    if motional is None:
        raise ValueError(f"branch {branch!r} never post-selects (p = {p:.1e})")
    if isinstance(state, PureState):
        if n_meas is None:
            n_meas = _measurement_levels(state, max(abs(beta1), abs(beta2)))
        raw = _readout_pure(motional, part, beta1, beta2, n_meas)
    else:
        raw = _readout_mixed(motional, part, beta1, beta2)
    expectation = (1.0 - 2.0 * spam) * raw
    p_reported = p * (1.0 - spam) + (1.0 - p) * spam
    estimate = None
    if shots is not None:
        if rng is None:
            raise ValueError("shot sampling requires an rng")
        estimate = _sample_mean(raw, shots, spam, rng)
    return MeasureResult(expectation, estimate, p_reported if spam > 0 else p)


# ---------------------------------------------------------------------------
# grid runner


@dataclass
class CharGrid:
    """Sampled characteristic function over (beta1, beta2).

    one_mode grids hold a single beta1 = 0 row and probe mode 2 only.  shots
    is 0 where values are exact expectations.
    """

    beta1_axis: np.ndarray
    beta2_axis: np.ndarray
    values: np.ndarray
    p_down: np.ndarray
    p_up: np.ndarray
    shots: np.ndarray
    sampled_quadrant: bool = True
    one_mode: bool = False
    baseline_correction: float = 0.0

    def __post_init__(self):
        self.beta1_axis = np.asarray(self.beta1_axis, dtype=float)
        self.beta2_axis = np.asarray(self.beta2_axis, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        shape = (len(self.beta1_axis), len(self.beta2_axis))
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} != axes {shape}")
        for name in ("p_down", "p_up", "shots"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != shape:
                raise ValueError(f"{name} shape {arr.shape} != axes {shape}")
            setattr(self, name, arr)

    def validate(self, exact: bool | None = None) -> None:
        exact = bool(np.all(self.shots == 0)) if exact is None else exact
        sigma = 0.0 if exact else 1.0 / np.sqrt(max(1, int(self.shots.max())))
        if np.any(np.abs(self.values) > 1.0 + 3.0 * sigma + 1e-9):
            raise ValueError("characteristic function grossly exceeds unit modulus")
        if exact:
            if np.any(np.abs(self.p_down + self.p_up - 1.0) > 1e-9):
                raise ValueError("branch probabilities do not sum to 1")
        i0 = np.nonzero(self.beta1_axis == 0.0)[0]
        j0 = np.nonzero(self.beta2_axis == 0.0)[0]
        if i0.size and j0.size and self.baseline_correction == 0.0:
            origin = self.values[i0[0], j0[0]]
            if abs(origin - 1.0) > 3.0 * sigma + 1e-9:
                raise ValueError(f"chi(0,0) = {origin} deviates from 1")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["beta1", "beta2", "re", "im", "p_down", "p_up", "shots"])
            for i, b1 in enumerate(self.beta1_axis):
                for j, b2 in enumerate(self.beta2_axis):
                    v = self.values[i, j]
                    writer.writerow([
                        f"{b1:.14e}", f"{b2:.14e}",
                        f"{v.real:.14e}", f"{v.imag:.14e}",
                        f"{self.p_down[i, j]:.14e}", f"{self.p_up[i, j]:.14e}",
                        int(self.shots[i, j]),
                    ])

    @classmethod
    def from_csv(cls, path) -> "CharGrid":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            expected = ["beta1", "beta2", "re", "im", "p_down", "p_up", "shots"]
            if reader.fieldnames != expected:
                raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
            for row in reader:
                rows.append(row)
        b1 = np.array(sorted({float(r["beta1"]) for r in rows}))
        b2 = np.array(sorted({float(r["beta2"]) for r in rows}))
        shape = (len(b1), len(b2))
        if len(rows) != shape[0] * shape[1]:
            raise ValueError(f"{path}: {len(rows)} rows do not fill a {shape} grid")
        values = np.zeros(shape, dtype=complex)
        p_down = np.zeros(shape)
        p_up = np.zeros(shape)
        shots = np.zeros(shape, dtype=int)
        for r in rows:
            i = int(np.searchsorted(b1, float(r["beta1"])))
            j = int(np.searchsorted(b2, float(r["beta2"])))
            values[i, j] = float(r["re"]) + 1j * float(r["im"])
            p_down[i, j] = float(r["p_down"])
            p_up[i, j] = float(r["p_up"])
            shots[i, j] = int(r["shots"])
        one_mode = len(b1) == 1
        return cls(b1, b2, values, p_down, p_up, shots, one_mode=one_mode)


@dataclass
class ExperimentConfig:
    """Everything needed for one reconstruction run."""

    model: ModelParams = field(default_factory=ModelParams)
    hilbert: HilbertConfig = field(default_factory=HilbertConfig)
    noise: NoiseParams | None = None
    shots_per_point: int | None = None
    evolution_time: float = 0.0
    beta1_axis: np.ndarray | None = None
    beta2_axis: np.ndarray | None = None
    one_mode: bool = False
    measure_imaginary: bool = True
    branch: str = "both"
    randomize_order: bool = True
    rng_seed: int | None = None
    integrator: IntegratorConfig | None = None
    init_rabi: float = DEFAULT_INIT_RABI

    def __post_init__(self):
        if self.shots_per_point is not None:
            if self.shots_per_point < 1:
                raise ValueError("shots_per_point must be >= 1")
            if self.rng_seed is None:
                raise ValueError("shot-mode runs require rng_seed")
        if self.branch not in ("down", "up", "both"):
            raise ValueError(f"unknown branch {self.branch!r}")
        if self.beta1_axis is None:
            self.beta1_axis = (np.array([0.0]) if self.one_mode
                               else np.linspace(0.0, 4.0, 11))
        if self.beta2_axis is None:
            self.beta2_axis = (np.linspace(0.0, 5.0, 26) if self.one_mode
                               else np.linspace(0.0, 4.0, 11))
        self.beta1_axis = np.asarray(self.beta1_axis, dtype=float)
        self.beta2_axis = np.asarray(self.beta2_axis, dtype=float)
        if not (np.all(np.isfinite(self.beta1_axis))
                and np.all(np.isfinite(self.beta2_axis))):
            raise ValueError("beta axes must be finite")


def _evolved_state(cfg: ExperimentConfig):
    state = prepare(cfg.hilbert, cfg.noise)
    state = initialise(state, cfg.model, rabi=cfg.init_rabi, noise=cfg.noise)
    return evolve_jt(state, cfg.model, cfg.evolution_time, noise=cfg.noise,
                     integrator=cfg.integrator)


def run_reconstruction_experiment(cfg: ExperimentConfig,
                                  state=None) -> CharGrid:
    """Measure chi on the configured beta grid and assemble p_dn chi_dn + p_up chi_up.

    A pre-evolved state may be passed to reuse it across grids.  Point order
    can be randomized as in the experiment; per-point RNG streams are derived
    from (seed, point index) so results do not depend on execution order,
    which also makes the points safe to farm out to parallel workers.  The
    loop runs serially here: a point costs well under a millisecond, so
    process fan-out would only add pickling overhead.
    """
    if state is None:
        state = _evolved_state(cfg)
    branches = ("down", "up") if cfg.branch == "both" else (cfg.branch,)
    parts = ("real", "imag") if cfg.measure_imaginary else ("real",)
    spam = cfg.noise.spam_error if cfg.noise is not None else 0.0
    shots = cfg.shots_per_point

    pure = isinstance(state, PureState)
    beta_max = max(np.abs(cfg.beta1_axis).max(), np.abs(cfg.beta2_axis).max())
    n_meas = _measurement_levels(state, beta_max) if pure else None
    branch_states = {b: _branch_motional(state, b) for b in branches}

    shape = (len(cfg.beta1_axis), len(cfg.beta2_axis))
    values = np.zeros(shape, dtype=complex)
    p_down = np.zeros(shape)
    p_up = np.zeros(shape)
    shots_arr = np.zeros(shape, dtype=int)

    points = [(i, j) for i in range(shape[0]) for j in range(shape[1])]
    if cfg.randomize_order and shots is not None:
        order_rng = np.random.default_rng(cfg.rng_seed)
        order_rng.shuffle(points)

    for i, j in points:
        b1 = cfg.beta1_axis[i] if not cfg.one_mode else 0.0
        b2 = cfg.beta2_axis[j]
        rng = (np.random.default_rng((cfg.rng_seed, i * shape[1] + j))
               if shots is not None else None)
        chi = 0.0 + 0.0j
        probs = {}
        for b in branches:
            p, motional = branch_states[b]
            if motional is None:
                # branch never post-selects; it carries zero weight
                probs[b] = 0.0
                continue
            chi_b = 0.0 + 0.0j
            for part in parts:
                if pure:
                    raw = _readout_pure(motional, part, b1, b2, n_meas)
                else:
                    raw = _readout_mixed(motional, part, b1, b2)
                if shots is not None:
                    val = _sample_mean(raw, shots, spam, rng)
                else:
                    val = (1.0 - 2.0 * spam) * raw
                chi_b += val if part == "real" else 1j * val
            if shots is not None:
                # attempts until `shots` mid-circuit successes estimate p
                p_rep = p * (1.0 - spam) + (1.0 - p) * spam
                failures = rng.negative_binomial(shots, max(p_rep, 1e-9))
                probs[b] = shots / (shots + failures)
            else:
                probs[b] = p * (1.0 - spam) + (1.0 - p) * spam if spam > 0 else p
            chi += probs[b] * chi_b if cfg.branch == "both" else chi_b
        values[i, j] = chi
        down = probs.get("down", 1.0 - probs.get("up", 0.0))
        up = probs.get("up", 1.0 - probs.get("down", 0.0))
        p_down[i, j] = down
        p_up[i, j] = up
        shots_arr[i, j] = shots or 0

    grid = CharGrid(cfg.beta1_axis, cfg.beta2_axis, values, p_down, p_up,
                    shots_arr, one_mode=cfg.one_mode)
    if shots is None and cfg.noise is None and cfg.branch == "both":
        grid.validate(exact=True)
    return grid


# ---------------------------------------------------------------------------
# pulse-schedule simulation (lab-level path with global phase tracking)


@dataclass
class ScheduleResult:
    state: PureState
    branch_records: list[dict]
    final_time: float


def simulate_schedule(schedule, cfg: HilbertConfig,
                      mode_freq_offsets: tuple[float, float] = (0.0, 0.0),
                      center_line_offset: float = 0.0,
                      integrator: IntegratorConfig | None = None,
                      initial: PureState | None = None) -> ScheduleResult:
    """Integrate a compiled schedule with phases referenced to sequence start.

    mode_freq_offsets are (calibrated - true) mode frequencies: they add to
    every pulse's programmed motional detuning.  center_line_offset likewise
    shifts the qubit-frame detuning of every pulse.  Qubit rotations are
    instantaneous; SDF pulses integrate the full sideband Hamiltonian in
    global time, which is what makes the compiler's phase offsets load-bearing.
    """
    from .hamiltonians import SidebandParams
    from .pulsecompiler import IdlePulse, MidCircuitMeasure, QubitRotation, SdfPulse

    state = initial if initial is not None else basis_state(cfg)
    integrator = integrator or IntegratorConfig()
    records: list[dict] = []

    point_events = []
    intervals = []
    boundaries = {0.0}
    for pulse in schedule.pulses:
        if isinstance(pulse, (QubitRotation, MidCircuitMeasure)):
            point_events.append(pulse)
            boundaries.add(pulse.start_time)
        elif isinstance(pulse, SdfPulse):
            intervals.append(pulse)
            boundaries.add(pulse.start_time)
            boundaries.add(pulse.start_time + pulse.duration)
        elif isinstance(pulse, IdlePulse):
            # nothing evolves in this frame, only the clock advances
            boundaries.add(pulse.start_time + pulse.duration)
        else:
            raise TypeError(f"unknown pulse type {pulse!r}")
    times = sorted(boundaries)

    def active_terms(t_lo, t_hi):
        terms = []
        for p in intervals:
            if p.start_time < t_hi - 1e-15 and p.start_time + p.duration > t_lo + 1e-15:
                sb = SidebandParams(
                    center_line_detuning=center_line_offset,
                    motional_detuning=p.detuning + mode_freq_offsets[p.mode - 1],
                    rabi=p.rabi,
                    spin_phase=p.spin_phase,
                    motional_phase=p.motional_phase,
                )
                terms.extend(sideband_sdf_terms(sb, p.mode, cfg))
        return terms

    for t_lo, t_hi in zip(times[:-1], times[1:]):
        for ev in point_events:
            if abs(ev.start_time - t_lo) < 1e-15:
                state = _apply_point_event(state, ev, records)
        terms = active_terms(t_lo, t_hi)
        if terms and t_hi > t_lo:
            state = evolve_unitary(state, terms, t_lo, t_hi, integrator)
    for ev in point_events:
        if abs(ev.start_time - times[-1]) < 1e-15:
            state = _apply_point_event(state, ev, records)
    return ScheduleResult(state, records, times[-1])


def _apply_point_event(state: PureState, event, records: list[dict]) -> PureState:
    from .pulsecompiler import MidCircuitMeasure, QubitRotation

    if isinstance(event, QubitRotation):
        return apply_qubit_rotation(state, event.angle, event.axis_phase)
    if isinstance(event, MidCircuitMeasure):
        keep = 0 if event.keep == "down" else 1
        t = state.tensor
        p = float(np.sum(np.abs(t[keep]) ** 2))
        if p < 1e-12:
            raise ValueError("kept branch has vanishing probability")
        out = np.zeros_like(t)
        out[0] = t[keep] / np.sqrt(p)  # qubit collapses to |down> (no photon)
        records.append({"time": event.start_time, "p_keep": p, "keep": event.keep})
        return PureState(out.reshape(-1), state.cfg)
    raise TypeError(f"unknown point event {event!r}")
