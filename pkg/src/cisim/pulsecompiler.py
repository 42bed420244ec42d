"""Compile abstract circuit stages into phase-coherent pulse schedules.

All pulse phases are referenced to the start of the sequence.  The compiler
enforces the center-line rule (every pulse symmetric about the calibrated
qubit frequency) and the motional rule (sideband splitting centred on the
calibrated mode frequency), and inserts the two load-bearing motional phase
offsets: tau1 * delta on the initialisation force and (t + tau1) * delta on
the reconstruction forces, where delta is the evolution detuning.

Also contains the mode-frequency drift model and the two-pulse calibration
routine used to recover a drifted mode frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fockspace import HilbertConfig
from .hamiltonians import ModelParams

__all__ = [
    "QubitRotation",
    "SdfPulse",
    "MidCircuitMeasure",
    "IdlePulse",
    "Schedule",
    "Calibration",
    "DriftModel",
    "CalibrationResult",
    "CalibrationError",
    "compile_circuit",
    "displacement_calibration",
    "simulate_drift",
    "allan_deviation",
    "calibrate_mode_frequency",
    "schedule_to_text",
]


class CalibrationError(RuntimeError):
    """Scan did not bracket a usable minimum."""


@dataclass(frozen=True)
class QubitRotation:
    angle: float
    axis_phase: float = 0.0
    start_time: float = 0.0
    duration: float = 0.0  # carrier pulses idealized as instantaneous


@dataclass(frozen=True)
class SdfPulse:
    mode: int
    spin_phase: float
    motional_phase: float
    rabi: float
    detuning: float
    duration: float
    start_time: float = 0.0
    simultaneous_group: int | None = None


@dataclass(frozen=True)
class MidCircuitMeasure:
    keep: str = "down"
    start_time: float = 0.0
    duration: float = 0.0


@dataclass(frozen=True)
class IdlePulse:
    duration: float
    start_time: float = 0.0


@dataclass
class Schedule:
    pulses: list
    stage_times: dict = field(default_factory=dict)

    def duration(self) -> float:
        end = 0.0
        for p in self.pulses:
            end = max(end, p.start_time + getattr(p, "duration", 0.0))
        return end

    def validate(self) -> None:
        """Durations nonnegative; finite pulses overlap only within a flagged
        simultaneous group."""
        spans = []
        for p in self.pulses:
            if getattr(p, "duration", 0.0) < 0:
                raise ValueError(f"negative duration on {p!r}")
            if isinstance(p, SdfPulse) and p.duration > 0:
                spans.append(p)
        for i, a in enumerate(spans):
            for b in spans[i + 1 :]:
                overlap = (a.start_time < b.start_time + b.duration - 1e-15
                           and b.start_time < a.start_time + a.duration - 1e-15)
                if overlap and (a.simultaneous_group is None
                                or a.simultaneous_group != b.simultaneous_group):
                    raise ValueError(
                        f"overlapping pulses outside a simultaneous group: "
                        f"{a!r} and {b!r}")


@dataclass(frozen=True)
class Calibration:
    """Measured reference frequencies and sideband Rabi rates (rad/s).

    qubit_freq is a frame label only; the compiler works in the interaction
    picture relative to it and never forms absolute optical frequencies.
    """

    qubit_freq: float = 0.0
    mode_freq_1: float = 2 * np.pi * 1.34e6
    mode_freq_2: float = 2 * np.pi * 1.47e6
    rabi_init: float = 2 * np.pi * 2.23e3
    rabi_evolve: float = 2 * np.pi * 1.42e3   # sqrt(2) kappa
    rabi_probe: float = 2 * np.pi * 2.31e3

    def __post_init__(self):
        if self.mode_freq_1 <= 0 or self.mode_freq_2 <= 0:
            raise ValueError("mode frequencies must be positive")


@dataclass(frozen=True)
class DriftModel:
    """Gaussian random-walk model of mode-frequency drift.

    allan_dev_at_interval is the target Allan deviation (rad/s) at
    allan_interval seconds; recal_interval is how often the experiment
    recalibrates.
    """

    allan_dev_at_interval: float = 2 * np.pi * 26.0
    allan_interval: float = 360.0
    recal_interval: float = 360.0
    rng_seed: int = 0
    common_mode: bool = True
    sample_dt: float = 10.0

    def __post_init__(self):
        if self.allan_dev_at_interval < 0:
            raise ValueError("allan_dev_at_interval must be >= 0")


def _wrap_phase(phi: float) -> float:
    return float(np.mod(phi, 2 * np.pi))


def displacement_calibration(alpha_target: complex, rabi: float) -> float:
    """Pulse duration realizing |alpha_target| at a resonant force: tau = 2|alpha|/rabi."""
    if rabi <= 0:
        raise ValueError("rabi must be positive")
    return 2.0 * abs(alpha_target) / rabi


def compile_circuit(circuit, cal: Calibration, model: ModelParams,
                    corrections: bool = True) -> Schedule:
    """Compile a stage list into a timed, phase-tracked pulse schedule.

    Stages (a prefix of this order): ("prepare",), ("initialise",),
    ("evolve", t), ("reconstruct", beta1, beta2, part, branch).  Compilation
    is deterministic; motional phases are reported modulo 2 pi.

    With corrections=False the tau1*delta and (t + tau1)*delta offsets are
    dropped, which reproduces the phase lag an uncorrected sequence acquires.
    """
    allowed = ("prepare", "initialise", "evolve", "reconstruct")
    names = [stage[0] for stage in circuit]
    if names != list(allowed[: len(names)]):
        raise ValueError(
            f"circuit stages must be a prefix of {allowed}, got {names}"
        )

    delta = model.omega  # evolution-force detuning responsible for phase lag
    alpha0 = model.ratio / np.sqrt(2.0)
    tau1 = displacement_calibration(alpha0, cal.rabi_init)

    pulses: list = []
    stage_times: dict = {}
    now = 0.0
    t_evolve = 0.0
    for stage in circuit:
        kind = stage[0]
        stage_times[kind] = now
        if kind == "prepare":
            continue  # optical pumping and cooling produce the fiducial state
        if kind == "initialise":
            pulses.append(QubitRotation(np.pi / 2, 0.0, start_time=now))
            phi_m = np.pi / 2 + (tau1 * delta if corrections else 0.0)
            pulses.append(SdfPulse(mode=1, spin_phase=np.pi / 2,
                                   motional_phase=_wrap_phase(phi_m),
                                   rabi=cal.rabi_init, detuning=0.0,
                                   duration=tau1, start_time=now))
            now += tau1
            pulses.append(QubitRotation(-np.pi / 2, 0.0, start_time=now))
        elif kind == "evolve":
            t_evolve = float(stage[1])
            # R_x(-pi/2) ... R_x(+pi/2) conjugates the sigma_y force on mode 1
            # into the +sigma_z basis while leaving the sigma_x force alone
            pulses.append(QubitRotation(-np.pi / 2, 0.0, start_time=now))
            for mode, phi_s in ((1, np.pi / 2), (2, 0.0)):
                pulses.append(SdfPulse(mode=mode, spin_phase=phi_s,
                                       motional_phase=0.0,
                                       rabi=cal.rabi_evolve, detuning=delta,
                                       duration=t_evolve, start_time=now,
                                       simultaneous_group=1))
            now += t_evolve
            pulses.append(QubitRotation(np.pi / 2, 0.0, start_time=now))
        elif kind == "reconstruct":
            beta1, beta2, part, branch = stage[1:]
            if branch == "up":
                pulses.append(QubitRotation(np.pi, 0.0, start_time=now))
            pulses.append(MidCircuitMeasure(keep="down", start_time=now))
            if part == "imag":
                pulses.append(QubitRotation(-np.pi / 2, 0.0, start_time=now))
            elif part != "real":
                raise ValueError(f"unknown part {part!r}")
            offset = (t_evolve + tau1) * delta if corrections else 0.0
            for mode, beta in ((1, beta1), (2, beta2)):
                if beta == 0.0:
                    continue
                tau = beta / cal.rabi_probe
                pulses.append(SdfPulse(mode=mode, spin_phase=0.0,
                                       motional_phase=_wrap_phase(offset),
                                       rabi=cal.rabi_probe, detuning=0.0,
                                       duration=tau, start_time=now))
                now += tau
    schedule = Schedule(pulses, stage_times)
    schedule.validate()
    return schedule


# ---------------------------------------------------------------------------
# drift model


def simulate_drift(dm: DriftModel, horizon: float):
    """Random-walk mode-frequency offsets sampled every dm.sample_dt seconds.

    Returns (times, offsets_mode1, offsets_mode2).  The walk's diffusion is
    set so the Allan deviation at dm.allan_interval matches
    dm.allan_dev_at_interval; with common_mode=True mode 2 follows mode 1 up
    to a small independent walk.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng(dm.rng_seed)
    steps = int(np.ceil(horizon / dm.sample_dt)) + 1
    times = np.arange(steps) * dm.sample_dt
    # random-walk frequency noise: allan variance = D tau / 3
    diffusion = 3.0 * dm.allan_dev_at_interval**2 / dm.allan_interval
    step_sigma = np.sqrt(diffusion * dm.sample_dt)
    walk1 = np.concatenate([[0.0], np.cumsum(rng.normal(0.0, step_sigma, steps - 1))])
    if dm.common_mode:
        extra = np.concatenate(
            [[0.0], np.cumsum(rng.normal(0.0, 0.2 * step_sigma, steps - 1))]
        )
        walk2 = walk1 + extra
    else:
        walk2 = np.concatenate(
            [[0.0], np.cumsum(rng.normal(0.0, step_sigma, steps - 1))]
        )
    return times, walk1, walk2


def allan_deviation(series: np.ndarray, dt: float, tau: float) -> float:
    """Overlapping Allan deviation of a sampled series at averaging time tau."""
    m = int(round(tau / dt))
    if m < 1 or len(series) < 2 * m + 1:
        raise ValueError("series too short for requested tau")
    means = np.convolve(series, np.ones(m) / m, mode="valid")
    diffs = means[m:] - means[:-m]
    return float(np.sqrt(0.5 * np.mean(diffs**2)))


# ---------------------------------------------------------------------------
# mode-frequency calibration


@dataclass
class CalibrationResult:
    estimate: float
    scan: np.ndarray
    populations: np.ndarray


def calibrate_mode_frequency(true_freq: float, scan, shots: int = 500,
                             rabi: float = 2 * np.pi * 2.23e3,
                             tau: float = 250e-6,
                             rng_seed: int | None = 0,
                             n_max: int = 16) -> CalibrationResult:
    """Recover a mode frequency from the two-pulse phase-flip sequence.

    At each scanned frequency two equal forces with a pi motional phase shift
    are applied to the ground state; on resonance the second undoes the first
    and no up population remains.  A parabola through the scan minimum gives
    the estimate.  With shots set, populations are binomially sampled.
    """
    from . import protocol

    scan = np.asarray(scan, dtype=float)
    if not (scan.min() <= true_freq <= scan.max()):
        raise CalibrationError("scan range does not bracket the true frequency")
    cfg = HilbertConfig(n_max=n_max)
    rng = np.random.default_rng(rng_seed) if shots else None

    pops = np.empty(len(scan))
    for k, freq in enumerate(scan):
        sched = Schedule([
            SdfPulse(mode=1, spin_phase=0.0, motional_phase=0.0, rabi=rabi,
                     detuning=0.0, duration=tau, start_time=0.0),
            SdfPulse(mode=1, spin_phase=0.0, motional_phase=np.pi, rabi=rabi,
                     detuning=0.0, duration=tau, start_time=tau),
        ])
        res = protocol.simulate_schedule(
            sched, cfg, mode_freq_offsets=(freq - true_freq, 0.0))
        p_up = float(res.state.qubit_populations()[1])
        if shots:
            pops[k] = rng.binomial(shots, min(max(p_up, 0.0), 1.0)) / shots
        else:
            pops[k] = p_up

    imin = int(np.argmin(pops))
    if imin == 0 or imin == len(scan) - 1:
        raise CalibrationError("population minimum sits at the scan edge")
    lo = max(0, imin - 2)
    hi = min(len(scan), imin + 3)
    coeffs = np.polyfit(scan[lo:hi], pops[lo:hi], 2)
    if coeffs[0] <= 0:
        raise CalibrationError("fit did not produce an upward parabola")
    estimate = -coeffs[1] / (2 * coeffs[0])
    return CalibrationResult(float(estimate), scan, pops)


# ---------------------------------------------------------------------------
# serialization


def schedule_to_text(schedule: Schedule) -> str:
    """One pulse per line: kind, start_time_s, duration_s, phases_rad, rabi, detuning.

    The phases field joins spin and motional phase with a semicolon for
    forces, and carries axis_phase;angle for rotations.
    """
    lines = []
    for p in sorted(schedule.pulses, key=lambda q: (q.start_time, repr(q))):
        if isinstance(p, SdfPulse):
            kind = f"sdf{p.mode}"
            phases = f"{_wrap_phase(p.spin_phase):.12f};{_wrap_phase(p.motional_phase):.12f}"
            fields = [kind, f"{p.start_time:.9e}", f"{p.duration:.9e}",
                      phases, f"{p.rabi:.6e}", f"{p.detuning:.6e}"]
        elif isinstance(p, QubitRotation):
            phases = f"{_wrap_phase(p.axis_phase):.12f};{p.angle:.12f}"
            fields = ["rotation", f"{p.start_time:.9e}", "0", phases, "0", "0"]
        elif isinstance(p, MidCircuitMeasure):
            fields = [f"measure:{p.keep}", f"{p.start_time:.9e}", "0", "-", "0", "0"]
        elif isinstance(p, IdlePulse):
            fields = ["idle", f"{p.start_time:.9e}", f"{p.duration:.9e}", "-", "0", "0"]
        else:
            raise TypeError(f"unknown pulse {p!r}")
        lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"
