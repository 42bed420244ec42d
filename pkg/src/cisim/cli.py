"""Command-line entry point: simulate, reconstruct, find-t, calibrate-demo, compare-gp.

Configuration comes from a key = value text file (# comments) with
command-line overrides.  Every run writes a manifest recording the content
hash of the resolved configuration, all parameter values, and the package
version, so identical inputs produce byte-identical outputs.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import IntegrationError, NoiseParams
from .fockspace import HilbertConfig, TruncationOverflowError
from .hamiltonians import ModelParams

__all__ = ["main", "ConfigError"]


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "kappa_hz": "1000.0",
    "omega_hz": "667.0",
    "n_max": "24",
    "noise": "off",
    "shots": "exact",
    "seed": "",
    "times": "0,0.9T,T,2T",
    "t_interference": "",      # seconds; computed when empty and needed
    "mode": "2d",              # reconstruct: 2d or 1d
    "q_points": "81",
    "q_extent": "4.0",
    "window_lo": "",           # find-t window, seconds
    "window_hi": "",
    "injected_offset_hz": "100.0",   # calibrate-demo
    "scan_span_hz": "400.0",
    "scan_points": "17",
    "calib_shots": "500",
    "out": "out",
}


def parse_config_file(path: str) -> dict:
    cfg = {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    for lineno, line in enumerate(p.read_text().splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in stripped.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        cfg[key] = value
    return cfg


def resolve_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(parse_config_file(args.config))
    for key, attr in (("out", "out"), ("seed", "seed"), ("shots", "shots"),
                      ("noise", "noise"), ("times", "times")):
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = str(value)
    return cfg


def _positive_float(cfg, key) -> float:
    try:
        value = float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number, got {cfg[key]!r}") from exc
    if value <= 0:
        raise ConfigError(f"{key} must be positive, got {value}")
    return value


def _build_physics(cfg):
    kappa = _positive_float(cfg, "kappa_hz")
    omega = _positive_float(cfg, "omega_hz")
    model = ModelParams(kappa=2 * np.pi * kappa, omega=2 * np.pi * omega)
    try:
        n_max = int(cfg["n_max"])
        hilbert = HilbertConfig(n_max=n_max)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["noise"] not in ("on", "off"):
        raise ConfigError(f"noise must be on or off, got {cfg['noise']!r}")
    noise = NoiseParams() if cfg["noise"] == "on" else None
    if cfg["shots"] == "exact":
        shots = None
    else:
        try:
            shots = int(cfg["shots"])
        except ValueError as exc:
            raise ConfigError(f"shots must be an integer or 'exact'") from exc
        if shots < 1:
            raise ConfigError("shots must be >= 1")
    seed = None
    if cfg["seed"] != "":
        try:
            seed = int(cfg["seed"])
        except ValueError as exc:
            raise ConfigError(f"seed must be an integer, got {cfg['seed']!r}") from exc
    if shots is not None and seed is None:
        raise ConfigError("shot-mode runs require a seed")
    return model, hilbert, noise, shots, seed


def _interference_time(cfg, model, hilbert) -> float:
    from .tomography import find_interference_time

    if cfg["t_interference"] != "":
        return _positive_float(cfg, "t_interference")
    return find_interference_time(model, hilbert=hilbert)


def _parse_times(cfg, model, hilbert) -> tuple[list[float], float | None]:
    tokens = [tok.strip() for tok in cfg["times"].split(",") if tok.strip()]
    if not tokens:
        raise ConfigError("times list is empty")
    t_ref = None
    times = []
    for tok in tokens:
        if tok.endswith("T"):
            if t_ref is None:
                t_ref = _interference_time(cfg, model, hilbert)
            prefix = tok[:-1]
            factor = 1.0 if prefix == "" else float(prefix)
            times.append(factor * t_ref)
        else:
            try:
                times.append(float(tok))
            except ValueError as exc:
                raise ConfigError(f"bad time token {tok!r}") from exc
    if any(t < 0 for t in times):
        raise ConfigError("times must be >= 0")
    return times, t_ref


def _q_axis(cfg) -> np.ndarray:
    pts = int(cfg["q_points"])
    ext = _positive_float(cfg, "q_extent")
    if pts < 2:
        raise ConfigError("q_points must be >= 2")
    return np.linspace(-ext, ext, pts)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write_manifest(outdir: Path, command: str, cfg: dict, outputs: list[Path],
                    results: dict) -> None:
    # the output directory is not part of the run's physics configuration
    params = {k: cfg[k] for k in sorted(cfg) if k != "out"}
    manifest = {
        "command": command,
        "version": __version__,
        "config_sha256": _sha256(
            "\n".join(f"{k} = {v}" for k, v in params.items()).encode()
        ),
        "parameters": params,
        "outputs": [
            {"path": p.name, "sha256": _sha256(p.read_bytes())} for p in outputs
        ],
        "results": results,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                     sort_keys=True) + "\n")


def cmd_simulate(args) -> int:
    from . import protocol
    from .tomography import state_density, state_density_q2

    cfg = resolve_config(args)
    model, hilbert, noise, _, _ = _build_physics(cfg)
    times, t_ref = _parse_times(cfg, model, hilbert)
    q = _q_axis(cfg)
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)

    state0 = protocol.initialise(protocol.prepare(hilbert, noise), model,
                                 noise=noise)
    outputs = []
    results = {"times_s": times}
    if t_ref is not None:
        results["t_interference_s"] = t_ref
    for idx, t in enumerate(times):
        evolved = protocol.evolve_jt(state0, model, t, noise=noise)
        d2 = state_density(evolved, q, q)
        d1 = state_density_q2(evolved, q)
        p2 = outdir / f"density2d_{idx:02d}.csv"
        p1 = outdir / f"density1d_{idx:02d}.csv"
        d2.to_csv(p2)
        d1.to_csv(p1)
        outputs += [p2, p1]
    _write_manifest(outdir, "simulate", cfg, outputs, results)
    print(f"simulate: wrote {len(outputs)} density files to {outdir}")
    return 0


def cmd_reconstruct(args) -> int:
    from . import protocol
    from .protocol import ExperimentConfig, run_reconstruction_experiment
    from .tomography import baseline_correct, density_1d, density_2d, extend_hermitian

    cfg = resolve_config(args)
    model, hilbert, noise, shots, seed = _build_physics(cfg)
    times, t_ref = _parse_times(cfg, model, hilbert)
    if cfg["mode"] not in ("1d", "2d"):
        raise ConfigError(f"mode must be 1d or 2d, got {cfg['mode']!r}")
    one_mode = cfg["mode"] == "1d"
    q = _q_axis(cfg)
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)

    outputs = []
    results = {"times_s": times, "points": []}
    if t_ref is not None:
        results["t_interference_s"] = t_ref
    for idx, t in enumerate(times):
        ec = ExperimentConfig(
            model=model, hilbert=hilbert, noise=noise, shots_per_point=shots,
            evolution_time=t, one_mode=one_mode,
            measure_imaginary=not one_mode, rng_seed=seed,
        )
        grid = run_reconstruction_experiment(ec)
        raw_path = outdir / f"char_{cfg['mode']}_{idx:02d}.csv"
        grid.to_csv(raw_path)
        outputs.append(raw_path)
        corrected = baseline_correct(grid)
        extended = extend_hermitian(corrected)
        if one_mode:
            dens = density_1d(extended, q)
        else:
            dens = density_2d(extended, q, q)
        dens_path = outdir / f"density_{cfg['mode']}_{idx:02d}.csv"
        dens.to_csv(dens_path)
        outputs.append(dens_path)
        results["points"].append({
            "t_s": t,
            "baseline_correction": corrected.baseline_correction,
            "p_down_mean": float(np.mean(grid.p_down)),
            "p_up_mean": float(np.mean(grid.p_up)),
            "imag_residue": dens.imag_residue,
        })
    _write_manifest(outdir, "reconstruct", cfg, outputs, results)
    print(f"reconstruct: wrote {len(outputs)} files to {outdir}")
    return 0


def cmd_find_t(args) -> int:
    from .tomography import find_interference_time

    cfg = resolve_config(args)
    model, hilbert, _, _, _ = _build_physics(cfg)
    window = None
    if cfg["window_lo"] != "" or cfg["window_hi"] != "":
        if cfg["window_lo"] == "" or cfg["window_hi"] == "":
            raise ConfigError("window_lo and window_hi must be given together")
        window = (_positive_float(cfg, "window_lo"), _positive_float(cfg, "window_hi"))
        if window[0] >= window[1]:
            raise ConfigError("window_lo must be below window_hi")
    t_ref = find_interference_time(model, window=window, hilbert=hilbert)
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    _write_manifest(outdir, "find-t", cfg, [], {"t_interference_s": t_ref})
    print(f"find-t: T = {t_ref * 1e3:.4f} ms")
    return 0


def cmd_calibrate_demo(args) -> int:
    from .pulsecompiler import calibrate_mode_frequency

    cfg = resolve_config(args)
    _build_physics(cfg)  # validates shared keys
    offset = 2 * np.pi * float(cfg["injected_offset_hz"])
    span = 2 * np.pi * _positive_float(cfg, "scan_span_hz")
    points = int(cfg["scan_points"])
    shots = int(cfg["calib_shots"])
    seed = int(cfg["seed"]) if cfg["seed"] != "" else 0
    scan = np.linspace(-span, span, points)
    result = calibrate_mode_frequency(offset, scan, shots=shots, rng_seed=seed)
    err_hz = (result.estimate - offset) / (2 * np.pi)

    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    scan_path = outdir / "calibration_scan.csv"
    with open(scan_path, "w") as fh:
        fh.write("offset_hz,p_up\n")
        for f, p in zip(result.scan, result.populations):
            fh.write(f"{f / (2 * np.pi):.14e},{p:.14e}\n")
    _write_manifest(outdir, "calibrate-demo", cfg, [scan_path], {
        "injected_offset_hz": offset / (2 * np.pi),
        "estimate_hz": result.estimate / (2 * np.pi),
        "error_hz": err_hz,
    })
    print(f"calibrate-demo: injected {offset / (2 * np.pi):.1f} Hz, "
          f"recovered {result.estimate / (2 * np.pi):.1f} Hz "
          f"(error {err_hz:+.1f} Hz)")
    return 0


def cmd_compare_gp(args) -> int:
    from .adiabatic import compare_gp_vs_nogp

    cfg = resolve_config(args)
    model, hilbert, _, _, _ = _build_physics(cfg)
    t_ref = _interference_time(cfg, model, hilbert)
    q = _q_axis(cfg)
    comparison = compare_gp_vs_nogp(model, t_ref, hilbert=hilbert, q_axis=q)
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    p_full = outdir / "density_full.csv"
    p_oracle = outdir / "density_no_gp.csv"
    comparison.full_density.to_csv(p_full)
    comparison.oracle_density.to_csv(p_oracle)
    _write_manifest(outdir, "compare-gp", cfg, [p_full, p_oracle], {
        "t_interference_s": t_ref,
        "contrast_full": comparison.contrast_full,
        "contrast_no_gp": comparison.contrast_oracle,
        "contrast_gap": comparison.contrast_gap,
    })
    print(f"compare-gp: node contrast {comparison.contrast_full:.3f} (full) vs "
          f"{comparison.contrast_oracle:.3f} (no geometric phase), "
          f"gap {comparison.contrast_gap:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cisim",
        description="Trapped-ion conical-intersection simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "simulate": cmd_simulate,
        "reconstruct": cmd_reconstruct,
        "find-t": cmd_find_t,
        "calibrate-demo": cmd_calibrate_demo,
        "compare-gp": cmd_compare_gp,
    }
    for name, fn in commands.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="key = value config file")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", default=None, help="RNG seed")
        sp.add_argument("--shots", default=None, help="shots per point or 'exact'")
        sp.add_argument("--noise", default=None, choices=["on", "off"])
        sp.add_argument("--times", default=None,
                        help="comma list of seconds or multiples of T, e.g. 0,0.9T,T,2T")
        sp.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    from .pulsecompiler import CalibrationError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (IntegrationError, TruncationOverflowError, CalibrationError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
