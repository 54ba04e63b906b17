"""``zeno-opt`` command line: sweeps, figure presets, flip time and a bath self-test.

Every sweep writes a CSV and a ``.manifest`` beside it. Both files are staged
under temporary names and only moved into place once the whole sweep has
succeeded, so a failed run leaves nothing behind.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import math
import os
import sys
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import bath as bathlib
from . import dynamics, measurement
from .config import PRESETS, ConfigError, ExperimentConfig, parse_config, preset_config
from .dynamics import ModelKind, redfield_integrate
from .measurement import (
    DecaySweep,
    FlipTimeNotFound,
    dephasing_survival_opt,
    dephasing_survival_unopt,
    flip_time,
    survival_after_N,
    sweep,
    transition_candidates,
)
from .quantum import STRUCT_TOL, projector

CSV_HEADER = "tau,s_unopt,s_opt,gamma_unopt,gamma_opt,theta_opt,phi_opt"
CSV_COLUMNS = ("tau", "s_unopt", "s_opt", "gamma_unopt", "gamma_opt", "opt_theta", "opt_phi")
BATH_CHECK_TIMES = (0.01, 0.1, 1.0, 10.0)
BATH_CHECK_TOL = 1e-6

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class NumericalFailure(RuntimeError):
    pass


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.12g}"


def format_csv(result: DecaySweep) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for o in result.outcomes:
        buf.write(",".join(_fmt(float(getattr(o, c))) for c in CSV_COLUMNS) + "\n")
    return buf.getvalue()


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(CSV_HEADER.split(","))}


def _atomic_write(files: dict[Path, str]) -> None:
    staged = []
    try:
        for path, text in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def manifest_path(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.name + ".manifest")


def dephasing_gain(cfg: ExperimentConfig, tau: float = 1.0, N: int = 3) -> float:
    """``s_opt^N - s_unopt^N`` of the exact qubit dephasing solution at ``tau``."""
    g = bathlib.gamma(cfg.model_spec().bath, tau)
    n0 = cfg.initial.bloch
    s_opt = dephasing_survival_opt(n0, g)
    s_unopt = dephasing_survival_unopt(n0, g)
    return survival_after_N(s_opt, N) - survival_after_N(s_unopt, N)


def _tolerances() -> list[tuple[str, str]]:
    return [
        ("struct_tol", repr(STRUCT_TOL)),
        ("trace_tol", repr(dynamics.TRACE_TOL)),
        ("positivity_tol", repr(dynamics.POSITIVITY_TOL)),
        ("dominance_tol", repr(measurement.DOMINANCE_TOL)),
        ("quad_epsrel", repr(bathlib.QUAD_EPSREL)),
        ("quad_retry_epsrel", repr(bathlib.QUAD_RETRY_EPSREL)),
        ("step_rule", f"dt * fastest_frequency < {dynamics.STEP_RULE!r}"),
    ]


def run_sweep(cfg: ExperimentConfig, csv_path=None, preset: str | None = None) -> tuple[Path, Path]:
    """Run the sweep described by ``cfg`` and write the CSV plus its manifest.

    Returns the two paths. Raises ``NumericalFailure`` when any module fails;
    in that case no file is written.
    """
    csv_path = Path(csv_path or cfg.output or "sweep.csv")
    model = cfg.model_spec()
    start = time.perf_counter()
    extra: list[tuple[str, str]] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", bathlib.QuadratureRetryWarning)
        try:
            result = sweep(model, cfg.initial, cfg.taus, cfg.choice(), dt=cfg.dt, method=cfg.method)
            if model.kind is ModelKind.POPULATION_DECAY:
                try:
                    extra.append(("flip_time", repr(flip_time(model, result.trajectory))))
                except FlipTimeNotFound as exc:
                    extra.append(("flip_time", f"not found (final n_z = {exc.final_nz:.6g})"))
            if model.kind is ModelKind.PURE_DEPHASING:
                extra.append(("gain_N3_tau1", repr(float(dephasing_gain(cfg)))))
        except (ValueError, RuntimeError, ArithmeticError) as exc:
            raise NumericalFailure(str(exc)) from exc
    elapsed = time.perf_counter() - start

    notes = list(result.warnings)
    notes += [str(w.message) for w in caught if issubclass(w.category, UserWarning)]
    taus = result.column("tau")
    cands = transition_candidates(taus, result.column("gamma_opt"))
    extra.append(
        ("transition_candidates_opt", "; ".join(f"{t:.6g} {lab}" for t, lab in cands) or "none")
    )
    cands = transition_candidates(taus, result.column("gamma_unopt"))
    extra.append(
        ("transition_candidates_unopt", "; ".join(f"{t:.6g} {lab}" for t, lab in cands) or "none")
    )

    csv_text = format_csv(result)
    lines = [("code_version", __version__)]
    if preset:
        lines.append(("preset", preset))
    lines += [(f"config.{k}", v) for k, v in cfg.echo() if k != "output"]
    lines += [
        ("csv", csv_path.name),
        ("csv_sha256", hashlib.sha256(csv_text.encode()).hexdigest()),
        ("wall_time_s", f"{elapsed:.3f}"),
    ]
    lines += [(f"tolerance.{k}", v) for k, v in _tolerances()]
    lines += extra
    lines.append(("warnings", str(len(notes))))
    lines += [(f"warning.{i + 1}", n.replace("\n", " ")) for i, n in enumerate(notes)]
    manifest = "".join(f"{k} = {v}\n" for k, v in lines)

    man_path = manifest_path(csv_path)
    _atomic_write({csv_path: csv_text, man_path: manifest})
    return csv_path, man_path


def read_manifest(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out


def run_preset(name: str, out_dir=".") -> tuple[Path, Path]:
    cfg = preset_config(name)
    return run_sweep(cfg, Path(out_dir) / f"{name}.csv", preset=name)


def config_flip_time(cfg: ExperimentConfig) -> float:
    model = cfg.model_spec()
    if model.kind is not ModelKind.POPULATION_DECAY:
        raise ConfigError("model", "flip-time needs model = population_decay")
    rho0 = projector(cfg.initial.vector(model.J))
    try:
        traj = redfield_integrate(model, rho0, cfg.tau_max, cfg.dt)
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        raise NumericalFailure(str(exc)) from exc
    return flip_time(model, traj)


def bath_check(cfg: ExperimentConfig, times=BATH_CHECK_TIMES) -> list[tuple[float, str, float, float, float]]:
    """Quadrature against the Ohmic zero-temperature closed forms.

    Returns rows ``(t, quantity, quadrature, closed_form, rel_error)``. The
    closed forms hold at ``beta -> inf``, so use a large ``beta``.
    """
    if cfg.s_ohmic != 1:
        raise ConfigError("s_ohmic", "bath-check compares against closed forms valid for s_ohmic = 1 only")
    b = cfg.model_spec().bath
    rows = []
    for t in times:
        ref = bathlib.ohmic_closed_forms(b.spectral, t)
        got = (bathlib.gamma(b, t), bathlib.delta_phase(b.spectral, t), bathlib.correlation(b, t))
        for name, x, y in zip(("gamma", "delta", "C"), got, ref):
            err = abs(x - y) / abs(y) if y != 0 else abs(x - y)
            rows.append((t, name, x, y, err))
    return rows


# ---------------------------------------------------------------------------

def _load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def _cmd_sweep(args):
    cfg = _load(args.config)
    out = args.out or cfg.output or Path(args.config).with_suffix(".csv")
    csv_path, man = run_sweep(cfg, out)
    print(f"wrote {csv_path} and {man}")


def _cmd_preset(args):
    if args.name == "list":
        print("\n".join(PRESETS))
        return
    csv_path, man = run_preset(args.name, args.out)
    print(f"wrote {csv_path} and {man}")


def _cmd_flip(args):
    cfg = _load(args.config)
    try:
        tau = config_flip_time(cfg)
    except FlipTimeNotFound as exc:
        print(f"no flip up to tau_max = {cfg.tau_max}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"flip_time = {tau:.6f}")


def _cmd_bath(args):
    cfg = _load(args.config)
    rows = bath_check(cfg)
    print(f"{'t':>8} {'quantity':>8} {'quadrature':>22} {'closed form':>22} {'rel err':>10}")
    for t, name, x, y, err in rows:
        print(f"{t:8g} {name:>8} {str(np.round(x, 14)):>22} {str(np.round(y, 14)):>22} {err:10.2e}")
    worst = max(r[4] for r in rows)
    print(f"max relative error {worst:.3e} (limit {BATH_CHECK_TOL:g})")
    return EXIT_OK if worst < BATH_CHECK_TOL else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zeno-opt", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run a sweep from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="CSV path (default: config 'output' or <config>.csv)")
    s.set_defaults(func=_cmd_sweep)

    s = sub.add_parser("preset", help="reproduce a figure preset ('list' to show names)")
    s.add_argument("name", choices=[*PRESETS, "list"])
    s.add_argument("--out", default=".", help="output directory")
    s.set_defaults(func=_cmd_preset)

    s = sub.add_parser("flip-time", help="population-decay flip time")
    s.add_argument("--config", required=True)
    s.set_defaults(func=_cmd_flip)

    s = sub.add_parser("bath-check", help="quadrature vs Ohmic closed forms")
    s.add_argument("--config", required=True)
    s.set_defaults(func=_cmd_bath)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, FlipTimeNotFound, bathlib.QuadratureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
