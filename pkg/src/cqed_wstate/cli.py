"""Command-line entry point: figure data, single runs, sweeps and robustness scans.

Every command writes into one output directory. Exit codes: 0 success,
2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .analysis import Axis, SweepSpec, decoherence_map, robustness_scan, sweep
from .dynamics import DEFAULT_STEPS, IntegrationError, TimeGrid
from .hamiltonians import EigenvalueCrossingError
from .protocols import (
    DEFAULTS,
    SWEEPABLE,
    job_params,
    run_adiabatic,
    run_job,
)
from .pulses import PulseSignError, StirapParams, shortcut_nu, stirap_schedule

log = logging.getLogger("cqed_wstate")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

FIGURES = {
    "fig2": "STIRAP pulse shapes Omega_1/Omega_0 and Omega_s/Omega_0 versus t/t_f",
    "fig3": "adiabatic fidelity map over Omega_0 in [0.2, 2] and t_f in [10, 100]",
    "fig4a": "adiabatic populations, Omega_0 = 1, t_f = 40",
    "fig4b": "adiabatic populations, Omega_0 = 1, t_f = 80",
    "fig4c": "dark-state populations, Omega_0 = 1, t_f = 40",
    "fig5": "Zeno fidelity versus relative t_f deviation",
    "fig6": "shortcut fidelity map over t_f in [10, 60] and Delta in [0.5, 6]",
    "fig7a": "shortcut populations of psi1, psi5, psi7 (Delta = 3, t_f = 35)",
    "fig7b": "shortcut intermediate populations psi3, phi1 (Delta = 3, t_f = 35)",
    "fig7c": "fidelity versus time for the shortcut, adiabatic and Zeno protocols",
    "fig8": "shortcut fidelity versus relative deviations of T and nu (T = 40)",
    "fig9a": "shortcut fidelity over gamma, kappa in [0, 0.1] with Delta = 3",
    "fig9b": "shortcut fidelity over gamma, kappa in [0, 0.1] with Delta = 1",
}

POSITIVE = ("tf", "delta", "correction", "nu", "T", "n_steps")
NON_NEGATIVE = ("omega0", "gamma", "kappa")


class ConfigError(ValueError):
    """Invalid or unknown configuration keys."""


# --- config parsing -----------------------------------------------------------

def _number(key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{key}: expected a finite number, got {value!r}")
    return float(value)


def validate_params(protocol: str, params: dict) -> dict:
    """Check types and ranges of protocol parameters; returns the merged parameter set."""
    try:
        merged = job_params(protocol, params)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    for key, value in params.items():
        if value is None:
            continue
        if key == "branch":
            if value not in ("+", "-"):
                raise ConfigError(f"branch: must be '+' or '-', got {value!r}")
            continue
        x = _number(key, value)
        if key in POSITIVE and not x > 0:
            raise ConfigError(f"{key}: must be positive, got {value}")
        if key in NON_NEGATIVE and x < 0:
            raise ConfigError(f"{key}: must be non-negative, got {value}")
        if key == "n_atoms" and (x != int(x) or x < 2):
            raise ConfigError(f"n_atoms: must be an integer >= 2, got {value}")
        if key == "omega1" and x == 0:
            raise ConfigError("omega1: must be nonzero")
    return merged


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a flat JSON object")
    for k, v in doc.items():
        if isinstance(v, dict):
            raise ConfigError(f"{k}: nested objects are not allowed in a flat config")
    return doc


def _pop_protocol(doc: dict) -> str:
    protocol = doc.pop("protocol", None)
    if protocol not in DEFAULTS:
        raise ConfigError(f"protocol: expected one of {sorted(DEFAULTS)}, got {protocol!r}")
    return protocol


def _pop_steps(doc: dict, override: int | None) -> int:
    n = doc.pop("n_steps", DEFAULT_STEPS)
    if override is not None:
        n = override
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"n_steps: must be a positive integer, got {n!r}")
    return n


def _axis(doc: dict, which: str) -> Axis | None:
    name = doc.pop(which, None)
    rng = doc.pop(f"{which}_range", None)
    if name is None and rng is None:
        return None
    if name is None or rng is None:
        raise ConfigError(f"{which} and {which}_range must be given together")
    if not isinstance(rng, list) or len(rng) != 3:
        raise ConfigError(f"{which}_range: expected [start, stop, n_points], got {rng!r}")
    start, stop = _number(f"{which}_range", rng[0]), _number(f"{which}_range", rng[1])
    n = rng[2]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"{which}_range: n_points must be a positive integer (empty grid), got {n!r}")
    try:
        return Axis(str(name), start, stop, n)
    except ValueError as exc:
        raise ConfigError(f"{which}_range: {exc}") from None


def parse_run_config(doc: dict, steps: int | None = None) -> tuple[dict, int]:
    doc = dict(doc)
    protocol = _pop_protocol(doc)
    n_steps = _pop_steps(doc, steps)
    validate_params(protocol, doc)
    return {"protocol": protocol, **doc}, n_steps


def parse_sweep_config(doc: dict, steps: int | None = None) -> SweepSpec:
    doc = dict(doc)
    protocol = _pop_protocol(doc)
    n_steps = _pop_steps(doc, steps)
    a1, a2 = _axis(doc, "axis1"), _axis(doc, "axis2")
    if a1 is None:
        raise ConfigError("axis1: a sweep needs at least one axis")
    validate_params(protocol, doc)
    try:
        return SweepSpec(protocol, a1, a2, doc, n_steps)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def parse_scan_config(doc: dict, steps: int | None = None) -> tuple[str, str, tuple, dict, int]:
    doc = dict(doc)
    protocol = _pop_protocol(doc)
    n_steps = _pop_steps(doc, steps)
    parameter = doc.pop("parameter", None)
    if parameter not in SWEEPABLE[protocol]:
        raise ConfigError(f"parameter: expected one of {SWEEPABLE[protocol]}, got {parameter!r}")
    rng = doc.pop("relative_range", [-0.1, 0.1, 21])
    axis = _axis({"relative": parameter, "relative_range": rng}, "relative")
    validate_params(protocol, doc)
    return protocol, parameter, (axis.start, axis.stop, axis.n_points), doc, n_steps


# --- figures ------------------------------------------------------------------

def _fig2(out: Path, steps, workers, res):
    p = StirapParams()
    s = stirap_schedule(p)
    t = np.linspace(0, p.tf, 401)
    o1, os_ = s.sample(t)
    io.write_columns(out / "pulses.csv", ["t_over_tf", "omega1_over_omega0", "omega_s_over_omega0"],
                     [t / p.tf, o1 / p.omega0, os_ / p.omega0])


def _fig3(out, steps, workers, res):
    spec = SweepSpec("adiabatic", Axis("omega0", 0.2, 2.0, res), Axis("tf", 10.0, 100.0, res), {}, steps)
    sweep(spec, workers).write(out)


def _adiabatic_fig(tf: float, dark: bool):
    def fig(out, steps, workers, res):
        r = run_adiabatic(stirap=StirapParams(omega0=1.0, tf=tf), grid=TimeGrid(0.0, tf, steps))
        if dark:
            names = list(r.reference)
            r.trajectory.to_csv(out / "dark_state.csv", {n: r.reference[n] for n in names})
        r.write(out)
    return fig


def _fig5(out, steps, workers, res):
    robustness_scan("zeno", "tf", (-0.1, 0.1, res), n_steps=steps, workers=workers).write(out, "curve")


def _fig6(out, steps, workers, res):
    spec = SweepSpec("shortcut", Axis("tf", 10.0, 60.0, res), Axis("delta", 0.5, 6.0, res), {}, steps)
    sweep(spec, workers).write(out)


def _fig7(out, steps, workers, res):
    run_job({"protocol": "shortcut"}, steps).write(out)


def _fig7c(out, steps, workers, res):
    jobs = {
        "shortcut": {"protocol": "shortcut"},
        "adiabatic": {"protocol": "adiabatic", "omega0": 1.0, "tf": 80.0},
        "zeno": {"protocol": "zeno", "omega1": 0.05},
    }
    finals = {}
    for name, job in jobs.items():
        r = run_job(job, steps)
        r.trajectory.to_csv(out / f"{name}.csv", {"fidelity": r.fidelity_curve})
        finals[name] = r.final_fidelity
    io.write_json(out / "result.json", {"final_fidelity": finals})


def _fig8(out, steps, workers, res):
    fixed = {"T": 40.0}
    nu0 = shortcut_nu(DEFAULTS["shortcut"]["delta"], DEFAULTS["shortcut"]["tf"])
    spec = SweepSpec("shortcut", Axis("T", 36.0, 44.0, res), Axis("nu", 0.95 * nu0, 1.05 * nu0, res), fixed, steps)
    sweep(spec, workers).write(out)
    robustness_scan("shortcut", "T", (-0.1, 0.1, res), fixed=fixed, n_steps=steps,
                    workers=workers).write(out / "scan_T", "curve")
    robustness_scan("shortcut", "nu", (-0.05, 0.05, res), fixed=fixed, n_steps=steps,
                    workers=workers).write(out / "scan_nu", "curve")


def _fig9(delta: float):
    def fig(out, steps, workers, res):
        decoherence_map("shortcut", (0.0, 0.1, res), (0.0, 0.1, res), fixed={"delta": delta},
                        n_steps=steps, workers=workers).write(out)
    return fig


FIGURE_BUILDERS = {
    "fig2": _fig2, "fig3": _fig3,
    "fig4a": _adiabatic_fig(40.0, False), "fig4b": _adiabatic_fig(80.0, False),
    "fig4c": _adiabatic_fig(40.0, True),
    "fig5": _fig5, "fig6": _fig6, "fig7a": _fig7, "fig7b": _fig7, "fig7c": _fig7c,
    "fig8": _fig8, "fig9a": _fig9(3.0), "fig9b": _fig9(1.0),
}


# --- commands -----------------------------------------------------------------

def cmd_figure(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    FIGURE_BUILDERS[args.id](out, args.steps or DEFAULT_STEPS, args.workers, args.resolution)
    print(f"{args.id}: wrote {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    job, n_steps = parse_run_config(load_config(args.config), args.steps)
    r = run_job(job, n_steps)
    r.write(args.out)
    print(f"{job['protocol']}: final fidelity {r.final_fidelity:.6f} -> {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = parse_sweep_config(load_config(args.config), args.steps)
    res = sweep(spec, args.workers)
    res.write(args.out)
    print(f"sweep {spec.shape}: {len(res.errors)} failed cells -> {args.out}")
    return EXIT_OK


def cmd_scan(args) -> int:
    protocol, parameter, rel, fixed, n_steps = parse_scan_config(load_config(args.config), args.steps)
    res = robustness_scan(protocol, parameter, rel, fixed=fixed, n_steps=n_steps, workers=args.workers)
    res.write(args.out, "curve")
    print(f"scan {parameter}: baseline {res.meta['baseline']:.6f} -> {args.out}")
    return EXIT_OK


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cqed-wstate", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--steps", type=_positive_int, default=None, help="RK4 steps per run")
    common.add_argument("--workers", type=_positive_int, default=1, help="process pool size for sweeps")

    ids = "\n".join(f"  {k:6s} {v}" for k, v in FIGURES.items())
    fig = sub.add_parser("figure", parents=[common], formatter_class=argparse.RawDescriptionHelpFormatter,
                         help="emit the data behind one figure", epilog=f"figure ids:\n{ids}")
    fig.add_argument("id", choices=list(FIGURES), metavar="ID", help="figure id (see below)")
    fig.add_argument("--resolution", type=_positive_int, default=21, help="points per map/scan axis")
    fig.set_defaults(func=cmd_figure)

    for name, func, what in (("run", cmd_run, "one protocol run"),
                             ("sweep", cmd_sweep, "a 1-D or 2-D parameter sweep"),
                             ("scan", cmd_scan, "a relative-deviation robustness scan")):
        p = sub.add_parser(name, parents=[common], help=f"{what} from a flat JSON config")
        p.add_argument("--config", required=True, help="path to a flat JSON config")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, PulseSignError, EigenvalueCrossingError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
