"""
Batch front-end.

Verbs:
  run       execute a named experiment (or a config file) and write a CSV
  synth     synthesize for a named plant and print level/gain diagnostics
  list      enumerate the experiment registry
  validate  check a config file against the schema

Each experiment reproduces one benchmark scenario: the pendulum scenarios
compare controller families under a named driving disturbance, the tracking
scenarios compare the stationary Kalman filter against the
pathlength-adaptive filter under a named measurement disturbance with
standard Gaussian driving noise.

Config files use a flat key = value grammar with [section] tables; see the
README for the exact rules.  All randomness derives from the single config
seed through numpy SeedSequence spawning, one stream per disturbance
channel, so a (config, seed) pair reproduces byte-identical CSV output.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import benchmarks
from .control import (
    FeasibilityReport,
    bisect_gamma,
    h2_synthesize,
    hinf_synthesize,
    pathlength_synthesize,
)
from .errors import (
    ConfigError,
    InfeasibleSynthesis,
    NoFeasiblePoint,
    PathregretError,
)
from .filtering import (
    kalman_synthesize,
    pathlength_filter_synthesize,
    pathlength_gamma_feasible,
)
from .sim import (
    DisturbanceSpec,
    PendulumParams,
    generate,
    simulate_filter,
    simulate_pendulum_mpc,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4

_PENDULUM_DT = 1e-3
_TRACKING_DT = 0.01


@dataclass(frozen=True)
class ExperimentDef:
    name: str
    kind: str  # 'pendulum' or 'tracking-filter'
    description: str
    disturbance: dict
    measurement: dict | None = None
    horizon: int = 100_000


def _sine(period, dt=None):
    # dt None: period counts samples (one-Lipschitz-per-step scaling);
    # numeric dt: period is in continuous time, sampled at dt.
    spec = {"kind": "sinusoid", "amplitude": 1.0, "period": period}
    if dt is not None:
        spec["dt"] = dt
    return spec


EXPERIMENTS = {
    e.name: e
    for e in [
        ExperimentDef(
            "pendulum-gaussian", "pendulum",
            "pendulum regulation, driving torque i.i.d. standard Gaussian",
            {"kind": "gaussian_iid", "amplitude": 1.0},
        ),
        ExperimentDef(
            "pendulum-step", "pendulum",
            "pendulum regulation, square-wave torque: +1 for 500 steps, "
            "-1 for the next 500, repeating",
            {"kind": "step", "amplitude": 1.0, "half_period": 500},
        ),
        ExperimentDef(
            "pendulum-constant", "pendulum",
            "pendulum regulation, constant unit torque (zero pathlength)",
            {"kind": "constant", "amplitude": 1.0},
        ),
        ExperimentDef(
            "pendulum-sine-2000pi", "pendulum",
            "pendulum regulation, sinusoidal torque of period 2000*pi time units",
            _sine(2000 * np.pi, dt=_PENDULUM_DT),
        ),
        ExperimentDef(
            "pendulum-sine-200pi", "pendulum",
            "pendulum regulation, sinusoidal torque of period 200*pi time units",
            _sine(200 * np.pi, dt=_PENDULUM_DT),
        ),
        ExperimentDef(
            "pendulum-sine-20pi", "pendulum",
            "pendulum regulation, sinusoidal torque of period 20*pi time units",
            _sine(20 * np.pi, dt=_PENDULUM_DT),
        ),
        ExperimentDef(
            "pendulum-sine-2pi", "pendulum",
            "pendulum regulation, sinusoidal torque of period 2*pi time units",
            _sine(2 * np.pi, dt=_PENDULUM_DT),
        ),
        ExperimentDef(
            "tracking-constant-v", "tracking-filter",
            "position tracking, constant unit measurement offset "
            "(zero pathlength, large energy)",
            {"kind": "gaussian_iid", "amplitude": 1.0},
            {"kind": "constant", "amplitude": 1.0},
            horizon=10_000,
        ),
        ExperimentDef(
            "tracking-sine-200pi", "tracking-filter",
            "position tracking, slow sinusoidal measurement drift "
            "(period 200*pi samples, 0.01-Lipschitz per step)",
            {"kind": "gaussian_iid", "amplitude": 1.0},
            _sine(200 * np.pi),
            horizon=10_000,
        ),
        ExperimentDef(
            "tracking-sine-20pi", "tracking-filter",
            "position tracking, moderate sinusoidal measurement drift "
            "(period 20*pi samples, 0.1-Lipschitz per step)",
            {"kind": "gaussian_iid", "amplitude": 1.0},
            _sine(20 * np.pi),
            horizon=10_000,
        ),
        ExperimentDef(
            "tracking-sine-2pi", "tracking-filter",
            "position tracking, rapidly oscillating measurement noise "
            "(period 2*pi samples, 1-Lipschitz per step)",
            {"kind": "gaussian_iid", "amplitude": 1.0},
            _sine(2 * np.pi),
            horizon=10_000,
        ),
    ]
}


# ---------------------------------------------------------------------------
# config parsing: flat `key = value` lines plus [section] tables

def _parse_value(text, lineno):
    text = text.strip()
    if not text:
        raise ConfigError("empty value", lineno)
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(part, lineno) for part in inner.split(",")]
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse value {text!r}", lineno) from None


def _strip_comment(line):
    out = []
    in_string = False
    for ch in line:
        if ch == '"':
            in_string = not in_string
        if ch == "#" and not in_string:
            break
        out.append(ch)
    return "".join(out)


def parse_config_text(text):
    """Parse config text into a dict of scalars and section dicts."""
    data = {}
    table = data
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if not name:
                raise ConfigError("empty table name", lineno)
            if name in data and not isinstance(data[name], dict):
                raise ConfigError(f"table {name!r} collides with a key", lineno)
            table = data.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError("empty key", lineno)
        if key in table:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        table[key] = _parse_value(value, lineno)
    return data


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc


@dataclass
class ExperimentConfig:
    experiment: str
    horizon: int
    seed: int
    gamma: object  # float or "auto"
    decimate: int
    output: str
    controllers: list = field(default_factory=list)
    disturbance: dict | None = None
    measurement: dict | None = None


_TOP_KEYS = {"experiment", "horizon", "seed", "gamma", "decimate", "output",
             "controllers"}
_DIST_KEYS = {"kind", "amplitude", "period", "dt", "half_period",
              "switch_times", "seed"}


def build_experiment_config(data, overrides=None):
    """Validate raw config data and produce an ExperimentConfig."""
    overrides = overrides or {}
    merged = dict(data)
    merged.update({k: v for k, v in overrides.items() if v is not None})

    for key in merged:
        if isinstance(merged[key], dict):
            if key not in ("disturbance", "measurement"):
                raise ConfigError(f"unknown table {key!r}")
            for k in merged[key]:
                if k not in _DIST_KEYS:
                    raise ConfigError(f"unknown key {k!r} in [{key}]")
        elif key not in _TOP_KEYS:
            raise ConfigError(f"unknown key {key!r}")

    name = merged.get("experiment")
    if not isinstance(name, str) or name not in EXPERIMENTS:
        known = ", ".join(sorted(EXPERIMENTS))
        raise ConfigError(f"experiment must be one of: {known}")
    exp = EXPERIMENTS[name]

    horizon = merged.get("horizon", exp.horizon)
    if not isinstance(horizon, int) or horizon <= 0:
        raise ConfigError("horizon must be a positive integer")
    seed = merged.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    gamma = merged.get("gamma", "auto")
    if gamma != "auto" and not isinstance(gamma, (int, float)):
        raise ConfigError("gamma must be a number or \"auto\"")
    decimate = merged.get("decimate", 100)
    if not isinstance(decimate, int) or decimate <= 0:
        raise ConfigError("decimate must be a positive integer")
    output = merged.get("output", f"{name}.csv")
    if not isinstance(output, str):
        raise ConfigError("output must be a string path")
    controllers = merged.get("controllers",
                             ["h2", "hinf", "pathlength"]
                             if exp.kind == "pendulum" else
                             ["kalman", "pathlength"])
    if not isinstance(controllers, list) or not controllers:
        raise ConfigError("controllers must be a non-empty list")
    valid = ({"h2", "hinf", "pathlength", "offline"} if exp.kind == "pendulum"
             else {"kalman", "pathlength"})
    for c in controllers:
        if c not in valid:
            raise ConfigError(f"unknown controller {c!r} for {exp.kind}")

    return ExperimentConfig(
        experiment=name,
        horizon=horizon,
        seed=seed,
        gamma=gamma,
        decimate=decimate,
        output=output,
        controllers=controllers,
        disturbance=merged.get("disturbance"),
        measurement=merged.get("measurement"),
    )


def _spec_from_dict(d, seed, horizon):
    kind = d.get("kind", "constant")
    amplitude = float(d.get("amplitude", 1.0))
    if kind == "step":
        if "switch_times" in d:
            switches = tuple(int(s) for s in d["switch_times"])
        else:
            half = int(d.get("half_period", 500))
            switches = tuple(range(half, horizon, half))
        return DisturbanceSpec("step", amplitude=amplitude,
                               switch_times=switches)
    if kind == "sinusoid":
        return DisturbanceSpec("sinusoid", amplitude=amplitude,
                               period=float(d["period"]),
                               dt=float(d.get("dt", 1.0)))
    if kind == "constant":
        return DisturbanceSpec("constant", amplitude=amplitude)
    if kind == "gaussian_iid":
        return DisturbanceSpec("gaussian_iid", amplitude=amplitude, seed=seed)
    raise ConfigError(f"unknown disturbance kind {kind!r}")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return float(obj)


def _format_row(values):
    return ",".join(f"{v:.12g}" if isinstance(v, float) else str(v)
                    for v in values)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(_format_row(r) for r in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _decimated_indices(horizon, decimate):
    idx = list(range(0, horizon, decimate))
    if idx[-1] != horizon - 1:
        idx.append(horizon - 1)
    return idx


def run_experiment(cfg):
    """Execute the configured experiment; writes CSV + metadata sidecar.

    Returns the metadata dict.
    """
    exp = EXPERIMENTS[cfg.experiment]
    seeds = np.random.SeedSequence(cfg.seed).generate_state(2, dtype=np.uint32)
    meta = {
        "experiment": cfg.experiment,
        "kind": exp.kind,
        "description": exp.description,
        "horizon": cfg.horizon,
        "seed": cfg.seed,
        "decimate": cfg.decimate,
        "gamma": {},
        "gamma_star": {},
        "solver": {},
    }
    idx = _decimated_indices(cfg.horizon, cfg.decimate)

    if exp.kind == "pendulum":
        params = PendulumParams(dt=_PENDULUM_DT)
        origin = benchmarks.pendulum_origin_plant(_PENDULUM_DT)
        wspec = _spec_from_dict(cfg.disturbance or exp.disturbance,
                                int(seeds[0]), cfg.horizon)
        w = generate(wspec, cfg.horizon)
        columns = {}
        for fam in cfg.controllers:
            gamma = None
            if fam in ("hinf", "pathlength"):
                if cfg.gamma == "auto":
                    synth = hinf_synthesize if fam == "hinf" else pathlength_synthesize
                    star = bisect_gamma(
                        lambda g: not isinstance(synth(origin, g),
                                                 FeasibilityReport))
                    meta["gamma_star"][fam] = star
                    gamma = 1.05 * star
                else:
                    gamma = float(cfg.gamma)
                meta["gamma"][fam] = gamma
            res = simulate_pendulum_mpc(params, fam, w, gamma=gamma)
            columns[fam] = res.cumulative
            meta["solver"][fam] = {
                "diverged": res.diverged,
                "diverged_at": res.diverged_at,
                "max_gamma_used": res.max_gamma_used,
            }
        header = ["t"] + [f"{fam}_cumcost" for fam in cfg.controllers]
        rows = [[t] + [float(columns[fam][t]) for fam in cfg.controllers]
                for t in idx]
    else:
        plant = benchmarks.tracking_filter_plant(_TRACKING_DT)
        wspec = _spec_from_dict(cfg.disturbance or exp.disturbance,
                                int(seeds[0]), cfg.horizon)
        vspec = _spec_from_dict(cfg.measurement or exp.measurement,
                                int(seeds[1]), cfg.horizon)
        w = generate(wspec, cfg.horizon)
        v = generate(vspec, cfg.horizon)
        columns = {}
        for fam in cfg.controllers:
            if fam == "kalman":
                est = kalman_synthesize(plant)
            else:
                if cfg.gamma == "auto":
                    star = bisect_gamma(
                        lambda g: pathlength_gamma_feasible(plant, g))
                    meta["gamma_star"][fam] = star
                    gamma = 1.05 * star
                else:
                    gamma = float(cfg.gamma)
                meta["gamma"][fam] = gamma
                est = pathlength_filter_synthesize(plant, gamma)
                if isinstance(est, FeasibilityReport):
                    raise InfeasibleSynthesis(
                        f"filter synthesis infeasible at gamma={gamma}: "
                        f"{est.failed}"
                    )
                meta["solver"][fam] = {
                    k: v for k, v in est.diagnostics.items()
                    if isinstance(v, (int, float)) and v is not None
                }
            res = simulate_filter(plant, est, w, v)
            columns[fam] = res.cumulative
        header = ["t"] + [f"{fam}_cumerror" for fam in cfg.controllers]
        rows = [[t] + [float(columns[fam][t]) for fam in cfg.controllers]
                for t in idx]

    _write_csv(cfg.output, header, rows)
    with open(cfg.output + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
    return meta


def _cmd_run(args):
    data = load_config(args.config) if args.config else {}
    overrides = {
        "experiment": args.experiment,
        "horizon": args.horizon,
        "seed": args.seed,
        "gamma": args.gamma,
        "output": args.output,
        "decimate": args.decimate,
    }
    cfg = build_experiment_config(data, overrides)
    meta = run_experiment(cfg)
    print(f"wrote {cfg.output} and {cfg.output}.meta.json")
    for fam, g in meta["gamma"].items():
        star = meta["gamma_star"].get(fam)
        extra = f" (gamma* = {star:.6g})" if star is not None else ""
        print(f"  {fam}: gamma = {g:.6g}{extra}")
    return EXIT_OK


def _cmd_synth(args):
    if args.plant not in benchmarks.NAMED_PLANTS:
        known = ", ".join(sorted(benchmarks.NAMED_PLANTS))
        raise ConfigError(f"plant must be one of: {known}")
    kind, factory = benchmarks.NAMED_PLANTS[args.plant]
    plant = factory()
    if kind == "filter":
        if args.gamma == "auto":
            star = bisect_gamma(lambda g: pathlength_gamma_feasible(plant, g))
            gamma = 1.05 * star
            print(f"gamma* = {star:.6g} (using gamma = {gamma:.6g})")
        else:
            gamma = float(args.gamma)
        flt = pathlength_filter_synthesize(plant, gamma)
        if isinstance(flt, FeasibilityReport):
            print(f"infeasible at gamma = {gamma:.6g}: {flt.failed}")
            print(json.dumps(flt.diagnostics, indent=2, default=_json_default))
            return EXIT_INFEASIBLE
        print("filter synthesized; diagnostics:")
        print(json.dumps(flt.diagnostics, indent=2, default=_json_default))
    else:
        if args.gamma == "auto":
            star = bisect_gamma(
                lambda g: not isinstance(pathlength_synthesize(plant, g),
                                         FeasibilityReport))
            gamma = 1.05 * star
            print(f"gamma* = {star:.6g} (using gamma = {gamma:.6g})")
        else:
            gamma = float(args.gamma)
        pol = pathlength_synthesize(plant, gamma)
        if isinstance(pol, FeasibilityReport):
            print(f"infeasible at gamma = {gamma:.6g}: {pol.failed}")
            print(json.dumps(pol.diagnostics, indent=2, default=_json_default))
            return EXIT_INFEASIBLE
        print("controller synthesized; diagnostics:")
        print(json.dumps(pol.diagnostics, indent=2, default=_json_default))
        print("state gain:")
        print(np.array_str(pol.g["K_xi"], precision=6))
        lqr = h2_synthesize(plant)
        print("reference LQR gain:")
        print(np.array_str(lqr.K_x, precision=6))
    return EXIT_OK


def list_experiments():
    """One line per registered experiment, name plus scenario description."""
    width = max(len(n) for n in EXPERIMENTS)
    return "\n".join(f"{name:<{width}}  {EXPERIMENTS[name].description}"
                     for name in sorted(EXPERIMENTS))


def validate_config(path):
    """Parse and schema-check a config file; returns a short report string.

    Raises ConfigError (with a line anchor when available) on any problem.
    """
    data = load_config(path)
    cfg = build_experiment_config(data)
    return f"{path}: OK (experiment {cfg.experiment!r}, horizon {cfg.horizon})"


def _cmd_list(_args):
    print(list_experiments())
    return EXIT_OK


def _cmd_validate(args):
    print(validate_config(args.config))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pathregret",
        description="Pathlength-regret-optimal control and filtering benchmarks",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run a named experiment")
    p_run.add_argument("--experiment", help="experiment name (see `list`)")
    p_run.add_argument("--config", help="config file path")
    p_run.add_argument("--horizon", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--gamma", help='number or "auto"')
    p_run.add_argument("--output", help="CSV output path")
    p_run.add_argument("--decimate", type=int)
    p_run.set_defaults(func=_cmd_run)

    p_synth = sub.add_parser("synth", help="synthesize and print diagnostics")
    p_synth.add_argument("--plant", required=True,
                         help=", ".join(sorted(benchmarks.NAMED_PLANTS)))
    p_synth.add_argument("--gamma", default="auto")
    p_synth.set_defaults(func=_cmd_synth)

    p_list = sub.add_parser("list", help="list registered experiments")
    p_list.set_defaults(func=_cmd_list)

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "gamma", None) not in (None, "auto"):
        try:
            args.gamma = float(args.gamma)
        except (TypeError, ValueError):
            print(f"error: gamma must be a number or 'auto', got {args.gamma!r}",
                  file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleSynthesis, NoFeasiblePoint) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (PathregretError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
