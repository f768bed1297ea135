"""Command-line surface: every estimator as a subcommand with stable files.

Output contract: CSV files carry an exact header row and a trailing
``# seed=... config_hash=...`` comment; JSON summaries always have the keys
{"estimate", "stderr", "n_samples", "params", "warnings"}.  For a fixed
config and seed every output byte is reproducible, independent of worker
count (results are merged in task order, never completion order).

Precedence for settings: built-in defaults < config file (flat key=value,
keys spelled like the flags) < command-line flags < ANDERSON_SEED /
ANDERSON_WORKERS environment overrides.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings as _warnings

import numpy as np

from . import asymptotics, experiments, fbprocess, spectrum as spec_mod
from .engine import resolve_workers
from .prufer import Disorder, PotentialSpec, sample_disorder

__all__ = ["main", "run", "build_config"]


def _fmt(x) -> str:
    """Shortest round-trip decimal form; stable across runs."""
    return repr(float(x))


def _dist_spec(cfg: dict) -> PotentialSpec:
    if cfg["dist"] == "uniform":
        return PotentialSpec.uniform(cfg["lo"], cfg["hi"], eps=cfg["eps"])
    if cfg["dist"] == "gaussian":
        return PotentialSpec.gaussian(cfg["mean"], cfg["std"], eps=cfg["eps"])
    raise ValueError(f"unknown dist {cfg['dist']!r}")


_EXECUTION_KEYS = {"workers", "out", "format"}  # change nothing numerical


def _config_hash(cfg: dict) -> str:
    text = "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg) if k not in _EXECUTION_KEYS)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return _fmt(x)
    return str(x)


def _write_csv(path: str, header: list[str], rows, cfg: dict) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(x) for x in row))
    lines.append(f"# seed={cfg['seed']} config_hash={_config_hash(cfg)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _summary(cfg: dict, estimate, stderr, n_samples, warnings_list) -> dict:
    return {
        "estimate": float(estimate),
        "stderr": float(stderr),
        "n_samples": int(n_samples),
        "params": {k: cfg[k] for k in sorted(cfg)},
        "warnings": list(warnings_list),
    }


def _emit(cfg: dict, summary: dict, csv_payload=None) -> None:
    out = cfg.get("out")
    if csv_payload is not None and cfg["format"] == "csv":
        header, rows = csv_payload
        _write_csv(out, header, rows, cfg)
    else:
        with open(out, "w") as fh:
            json.dump(summary, fh, sort_keys=True)
            fh.write("\n")
    print(
        f"{cfg['command']}: estimate={summary['estimate']:.6g} "
        f"+- {summary['stderr']:.2g} -> {out}"
    )


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_spectrum(cfg: dict) -> tuple[dict, tuple]:
    spec = _dist_spec(cfg)
    d = sample_disorder(spec, cfg["n"], cfg["seed"])
    result = spec_mod.eigenvalues_dirichlet(d, tol=cfg["tol"])
    rows = [(j + 1, lam) for j, lam in enumerate(result.eigenvalues)]
    if cfg.get("eigenvector_index") is not None:
        j = int(cfg["eigenvector_index"])
        lam = float(result.eigenvalues[j - 1])
        _, u = spec_mod.eigenvector(d, lam)
        ev_rows = [
            (site + 1, u[site], np.log(max(abs(u[site]), 1e-300)))
            for site in range(d.n)
        ]
        _write_csv(cfg["eigenvector_out"], ["site", "amplitude", "log_amplitude"],
                   ev_rows, cfg)
    summary = _summary(cfg, len(result.eigenvalues), 0.0, d.n, [])
    return summary, (["index", "eigenvalue"], rows)


def _cmd_periodic(cfg: dict) -> tuple[dict, tuple]:
    spec = _dist_spec(cfg)
    d = sample_disorder(spec, cfg["n"], cfg["seed"])
    warns: list[str] = []
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        result = spec_mod.eigenvalues_periodic(d, grid=cfg["grid"], tol=cfg["tol"])
        warns = [str(w.message) for w in caught]
    rows = [(j + 1, lam) for j, lam in enumerate(result.eigenvalues)]
    summary = _summary(cfg, len(result.eigenvalues), 0.0, d.n, warns)
    return summary, (["index", "eigenvalue"], rows)


def _cmd_dos(cfg: dict) -> tuple[dict, tuple]:
    spec = _dist_spec(cfg)
    rows = []
    warns: list[str] = []
    counting = None
    if cfg["method"] in ("counting", "both"):
        counting = asymptotics.dos_counting(
            spec, cfg["n"], cfg["realizations"], cfg["bins"],
            seed=cfg["seed"], workers=cfg["workers"])
        rows += [(c, dens, "counting")
                 for c, dens in zip(counting.lam_centers, counting.density)]
    if cfg["method"] in ("invariant", "both"):
        lo, hi = spec.support()
        edges = np.linspace(lo - 2.0, hi + 2.0, cfg["bins"] + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
        with _warnings.catch_warnings(record=True) as caught:
            _warnings.simplefilter("always")
            inv = asymptotics.dos_invariant(
                spec, centers, bins=cfg["phase_bins"], steps=cfg["steps"],
                seed=cfg["seed"])
            warns += [str(w.message) for w in caught]
        rows += [(c, dens, "invariant")
                 for c, dens in zip(inv.lam_centers, inv.density)]
    primary = counting if counting is not None else inv
    est = primary.integral()
    se = 0.0
    if counting is not None and counting.stderr is not None:
        se = float(np.sqrt(((counting.stderr * counting.bin_width) ** 2).sum()))
    summary = _summary(cfg, est, se, cfg["realizations"], warns)
    return summary, (["lambda_bin_center", "density", "method"], rows)


def _cmd_lyapunov(cfg: dict) -> tuple[dict, tuple]:
    spec = _dist_spec(cfg)
    if cfg.get("lam_min") is not None:
        lams = np.linspace(cfg["lam_min"], cfg["lam_max"], cfg["lam_count"])
        g, s2, seg, ses2 = asymptotics.lyapunov_grid(
            spec, lams, steps=cfg["steps"], batches=cfg["batches"], seed=cfg["seed"])
        rows = list(zip(lams, g, seg, s2, ses2))
        mid = len(lams) // 2
        summary = _summary(cfg, g[mid], seg[mid], cfg["steps"] * len(lams), [])
    else:
        est = asymptotics.lyapunov(spec, cfg["lam"], steps=cfg["steps"],
                                   batches=cfg["batches"], seed=cfg["seed"])
        rows = [(est.lam, est.gamma, est.se_gamma, est.sigma2, est.se_sigma2)]
        summary = _summary(cfg, est.gamma, est.se_gamma, est.steps, [])
    return summary, (["lambda", "gamma", "gamma_se", "sigma2", "sigma2_se"], rows)


def _cmd_invariant(cfg: dict) -> tuple[dict, None]:
    spec = _dist_spec(cfg)
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        res = asymptotics.invariant_measure(
            spec, cfg["lam"], bins=cfg["bins"], burnin=cfg["burnin"],
            steps=cfg["steps"], seed=cfg["seed"])
        warns = [str(w.message) for w in caught]
    summary = _summary(cfg, res.tv_operator, 0.0, cfg["steps"], warns)
    return summary, None


def _cmd_mixing(cfg: dict) -> tuple[dict, None]:
    spec = _dist_spec(cfg)
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        res = asymptotics.mixing_estimate(
            spec, cfg["lam"], max_lag=cfg["max_lag"], steps=cfg["steps"],
            seed=cfg["seed"])
        warns = [str(w.message) for w in caught]
    summary = _summary(cfg, res.kappa_max, 0.0, cfg["steps"], warns)
    summary["params"]["kappa"] = {k: res.kappa[k] for k in sorted(res.kappa)}
    summary["params"]["r2"] = {k: res.r2[k] for k in sorted(res.r2)}
    return summary, None


def _cmd_fb_verify(cfg: dict) -> tuple[dict, tuple]:
    spec = _dist_spec(cfg)
    observables = [
        fbprocess.indicator(cfg["a"], cfg["b"]),
        fbprocess.indicator_sin2(cfg["a"], cfg["b"], cfg["obs_site"]),
    ]
    lhs = fbprocess.lhs_estimate(observables, spec, cfg["n"], cfg["realizations"],
                                 cfg["seed"], workers=cfg["workers"])
    grid = fbprocess.support_grid(observables, spec, cells=cfg["cells"])
    rhs = fbprocess.rhs_estimate(observables, spec, cfg["n"], grid,
                                 cfg["samples_per_cell"], cfg["bandwidths"],
                                 cfg["seed"] + 1, workers=cfg["workers"])
    rows = []
    for obs, le in zip(observables, lhs):
        for h in cfg["bandwidths"]:
            re_ = rhs.get(obs.name, h)
            rows.append((obs.name, le.estimate, le.stderr, re_.estimate,
                         re_.stderr, h))
    first = rhs.get(observables[0].name, cfg["bandwidths"][0])
    summary = _summary(cfg, first.estimate, first.stderr, first.n_samples,
                       list(rhs.warnings))
    summary["params"]["lhs"] = [
        {"observable": e.observable, "estimate": e.estimate, "stderr": e.stderr}
        for e in lhs
    ]
    summary["params"]["bandwidth_diffs"] = [
        {"observable": d.observable, "h_coarse": d.h_coarse, "h_fine": d.h_fine,
         "delta": d.delta, "stderr": d.stderr}
        for d in rhs.diffs
    ]
    return summary, (["observable", "lhs", "lhs_se", "rhs", "rhs_se", "bandwidth"], rows)


def _cmd_dtheta(cfg: dict) -> tuple[dict, None]:
    spec = _dist_spec(cfg)
    rng_lam = np.random.Generator(np.random.Philox(cfg["seed"]))
    lo, hi = spec.support()
    errs = []
    for i in range(cfg["pairs"]):
        d = sample_disorder(spec, cfg["n"], cfg["seed"] + 1 + i)
        lam = rng_lam.uniform(lo - 2.0, hi + 2.0)
        errs.append(fbprocess.dtheta_identity_check(d, lam))
    summary = _summary(cfg, max(errs), 0.0, cfg["pairs"], [])
    summary["params"]["mean_rel_err"] = float(np.mean(errs))
    return summary, None


def _tails_rows(ens) -> list:
    rows = []
    for i in range(ens.lam.size):
        for s, q, f in zip(ens.s_grid, ens.q[i], ens.fluct[i]):
            rows.append((i, s, q, f))
    return rows


def _cmd_tails(cfg: dict) -> tuple[dict, tuple]:
    spec = _dist_spec(cfg)
    table = asymptotics.build_param_table(spec, seed=cfg["seed"] + 101)
    s_grid = np.linspace(0.0, 1.0, cfg["s_points"])
    ens = experiments.tails_experiment(spec, cfg["n"], cfg["realizations"],
                                       s_grid=s_grid, seed=cfg["seed"], table=table)
    from scipy import stats as sps

    ks = sps.kstest(ens.center, "uniform").statistic
    summary = _summary(cfg, ks, 0.0, ens.lam.size, [])
    summary["params"]["skipped"] = ens.skipped
    summary["params"]["mean_slope"] = float(ens.slope.mean())
    return summary, (["sample_id", "s", "q", "fluct"], _tails_rows(ens))


def _cmd_critical(cfg: dict) -> tuple[dict, tuple]:
    spec = _dist_spec(cfg)
    s_grid = np.linspace(0.0, 1.0, cfg["s_points"])
    ens = experiments.critical_preset(cfg["n"], spec, cfg["realizations"],
                                      seed=cfg["seed"], s_grid=s_grid)
    from scipy import stats as sps

    ks = sps.kstest(ens.center, "uniform").statistic
    summary = _summary(cfg, ks, 0.0, ens.lam.size, [])
    summary["params"]["skipped"] = ens.skipped
    summary["params"]["mean_slope_times_n"] = float(ens.slope.mean() * cfg["n"])
    return summary, (["sample_id", "s", "q", "fluct"], _tails_rows(ens))


def _cmd_temperature(cfg: dict) -> tuple[dict, tuple]:
    spec = _dist_spec(cfg)
    table = asymptotics.build_param_table(spec, seed=cfg["seed"] + 103,
                                          with_dos=True)
    res = experiments.temperature_profile(
        spec, cfg["n"], cfg["t0"], cfg["tn"], cfg["realizations"],
        seed=cfg["seed"], table=table)
    rows = list(zip(res.x_grid, res.measured, res.stderr, res.predicted))
    gap = float(np.max(np.abs(res.measured - res.predicted)))
    summary = _summary(cfg, gap, float(res.stderr.max()), cfg["realizations"], [])
    return summary, (["x", "measured", "stderr", "predicted"], rows)


def _cmd_figure(cfg: dict) -> tuple[dict, tuple]:
    fig = experiments.figure_data(cfg["kind"], seed=cfg["seed"],
                                  grid=cfg["grid"])
    rows = list(zip(fig.sites, fig.log_norm, fig.fit))
    summary = _summary(cfg, fig.slope, 0.0, fig.sites.size, [])
    summary["params"]["lambda"] = fig.lam
    summary["params"]["r_squared"] = fig.r_squared
    return summary, (["n", "log_norm", "fit"], rows)


_COMMANDS = {
    "spectrum": _cmd_spectrum,
    "periodic": _cmd_periodic,
    "dos": _cmd_dos,
    "lyapunov": _cmd_lyapunov,
    "invariant-measure": _cmd_invariant,
    "mixing": _cmd_mixing,
    "fb-verify": _cmd_fb_verify,
    "dtheta-check": _cmd_dtheta,
    "tails": _cmd_tails,
    "critical": _cmd_critical,
    "temperature": _cmd_temperature,
    "figure": _cmd_figure,
}

# (name, type, default, help); None defaults mean "must come from file/flag"
_COMMON_FIELDS = [
    ("dist", str, "uniform", "potential family: uniform or gaussian"),
    ("lo", float, 0.0, "uniform lower endpoint"),
    ("hi", float, 1.0, "uniform upper endpoint"),
    ("mean", float, 0.0, "gaussian mean"),
    ("std", float, 1.0, "gaussian std"),
    ("eps", float, 1.0, "potential scale factor"),
    ("seed", int, 1234, "master seed"),
    ("workers", int, 1, "worker processes"),
    ("out", str, None, "output file path"),
    ("format", str, None, "csv or json"),
]

_FIELDS: dict[str, list] = {
    "spectrum": [
        ("n", int, 100, "chain length"),
        ("tol", float, 1e-12, "eigenvalue bisection width"),
        ("eigenvector-index", int, None, "1-based eigenvalue index to dump"),
        ("eigenvector-out", str, "eigenvector.csv", "eigenvector CSV path"),
    ],
    "periodic": [
        ("n", int, 100, "ring length"),
        ("hi", float, 0.3, "uniform upper endpoint"),
        ("grid", int, 4096, "trace scan grid points"),
        ("tol", float, 1e-12, "root refinement width"),
    ],
    "dos": [
        ("n", int, 2000, "chain length for counting"),
        ("realizations", int, 50, "disorder realizations"),
        ("bins", int, 200, "lambda bins"),
        ("method", str, "both", "counting, invariant or both"),
        ("steps", int, 200000, "chain steps per lambda (invariant route)"),
        ("phase-bins", int, 256, "phase bins for the invariant measure"),
    ],
    "lyapunov": [
        ("lam", float, 0.5, "single lambda"),
        ("lam-min", float, None, "grid start (with lam-max/lam-count)"),
        ("lam-max", float, None, "grid end"),
        ("lam-count", int, 21, "grid size"),
        ("steps", int, 400000, "total steps"),
        ("batches", int, 64, "independent chains"),
    ],
    "invariant-measure": [
        ("lam", float, 0.5, "lambda"),
        ("bins", int, 256, "phase bins"),
        ("burnin", int, 2000, "discarded steps per chain"),
        ("steps", int, 1000000, "kept samples"),
    ],
    "mixing": [
        ("lam", float, 0.5, "lambda"),
        ("max-lag", int, 40, "largest lag"),
        ("steps", int, 1000000, "total chain steps"),
    ],
    "fb-verify": [
        ("n", int, 40, "chain length"),
        ("a", float, 0.5, "indicator lower edge"),
        ("b", float, 1.5, "indicator upper edge"),
        ("obs-site", int, 20, "phase site for the sin^2 observable"),
        ("realizations", int, 100000, "diagonalizations for the spectral side"),
        ("cells", int, 400, "lambda grid cells"),
        ("samples-per-cell", int, 2500, "replica pairs per lambda node"),
        ("bandwidths", "floats", [0.02, 0.01], "comma-separated kernel widths"),
    ],
    "dtheta-check": [
        ("n", int, 100, "chain length"),
        ("pairs", int, 100, "random (disorder, lambda) pairs"),
    ],
    "tails": [
        ("n", int, 500, "chain length"),
        ("realizations", int, 2000, "samples"),
        ("s-points", int, 21, "s grid size"),
    ],
    "critical": [
        ("n", int, 400, "chain length"),
        ("realizations", int, 1000, "samples"),
        ("s-points", int, 21, "s grid size"),
        ("dist", str, "gaussian", "potential family"),
        ("std", float, 1.0, "gaussian std"),
    ],
    "temperature": [
        ("n", int, 400, "chain length"),
        ("realizations", int, 500, "disorder realizations"),
        ("t0", float, 1.0, "left bath temperature"),
        ("tn", float, 2.0, "right bath temperature"),
    ],
    "figure": [
        ("kind", str, "fig1", "fig1 (dirichlet) or fig2 (periodic)"),
        ("grid", int, 6000, "periodic trace scan grid"),
    ],
}

_CSV_COMMANDS = {"spectrum", "periodic", "dos", "lyapunov", "fb-verify",
                 "tails", "critical", "temperature", "figure"}


def _parse_floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _field_defs(command: str):
    merged: dict[str, tuple] = {}
    for name, typ, default, help_ in _COMMON_FIELDS:
        merged[name] = (typ, default, help_)
    for name, typ, default, help_ in _FIELDS[command]:
        merged[name] = (typ, default, help_)
    return merged


def _load_config_file(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line {line!r} is not key=value")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def build_config(command: str, cli_values: dict, config_path: str | None) -> dict:
    """Merge defaults, config file, explicit flags and env overrides."""
    defs = _field_defs(command)
    cfg = {}
    for name, (typ, default, _) in defs.items():
        cfg[name.replace("-", "_")] = default

    if config_path:
        for key, raw in _load_config_file(config_path).items():
            if key not in defs:
                raise ValueError(f"unknown config key {key!r} for {command}")
            typ = defs[key][0]
            attr = key.replace("-", "_")
            cfg[attr] = _parse_floats(raw) if typ == "floats" else typ(raw)

    for key, val in cli_values.items():
        if val is not None:
            cfg[key] = val

    if os.environ.get("ANDERSON_SEED") is not None:
        cfg["seed"] = int(os.environ["ANDERSON_SEED"])
    cfg["workers"] = resolve_workers(cfg.get("workers"))

    if cfg.get("format") is None:
        cfg["format"] = "csv" if command in _CSV_COMMANDS else "json"
    if cfg["format"] not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    if command not in _CSV_COMMANDS and cfg["format"] == "csv":
        raise ValueError(f"{command} has no CSV schema; use --format json")
    if cfg.get("out") is None:
        ext = "csv" if cfg["format"] == "csv" else "json"
        cfg["out"] = f"{command.replace('-', '_')}.{ext}"
    cfg["command"] = command

    for key in ("n", "realizations", "bins", "steps", "batches", "cells",
                "samples_per_cell", "pairs", "grid", "s_points", "max_lag",
                "workers", "lam_count", "phase_bins", "burnin"):
        if cfg.get(key) is not None and cfg[key] <= 0:
            raise ValueError(f"{key} must be positive, got {cfg[key]}")
    return cfg


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anderson1d",
        description="Monte Carlo toolkit for the 1D random chain: spectra, "
                    "phase processes and their forward-backward identity.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command in _COMMANDS:
        p = sub.add_parser(command)
        p.add_argument("--config", type=str, default=None,
                       help="flat key=value config file; flags override it")
        for name, (typ, default, help_) in _field_defs(command).items():
            kwargs: dict = {"default": None, "help": f"{help_} (default {default})"}
            if typ == "floats":
                kwargs["type"] = _parse_floats
            else:
                kwargs["type"] = typ
            p.add_argument(f"--{name}", dest=name.replace("-", "_"), **kwargs)
    return parser


def run(argv=None) -> int:
    parser = _make_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config")
    try:
        cfg = build_config(command, args, config_path)
        summary, csv_payload = _COMMANDS[command](cfg)
        _emit(cfg, summary, csv_payload)
    except Exception as exc:  # noqa: BLE001 - machine-readable error contract
        err = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
