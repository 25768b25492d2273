"""Batch experiment runner.

Every invocation resolves its settings from (in increasing precedence)
schema defaults, an optional `--config key: value` file, and command-line
flags, then writes CSV outputs plus a run manifest into one directory.
The manifest is itself a valid config file, so

    scoreprior sim-scale --config <run-dir>/manifest.txt

reproduces the run byte for byte (timestamps live only in comments).
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ConfigError, ScorepriorError
from .evaluate import (
    ExperimentReport,
    McmcConfig,
    ReplicationPlan,
    format_float,
    galaxy_dic_study,
    mixture_repeat_study,
    mixture_single_run,
    run_replication,
    schools_study,
    write_csv,
)
from .grids import gaussian_grid, lomax_grid, uniform_grid
from .models import load_galaxy_data
from .priors import (
    ScorePriorPositive,
    ScorePriorReal,
    invariance_check,
    prior_score_residual,
)
from .scorerule import (
    ScoreFunction,
    euler_lagrange_residual,
    hyvarinen_score,
    new_prior_score,
    solve_score_zero,
)

OUTDIR_ENV = "SCOREPRIOR_OUTDIR"

_SCHEDULE_SCALAR = {"n_iter": 6000, "burn_in": 1000, "thin": 10}
_SCHEDULE_MIXTURE = {"n_iter": 60000, "burn_in": 10000, "thin": 100}

# key -> (type, default); "experiment" pins a config file to its subcommand
SCHEMAS = {
    "score-check": {},
    "prior-table": {"a": (float, 1.0), "x_max": (float, 10.0),
                    "points": (int, 101)},
    "sim-scale": {"sigma": (float, 1.0), "prior": (str, "score"),
                  "M": (int, 250), "n": (int, 100), "seed": (int, 0),
                  **{k: (int, v) for k, v in _SCHEDULE_SCALAR.items()}},
    "sim-location": {"mu": (float, 5.0), "prior": (str, "score"),
                     "M": (int, 250), "n": (int, 100), "seed": (int, 0),
                     **{k: (int, v) for k, v in _SCHEDULE_SCALAR.items()}},
    "mixture-single": {"seed": (int, 0), "n": (int, 200),
                       **{k: (int, v) for k, v in _SCHEDULE_MIXTURE.items()}},
    "mixture-repeat": {"seed": (int, 0), "M": (int, 20),
                       **{k: (int, v) for k, v in _SCHEDULE_MIXTURE.items()}},
    "galaxy-dic": {"seed": (int, 0), "n_seeds": (int, 1),
                   "data_file": (str, ""),
                   **{k: (int, v) for k, v in _SCHEDULE_MIXTURE.items()}},
    "schools": {"seed": (int, 0), "prior": (str, "score"),
                **{k: (int, v) for k, v in _SCHEDULE_MIXTURE.items()}},
}
for extra in SCHEMAS.values():
    extra["experiment"] = (str, "")


def config_load(path) -> dict[str, str]:
    """Read a `key: value` file; full-line # comments and blanks ignored."""
    out: dict[str, str] = {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition(":")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{lineno}: expected 'key: value', got {line!r}")
        out[key.strip()] = value.strip()
    return out


def _parse_value(key: str, raw: str, typ):
    try:
        if typ is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(
            f"config key {key!r}: expected {typ.__name__}, got {raw!r}"
        ) from None


def resolve_config(experiment: str, file_vals: dict[str, str],
                   flag_vals: dict[str, str]) -> dict:
    schema = SCHEMAS[experiment]
    unknown = sorted(set(file_vals) - set(schema))
    if unknown:
        raise ConfigError(
            f"unknown config keys for {experiment}: {', '.join(unknown)}"
        )
    out = {}
    for key, (typ, default) in schema.items():
        if key in flag_vals and flag_vals[key] is not None:
            out[key] = _parse_value(key, str(flag_vals[key]), typ)
        elif key in file_vals:
            out[key] = _parse_value(key, file_vals[key], typ)
        else:
            out[key] = default
    pinned = out.pop("experiment")
    if pinned and pinned != experiment:
        raise ConfigError(
            f"config file belongs to experiment {pinned!r}, not {experiment!r}"
        )
    return out


def _manifest(out_dir: Path, experiment: str, cfg: dict, wall: float,
              extra_comments: dict | None = None) -> None:
    lines = [
        "# run manifest; rerun with:",
        f"#   scoreprior {experiment} --config {out_dir / 'manifest.txt'}",
        f"# created_unix: {int(time.time())}",
        f"# wall_time_s: {wall:.3f}",
    ]
    for k, v in (extra_comments or {}).items():
        lines.append(f"# {k}: {v}")
    lines.append(f"experiment: {experiment}")
    for k, v in cfg.items():
        if isinstance(v, bool):
            v = str(v).lower()
        elif isinstance(v, float):
            v = format_float(v)
        lines.append(f"{k}: {v}")
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")


def _mcmc_config(cfg: dict, seed: int | None = None) -> McmcConfig:
    return McmcConfig(n_iter=cfg["n_iter"], burn_in=cfg["burn_in"],
                      thin=cfg["thin"], seed=cfg["seed"] if seed is None else seed)


# ---------------------------------------------------------------------------
# experiment runners (one per subcommand)
# ---------------------------------------------------------------------------

def _run_score_check(cfg: dict, out_dir: Path) -> dict:
    rows = []

    def add(name: str, value: float, threshold: float, larger_is_pass=False):
        ok = value > threshold if larger_is_pass else value <= threshold
        rows.append((name, float(value), float(threshold), int(ok)))

    for a in (0.5, 1.0, 10.0):
        add(f"score_zero_identity_a={a}", prior_score_residual(a), 1e-12)
    sol = solve_score_zero(1.0, 20.0, 1e-3)
    add("ode_reconstruction_supnorm",
        float(np.max(np.abs(sol.q - 1.0 / (1.0 + sol.x) ** 2))), 1e-6)

    hyv = ScoreFunction(order=2, provenance="gradient matching",
                        pointwise=lambda x, q, q1, q2: hyvarinen_score(q, q1, q2))
    g = gaussian_grid(0.0, 1.0, uniform_grid(-4.0, 4.0, 8001), n_derivs=2)
    add("euler_lagrange_gradient_matching",
        float(np.nanmax(np.abs(euler_lagrange_residual(hyv, g)))), 1e-3)
    newscore = ScoreFunction(order=2, provenance="heavy tail",
                             pointwise=lambda x, q, q1, q2: new_prior_score(q, q1, q2))
    lg = lomax_grid(1.0, uniform_grid(0.1, 20.0, 19901), n_derivs=2)
    add("euler_lagrange_heavy_tail",
        float(np.nanmax(np.abs(euler_lagrange_residual(newscore, lg)))), 1e-3)
    bogus = ScoreFunction(order=2, provenance="counterexample",
                          pointwise=lambda x, q, q1, q2: q)
    add("euler_lagrange_counterexample",
        float(np.nanmax(np.abs(euler_lagrange_residual(bogus, g)))), 1e-1,
        larger_is_pass=True)

    add("invariance_a=1", invariance_check(1.0, np.linspace(0.01, 50, 2000)),
        1e-12)
    add("invariance_a=2", invariance_check(2.0, np.linspace(0.01, 50, 2000)),
        1e-2, larger_is_pass=True)

    write_csv(out_dir / "score_check.csv",
              ("check", "value", "threshold", "ok"), rows)
    n_bad = sum(1 for r in rows if not r[3])
    if n_bad:
        raise ScorepriorError(f"{n_bad} score checks failed; see score_check.csv")
    return {"checks": len(rows)}


def _run_prior_table(cfg: dict, out_dir: Path) -> dict:
    a = cfg["a"]
    if a <= 0:
        raise ConfigError("a must be positive")
    if cfg["points"] < 2 or cfg["x_max"] <= 0:
        raise ConfigError("need points >= 2 and x_max > 0")
    pos = ScorePriorPositive(a)
    real = ScorePriorReal(a)
    x = np.linspace(0.0, cfg["x_max"], cfg["points"])
    rows = [(float(xi), float(pos.pdf(xi)), float(pos.cdf(xi)),
             float(real.pdf(xi)), float(real.cdf(xi))) for xi in x]
    write_csv(out_dir / "prior_table.csv",
              ("x", "pdf_positive", "cdf_positive", "pdf_real", "cdf_real"),
              rows)
    qs = (0.05, 0.25, 0.5, 0.75, 0.95)
    write_csv(out_dir / "prior_quantiles.csv",
              ("u", "quantile_positive", "quantile_real"),
              [(u, float(pos.quantile(u)), float(real.quantile(u))) for u in qs])
    inv = invariance_check(a, np.linspace(0.01, 50, 2000))
    write_csv(out_dir / "invariance.csv", ("a", "max_discrepancy"),
              [(float(a), float(inv))])
    return {"a": a}


def _write_replication(report: ExperimentReport, out_dir: Path) -> dict:
    report.to_csv(out_dir / "replicates.csv")
    s = report.summary()
    write_csv(out_dir / "summary.csv", tuple(s.keys()),
              [tuple(float(v) if isinstance(v, float) else v
                     for v in s.values())])
    return s


def _run_sim_scale(cfg: dict, out_dir: Path) -> dict:
    plan = ReplicationPlan(family="normal_scale", prior=cfg["prior"],
                           truth=cfg["sigma"], M=cfg["M"], n=cfg["n"],
                           base_seed=cfg["seed"], mcmc=_mcmc_config(cfg))
    return _write_replication(run_replication(plan), out_dir)


def _run_sim_location(cfg: dict, out_dir: Path) -> dict:
    plan = ReplicationPlan(family="lognormal_location", prior=cfg["prior"],
                           truth=cfg["mu"], M=cfg["M"], n=cfg["n"],
                           base_seed=cfg["seed"], mcmc=_mcmc_config(cfg))
    return _write_replication(run_replication(plan), out_dir)


def _run_mixture_single(cfg: dict, out_dir: Path) -> dict:
    res = mixture_single_run(cfg["seed"], _mcmc_config(cfg), n=cfg["n"])
    write_csv(out_dir / "mixture_single.csv",
              ("parameter", "truth", "post_mean", "lo95", "hi95", "inside"),
              res.rows())
    res.chain.to_csv(out_dir / "chain.csv")
    return {"all_inside": res.all_inside}


def _run_mixture_repeat(cfg: dict, out_dir: Path) -> dict:
    res = mixture_repeat_study(cfg["seed"], _mcmc_config(cfg), M=cfg["M"])
    write_csv(out_dir / "repeat_cells.csv",
              ("k", "component", "n", "true_mean", "iqr_post_mean",
               "iqr_post_sd"), res.rows())
    frac = res.monotone_fraction()
    write_csv(out_dir / "summary.csv", ("monotone_fraction", "M"),
              [(float(frac), res.M)])
    return {"monotone_fraction": frac}


def _run_galaxy_dic(cfg: dict, out_dir: Path) -> dict:
    data = load_galaxy_data(cfg["data_file"] or None)
    seeds = range(cfg["seed"], cfg["seed"] + cfg["n_seeds"])
    res = galaxy_dic_study(data.values, seeds, _mcmc_config(cfg),
                           sha256=data.sha256)
    write_csv(out_dir / "galaxy_dic.csv", ("seed", "k", "dic"), res.rows())
    counts = res.argmin_counts()
    write_csv(out_dir / "summary.csv", ("k", "argmin_count"),
              sorted(counts.items()))
    return {"argmin_counts": counts, "dataset_sha256": data.sha256}


def _run_schools(cfg: dict, out_dir: Path) -> dict:
    res = schools_study(cfg["seed"], cfg["prior"], _mcmc_config(cfg))
    write_csv(out_dir / "schools.csv",
              ("prior", "post_mean", "lo95", "hi95", "median"),
              [(res.prior, res.mean, res.lo95, res.hi95, res.median)])
    res.chain.to_csv(out_dir / "chain.csv")
    return {"post_mean": res.mean}


_RUNNERS = {
    "score-check": _run_score_check,
    "prior-table": _run_prior_table,
    "sim-scale": _run_sim_scale,
    "sim-location": _run_sim_location,
    "mixture-single": _run_mixture_single,
    "mixture-repeat": _run_mixture_repeat,
    "galaxy-dic": _run_galaxy_dic,
    "schools": _run_schools,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scoreprior",
        description="Heavy-tailed score-based priors: checks and studies.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None,
                       help="key: value file; flags override it")
        p.add_argument("--out-dir", default=None,
                       help=f"output directory (default ${OUTDIR_ENV} or ./runs)")
        for key in schema:
            if key == "experiment":
                continue
            p.add_argument(f"--{key.replace('_', '-')}", dest=key,
                           default=None, metavar=key.upper())
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    experiment = args.experiment
    try:
        file_vals = config_load(args.config) if args.config else {}
        flag_vals = {k: getattr(args, k) for k in SCHEMAS[experiment]
                     if k != "experiment" and getattr(args, k, None) is not None}
        cfg = resolve_config(experiment, file_vals, flag_vals)
        base = args.out_dir or os.environ.get(OUTDIR_ENV) or "runs"
        out_dir = Path(base) / experiment
        out_dir.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        info = _RUNNERS[experiment](cfg, out_dir)
        wall = time.perf_counter() - t0
        extra = {}
        if "dataset_sha256" in info:
            extra["dataset_sha256"] = info["dataset_sha256"]
        _manifest(out_dir, experiment, cfg, wall, extra)
        print(f"{experiment}: wrote {out_dir} ({wall:.1f}s) {info}")
        return 0
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        print("the galaxy study needs the 82-velocity data file; pass "
              "--data-file PATH or reinstall the package so the bundled "
              "copy under scoreprior/data/ is present", file=sys.stderr)
        return 2
    except (ScorepriorError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
