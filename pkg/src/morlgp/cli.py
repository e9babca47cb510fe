"""Command-line entry point: `morl run <kind> [flags]`.

Experiments are described by an optional declarative JSON config with
sections (environment, gp, sweep, output); flags override file values. All
artifacts are computed first and then written atomically, so a failed run
leaves no partial report files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import plots, report
from .envs import GridworldSpec, ObjectworldSpec, PendulumSpec, objectworld_layout, value_grid
from .harness import (
    GPSettings,
    default_gridworld_config,
    default_objectworld_config,
    default_pendulum_config,
    run_objectworld_suite,
    run_pendulum_suite,
    run_sweep,
    verify_bounds,
)
from .mdp import solve

KINDS = (
    "gridworld-living",
    "gridworld-negative",
    "gridworld-positive",
    "objectworld",
    "pendulum",
    "verify-bounds",
)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    if not os.path.isfile(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"config file {path} must contain a JSON object")
    return doc


def _apply_overrides(spec, overrides: dict):
    """Replace dataclass fields from a config section, rejecting unknown keys."""
    if not overrides:
        return spec
    names = {f.name for f in dataclasses.fields(spec)}
    unknown = set(overrides) - names
    if unknown:
        raise ValueError(
            f"unknown {type(spec).__name__} keys: {sorted(unknown)}"
        )
    coerced = {
        k: tuple(map(tuple, v)) if k == "wall_cells" else
        tuple(v) if isinstance(v, list) else v
        for k, v in overrides.items()
    }
    return dataclasses.replace(spec, **coerced)


def _gp_settings(cfg: dict, args) -> GPSettings:
    gp = GPSettings()
    gp = _apply_overrides(gp, cfg.get("gp", {}))
    if args.kernel_nu is not None:
        gp = dataclasses.replace(gp, nu=args.kernel_nu)
    if args.noise is not None:
        gp = dataclasses.replace(gp, noise_variance=args.noise)
    if args.length_scale is not None:
        gp = dataclasses.replace(gp, length_scale=args.length_scale)
    return gp


def _resolve_out_dir(cfg: dict, args) -> str:
    out = args.out or cfg.get("output", {}).get("dir") \
        or os.environ.get("MORL_OUT") or "morl_out"
    os.makedirs(out, exist_ok=True)
    return out


def _sweep_overrides(config, cfg: dict, args):
    sweep = cfg.get("sweep", {})
    updates = {}
    if "train_weights" in sweep:
        updates["train_weights"] = tuple(sweep["train_weights"])
    if "eval_weights" in sweep:
        updates["eval_weights"] = tuple(sweep["eval_weights"])
    if args.seed is not None:
        updates["seed"] = args.seed
    elif "seed" in sweep:
        updates["seed"] = sweep["seed"]
    if args.tol is not None:
        updates["solver_tol"] = args.tol
    if updates:
        config = dataclasses.replace(config, **updates)
    config.validate()
    return config


def _grid_artifacts(kind: str, spec, config, reports, out: str, focus_weight):
    """CSV grids + rendered figures for the grid-based suites."""
    focus = next((r for r in reports if r.weight == focus_weight), reports[0])
    if isinstance(spec, GridworldSpec):
        to_grid = lambda vals: value_grid(spec, vals)
    else:
        to_grid = lambda vals: np.asarray(vals, dtype=np.float64).reshape(
            spec.n, spec.n)
    actual = to_grid(focus.v_actual)
    predicted = to_grid(focus.v_predicted)
    policy = to_grid(focus.policy_actual.astype(np.float64))

    files = {
        "report.csv": report.emit_table(reports),
        "report.json": report.reports_to_json(reports),
        "values_actual.csv": report.grid_to_csv(actual),
        "values_predicted.csv": report.grid_to_csv(predicted),
        "policy.csv": report.grid_to_csv(policy),
    }
    if isinstance(spec, ObjectworldSpec):
        files["objects.json"] = json.dumps(objectworld_layout(spec), indent=2)
    for name, text in files.items():
        report.atomic_write_text(os.path.join(out, name), text)
    plots.save_value_heatmaps(os.path.join(out, "values.png"),
                              actual, predicted, focus.weight)
    plots.save_policy_plot(os.path.join(out, "policy.png"),
                           policy, actual, focus.weight)


def _run(args) -> int:
    cfg = _load_config(args.config)
    out = _resolve_out_dir(cfg, args)
    env_cfg = cfg.get("environment", {})
    gp = _gp_settings(cfg, args)
    kind = args.kind

    if kind.startswith("gridworld-"):
        spec = _apply_overrides(GridworldSpec(), env_cfg)
        if args.gamma is not None:
            spec = dataclasses.replace(spec, gamma=args.gamma)
        config = default_gridworld_config(kind.split("-", 1)[1], spec, gp)
        config = _sweep_overrides(config, cfg, args)
        reports = run_sweep(config)
        focus = cfg.get("sweep", {}).get("focus_weight", config.eval_weights[0])
        _grid_artifacts(kind, spec, config, reports, out, focus)
        sys.stdout.write(report.emit_table(reports))
        return 0

    if kind == "objectworld":
        spec = _apply_overrides(ObjectworldSpec(), env_cfg)
        if args.gamma is not None:
            spec = dataclasses.replace(spec, gamma=args.gamma)
        config = default_objectworld_config(spec, gp)
        config = _sweep_overrides(config, cfg, args)
        reports = run_objectworld_suite(config)
        focus = cfg.get("sweep", {}).get("focus_weight", config.eval_weights[0])
        _grid_artifacts(kind, spec, config, reports, out, focus)
        sys.stdout.write(report.emit_table(reports))
        return 0

    if kind == "pendulum":
        spec = _apply_overrides(PendulumSpec(), env_cfg)
        if args.gamma is not None:
            spec = dataclasses.replace(spec, gamma=args.gamma)
        stride = cfg.get("sweep", {}).get("train_state_stride", 3)
        config = default_pendulum_config(spec, gp, train_state_stride=stride)
        config = _sweep_overrides(config, cfg, args)
        n_episodes = args.episodes or cfg.get("sweep", {}).get("episodes", 5)
        reports = run_pendulum_suite(config, n_episodes=n_episodes)
        files = {
            "report.csv": report.episode_summary_csv(reports),
            "report.json": report.episode_reports_to_json(reports),
            "episode_diffs.csv": report.episode_diffs_csv(reports),
        }
        for name, text in files.items():
            report.atomic_write_text(os.path.join(out, name), text)
        plots.save_episode_boxplot(os.path.join(out, "boxplot.png"), reports)
        sys.stdout.write(report.episode_summary_csv(reports))
        return 0

    if kind == "verify-bounds":
        spec = _apply_overrides(GridworldSpec(), env_cfg)
        if args.gamma is not None:
            spec = dataclasses.replace(spec, gamma=args.gamma)
        from .envs import build_gridworld

        env_mdp, _ = build_gridworld(spec)
        seed = args.seed if args.seed is not None else cfg.get("sweep", {}).get("seed", 0)
        n_pairs = args.pairs or cfg.get("sweep", {}).get("pairs", 100)
        bounds = verify_bounds(env_mdp, n_pairs=n_pairs, seed=seed,
                                 tol=args.tol or 1e-9)
        files = {
            "report.csv": report.bounds_csv(bounds),
            "report.json": report.bounds_to_json(bounds),
        }
        for name, text in files.items():
            report.atomic_write_text(os.path.join(out, name), text)
        plots.save_bounds_scatter(os.path.join(out, "bounds.png"), bounds)
        n_pass = sum(p.passed for p in bounds.pairs)
        sys.stdout.write(
            f"bound pairs passed: {n_pass}/{len(bounds.pairs)}; "
            f"convexity violations: {bounds.convexity_violations}\n"
        )
        return 0 if bounds.all_passed else 1

    raise ValueError(f"unknown experiment kind {kind!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="morl",
        description="Interpolate optimal value functions across reward weights.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run one experiment suite")
    run_p.add_argument("kind", choices=KINDS)
    run_p.add_argument("--config", help="declarative JSON config file")
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--out", help="output directory (default $MORL_OUT or ./morl_out)")
    run_p.add_argument("--gamma", type=float)
    run_p.add_argument("--kernel-nu", type=float, dest="kernel_nu")
    run_p.add_argument("--noise", type=float)
    run_p.add_argument("--length-scale", type=float, dest="length_scale")
    run_p.add_argument("--tol", type=float)
    run_p.add_argument("--pairs", type=int, help="weight pairs for verify-bounds")
    run_p.add_argument("--episodes", type=int, help="episodes for the pendulum suite")
    args = parser.parse_args(argv)

    try:
        return _run(args)
    except Exception as exc:  # single-line diagnostic, nonzero exit
        print(f"morl: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
