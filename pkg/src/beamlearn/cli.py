"""Command line entry point: ``beamlearn {train,evaluate,compare,check}``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import checks
from .config import PRESETS, RunConfig, apply_preset, dump_config, load_config
from .data_collection import parse_strategy
from .diagnostics import alpha_hat, azuma_eta, empirical_regret, stopreset_bound
from .errors import BeamLearnError, ConfigurationError
from .learner import build_problem, evaluate, learn, make_datasets, mixture_cost, write_metrics
from .losses import LOSSES
from .scoring import load_params, save_params

__all__ = ["main", "cmd_train", "cmd_evaluate", "cmd_compare", "cmd_check", "COMPARE_COLUMNS"]

COMPARE_COLUMNS = (
    "preset",
    "loss",
    "strategy",
    "k",
    "seed",
    "valid_terminal_cost",
    "best_round",
    "train_cost_increase_rate",
    "alpha_hat",
    "mean_surrogate_loss",
)


def _config(args) -> RunConfig:
    cfg = load_config(args.config, seed=args.seed, delta=args.delta, out=args.out)
    if getattr(args, "preset", None):
        cfg = apply_preset(cfg, args.preset)
    return cfg


def _num(x):
    return None if x is None or (isinstance(x, float) and not np.isfinite(x)) else float(x)


def cmd_train(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    train, valid = make_datasets(cfg)
    problem = build_problem(cfg)
    res = learn(train, valid, cfg, problem, checkpoint_dir=out / "checkpoints", keep_thetas=cfg.mixture_eval)
    write_metrics(res.history, out / "metrics.csv")
    save_params(out / "final_model.bin", res.state.best_theta)
    save_params(out / "last_model.bin", res.state.theta)

    tracker = res.tracker
    report = empirical_regret(tracker, cfg.loss, problem.dim, extra_candidates=[res.state.theta])
    with open(out / "cost_curve.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("round", "valid_terminal_cost"))
        w.writerows((t, repr(c)) for t, c in res.validation)
    with open(out / "regret_curve.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("round", "gamma_hat"))
        w.writerows((r["round"], repr(r["gamma_hat"])) for r in res.history if "gamma_hat" in r)
        if not cfg.regret_every or tracker.rounds % cfg.regret_every:
            w.writerow((tracker.rounds, repr(report.gamma_hat)))

    kind = parse_strategy(cfg.strategy).kind
    summary = {
        "valid_terminal_cost": _num(res.state.best_cost),
        "best_round": res.state.best_round,
        "rounds": tracker.rounds,
        "train_cost_increase_rate": float(np.mean(np.asarray(tracker.cost_increases) > 0)),
        "mean_surrogate_loss": float(np.mean(tracker.losses)),
        "gamma_hat": report.gamma_hat,
        "epsilon_hat": report.epsilon_hat,
        "regret_certified": report.certified,
        "alpha_hat": _num(alpha_hat(tracker)),
        "u": tracker.u,
        "eta": azuma_eta(tracker.u, cfg.delta, tracker.rounds),
        "delta": cfg.delta,
        "stopreset_bound": stopreset_bound(tracker, cfg.delta) if kind in ("stop", "reset") else None,
        "mixture_valid_terminal_cost": _num(mixture_cost(problem, valid, res.thetas, cfg.k, (cfg.seed, 1)))
        if cfg.mixture_eval else None,
        "skipped_updates": [vars(s) for s in res.state.optimizer.skipped],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out / "config.txt").write_text(dump_config(cfg))
    print(f"selected round {res.state.best_round}: validation terminal cost {summary['valid_terminal_cost']}")
    return 0


def cmd_evaluate(cfg: RunConfig, model: str | None = None) -> int:
    path = Path(model) if model else Path(cfg.out) / "final_model.bin"
    theta = load_params(path)
    if theta.size != cfg.feature_dim:
        raise ConfigurationError(f"model has dimension {theta.size}, config expects {cfg.feature_dim}")
    _, valid = make_datasets(cfg)
    cost = evaluate(build_problem(cfg), valid, theta, cfg.k)
    result = {"model": str(path), "examples": len(valid), "k": cfg.k, "mean_terminal_cost": cost}
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    (Path(cfg.out) / "evaluation.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(f"mean terminal cost over {len(valid)} examples: {cost}")
    return 0


def _run_cell(cell):
    preset, cfg = cell
    train, valid = make_datasets(cfg)
    res = learn(train, valid, cfg)
    tr = res.tracker
    return {
        "preset": preset,
        "loss": cfg.loss,
        "strategy": cfg.strategy,
        "k": cfg.k,
        "seed": cfg.seed,
        "valid_terminal_cost": repr(res.state.best_cost),
        "best_round": res.state.best_round,
        "train_cost_increase_rate": repr(float(np.mean(np.asarray(tr.cost_increases) > 0))),
        "alpha_hat": "" if np.isnan(alpha_hat(tr)) else repr(alpha_hat(tr)),
        "mean_surrogate_loss": repr(float(np.mean(tr.losses))),
    }


def _workers() -> int:
    raw = os.environ.get("BEAMLEARN_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"BEAMLEARN_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def cmd_compare(cfg: RunConfig, losses=None, strategies=None, presets=None) -> int:
    cells = []
    if presets:
        for p in presets:
            cells.append((p, apply_preset(cfg, p)))
    else:
        losses = [cfg.loss] if losses is None else losses
        strategies = [cfg.strategy] if strategies is None else strategies
        if not losses or not strategies:
            raise ConfigurationError("compare needs at least one loss and one strategy")
        for s in strategies:
            for name in losses:
                cells.append(("", cfg.replace(loss=name, strategy=s)))
    workers = min(_workers(), len(cells))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_run_cell, cells))
    else:
        rows = [_run_cell(c) for c in cells]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COMPARE_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        label = r["preset"] or f"{r['strategy']}+{r['loss']}"
        print(f"{label:40s} k={r['k']:<3} valid cost {r['valid_terminal_cost']}")
    return 0


def cmd_check(quick: bool = False) -> int:
    results = checks.run_all(quick=quick)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:{width}s}  {'PASS' if r.passed else 'FAIL'}  {r.seconds:7.2f}s  {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed: " + ", ".join(failed))
        return 1
    return 0


def _csv_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamlearn", description="Train and check beam search policies.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="flat key = value run configuration")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="run seed (overrides the config)")
        p.add_argument("--delta", type=float, help="confidence level for the bounds")

    p = sub.add_parser("train", help="train one configuration")
    common(p)
    p.add_argument("--preset", choices=sorted(PRESETS), help="named strategy/loss/width combination")
    p = sub.add_parser("evaluate", help="decode the validation split with a saved model")
    common(p)
    p.add_argument("--model", help="parameter file (default OUT/final_model.bin)")
    p = sub.add_parser("compare", help="sweep losses x strategies or presets")
    common(p)
    p.add_argument("--losses", type=_csv_list, help=f"comma separated, from {', '.join(LOSSES)}")
    p.add_argument("--strategies", type=_csv_list, help="comma separated, e.g. continue,reset,interp:0.5")
    p.add_argument("--preset", type=_csv_list, help=f"comma separated, from {', '.join(PRESETS)}")
    p = sub.add_parser("check", help="run the verification suite")
    p.add_argument("--quick", action="store_true", help="reduced sizes")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "check":
            return cmd_check(args.quick)
        if args.command == "compare":
            cfg = load_config(args.config, seed=args.seed, delta=args.delta, out=args.out)
            if args.losses is not None and not args.losses:
                raise ConfigurationError("--losses is empty")
            if args.strategies is not None and not args.strategies:
                raise ConfigurationError("--strategies is empty")
            for s in args.strategies or []:
                parse_strategy(s)
            for name in args.losses or []:
                if name not in LOSSES:
                    raise ConfigurationError(f"unknown loss {name!r}")
            if args.preset is not None and not args.preset:
                raise ConfigurationError("--preset is empty")
            for name in args.preset or []:
                if name not in PRESETS:
                    raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
            return cmd_compare(cfg, args.losses, args.strategies, args.preset)
        cfg = _config(args)
        if args.command == "train":
            return cmd_train(cfg)
        return cmd_evaluate(cfg, args.model)
    except ConfigurationError as exc:
        parser.print_usage(sys.stderr)
        print(f"beamlearn: error: {exc}", file=sys.stderr)
        return 2
    except (BeamLearnError, OSError) as exc:
        print(f"beamlearn: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
