"""Command line entry point: data generation, training, evaluation, checks.

Commands exit 0 on success, 1 with a JSON failure report when a verification
tolerance is violated, and 2 on usage errors. Report-producing commands write
delimited output (CSV / JSON) plus a rendered figure alongside it.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import report
from .autodiff import load_checkpoint, save_checkpoint
from .config import RunConfig, dump_run_config, load_run_config
from .errors import LlocaError
from .lloca_model import LLoCaTransformer, ModelConfig
from .toy_task import (Standardization, TrainConfig, generate_dataset,
                       load_dataset, standardize, train_loop)
from .verify import benchmark, equivariance_checks, gradient_checks


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _print_checks(checks) -> None:
    for c in checks:
        status = "pass" if c["pass"] else "FAIL"
        print(f"  [{status}] {c['stage']}: {c['metric']} = {c['value']:.3e} "
              f"(tolerance {c['tolerance']:.1e})")


def _check_config() -> ModelConfig:
    # Compact configuration: exercises every code path, runs in seconds.
    return ModelConfig(hidden_dim=32, num_heads=2, num_blocks=2,
                       n_scalars=2, frames_hidden=16)


def cmd_gen_data(args) -> int:
    rng = np.random.default_rng(args.seed)
    data = generate_dataset(rng, args.events, n_particles=args.particles,
                            momentum_scale=args.momentum_scale)
    from .toy_task import save_dataset
    save_dataset(args.out, data)
    print(f"wrote {args.events} events ({args.particles} particles) to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    data = load_dataset(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    model = LLoCaTransformer(cfg.model, seed=cfg.seed)
    policy = cfg.policy()
    result = train_loop(data, model, policy, cfg.train)

    save_checkpoint(out_dir / "checkpoint.bin", model.store.values())
    cfg.stats = result.stats
    (out_dir / "run.cfg").write_text(dump_run_config(cfg))
    _write_csv(out_dir / "metrics.csv",
               ["iteration", "train_mse", "val_mse", "lr"], result.history)
    report.training_curves(result.history, out_dir / "training_curves.png")
    print(f"test MSE (standardized): {result.test_mse:.6e}")
    print(f"artifacts in {out_dir}")
    return 0


def _load_model(checkpoint_path) -> tuple[LLoCaTransformer, RunConfig]:
    checkpoint_path = Path(checkpoint_path)
    cfg = load_run_config(checkpoint_path.parent / "run.cfg")
    model = LLoCaTransformer(cfg.model, seed=cfg.seed)
    model.store.load_values(load_checkpoint(checkpoint_path))
    return model, cfg


def cmd_eval(args) -> int:
    model, cfg = _load_model(args.checkpoint)
    if cfg.stats is None:
        raise LlocaError("run.cfg next to the checkpoint has no standardization")
    data = load_dataset(args.data)
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent
    out_dir.mkdir(parents=True, exist_ok=True)

    policy = cfg.policy().eval_policy()
    y_std = standardize(data.targets, cfg.stats)
    preds = np.empty(len(data))
    batch = cfg.train.batch_size
    for lo in range(0, len(data), batch):
        hi = min(lo + batch, len(data))
        out = model.forward(data.particle_set(slice(lo, hi)), policy)
        preds[lo:hi] = out.value if hasattr(out, "value") else out
    mse = float(np.mean((preds - y_std) ** 2))

    rows = [(i, y_std[i], preds[i], preds[i] - y_std[i]) for i in range(len(data))]
    _write_csv(out_dir / "residuals.csv",
               ["event", "target_std", "pred_std", "residual"], rows)
    report.residual_figure(y_std, preds, out_dir / "residuals.png")
    print(f"eval MSE (standardized): {mse:.6e} over {len(data)} events")
    return 0


def cmd_check_equivariance(args) -> int:
    if args.checkpoint:
        model, cfg = _load_model(args.checkpoint)
        policy = cfg.policy().eval_policy()
    else:
        model = LLoCaTransformer(_check_config(), seed=args.seed)
        from .frames_net import FramePolicy
        policy = FramePolicy.parse("learned-pd")
    checks = equivariance_checks(model, policy, trials=args.trials,
                                 beta_max=args.beta_max, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ok = all(c["pass"] for c in checks)
    _write_json(out_dir / "equivariance_report.json",
                {"pass": ok, "checks": checks})
    report.violation_figure(checks, out_dir / "equivariance_report.png")
    print(f"equivariance checks ({args.trials} trials, beta_max {args.beta_max}):")
    _print_checks(checks)
    return 0 if ok else 1


def cmd_check_gradients(args) -> int:
    checks = gradient_checks(trials=args.trials, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ok = all(c["pass"] for c in checks)
    _write_json(out_dir / "gradient_report.json", {"pass": ok, "checks": checks})
    report.violation_figure([c for c in checks if c["tolerance"] > 0],
                            out_dir / "gradient_report.png")
    print(f"gradient checks ({args.trials} trials):")
    _print_checks(checks)
    return 0 if ok else 1


def cmd_bench(args) -> int:
    cfg = load_run_config(args.config) if args.config else RunConfig(model=_check_config())
    model = LLoCaTransformer(cfg.model, seed=cfg.seed)
    timings = benchmark(model, cfg.policy(), cfg.train.batch_size,
                        repeats=args.repeats, seed=cfg.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "bench.json", timings)
    report.benchmark_figure(
        {k: v for k, v in timings.items() if k.endswith("_ms")},
        out_dir / "bench.png")
    for key, value in timings.items():
        print(f"  {key}: {value:.3f}" if isinstance(value, float) else f"  {key}: {value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lloca",
        description="Lorentz local canonicalization: data, training, verification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset file")
    p.add_argument("--out", required=True)
    p.add_argument("--events", type=int, required=True)
    p.add_argument("--particles", type=int, default=6)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--momentum-scale", type=float, default=1.0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check-equivariance",
                       help="verify Lorentz-structure properties stage by stage")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--checkpoint", default=None)
    group.add_argument("--random-init", action="store_true")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--beta-max", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_check_equivariance)

    p = sub.add_parser("check-gradients",
                       help="finite-difference check of every primitive")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_check_gradients)

    p = sub.add_parser("bench", help="wall-time per forward/backward pass")
    p.add_argument("--config", default=None)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LlocaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
