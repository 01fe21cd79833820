"""Command-line entry point: ``sim train|eval|sweep|predict-ucs|selftest``.

Exit codes: 0 success, 2 configuration error, 3 invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import Config, ConfigError, load_config
from .env import InvariantViolation
from .neural.checkpoint import CheckpointError

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3

log = logging.getLogger("risnoma")


def _load(args) -> Config:
    cfg = load_config(args.config) if args.config else Config().validate()
    if args.seed is not None:
        cfg = cfg.replace(run__seed=args.seed)
    return cfg


def _out(args) -> Path:
    return Path(args.out) if args.out else Path("runs") / "latest"


def cmd_train(args) -> int:
    from .harness import run_experiment
    cfg = _load(args)
    if cfg.run.policy not in ("ddpg", "ac"):
        log.info("policy %r does not learn; running evaluation only", cfg.run.policy)
    s = run_experiment(cfg, _out(args), trace=args.trace, cache_dir=args.cache)
    print(json.dumps(s["metrics"], indent=2))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .harness import run_experiment
    cfg = _load(args)
    ckpt = args.checkpoint
    if cfg.run.policy in ("ddpg", "ac"):
        if ckpt is None:
            raise ConfigError("eval of a learning policy needs --checkpoint")
        if not Path(ckpt).exists():
            raise ConfigError(f"checkpoint not found: {ckpt}")
    s = run_experiment(cfg, _out(args), trace=args.trace, cache_dir=args.cache, checkpoint=ckpt)
    print(json.dumps(s["metrics"], indent=2))
    return EXIT_OK


def _parse_values(axis: str, text: str):
    kind = int if axis in ("K", "M") else float
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values for axis {axis} must be comma-separated numbers") from None


def cmd_sweep(args) -> int:
    from .harness import POLICIES, sweep
    cfg = _load(args)
    values = _parse_values(args.axis, args.values)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    bad = [p for p in policies if p not in POLICIES]
    if bad:
        raise ConfigError(f"unknown policies {bad}; choose from {sorted(POLICIES)}")
    out = _out(args)
    try:
        rows = sweep(cfg, args.axis, values, policies, out, cache_dir=args.cache,
                     checkpoint_dir=args.checkpoints or out / "checkpoints",
                     train_inline=args.train, workers=args.workers)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    for r in rows:
        print(f"{r['axis']}={r['value']:<6} {r['policy']:<15} success={r['success_ratio']:.4f} "
              f"sum_rate={r['sum_rate']:.4f}")
    return EXIT_OK


def cmd_predict(args) -> int:
    from .harness import build_predictor, predictor_series
    from .predictor import write_pred_vs_true
    from .ucs import write_series_csv
    cfg = _load(args)
    if args.seed is not None:
        cfg = cfg.replace(predictor__seed=args.seed)
    out = _out(args)
    out.mkdir(parents=True, exist_ok=True)
    model, report = build_predictor(cfg)
    series = predictor_series(cfg)
    write_series_csv(out / "ucs_series.csv", series)
    write_pred_vs_true(out / "pred_vs_true.csv", series, model.predict_series(series), model.t_s)
    model.save(out / "predictor.ckpt")
    summary = {"test_mse": report.test_mse, "persistence_mse": report.persistence_mse,
               "final_train_loss": [h[-1] for h in report.train_loss]}
    (out / "predictor.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_selftest(args) -> int:
    """Fast internal consistency checks; exits 3 if any fails."""
    from .selftest import run_all
    failures = run_all(verbose=True)
    return EXIT_INVARIANT if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON experiment config (defaults if omitted)")
        sp.add_argument("--seed", type=int, help="override run.seed")
        sp.add_argument("--out", help="output directory (default runs/latest)")
        sp.add_argument("--trace", action="store_true", help="also write per-step trace.csv")
        sp.add_argument("--cache", help="directory for cached predictor checkpoints")

    sp = sub.add_parser("train", help="train the configured policy and evaluate it")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a checkpoint or a baseline policy")
    common(sp)
    sp.add_argument("--checkpoint", help="agent checkpoint written by `sim train`")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep", help="sweep one axis over several policies")
    common(sp)
    sp.add_argument("--axis", required=True, choices=["K", "R0", "L", "M"])
    sp.add_argument("--values", required=True, help="comma-separated axis values")
    sp.add_argument("--policies", default="ddpg,random-active,passive-ddpg,random-passive,none")
    sp.add_argument("--train", action="store_true", help="train learning policies inline")
    sp.add_argument("--checkpoints", help="checkpoint directory (default <out>/checkpoints)")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("predict-ucs", help="train the UCS forecaster, write pred_vs_true.csv")
    common(sp)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("selftest", help="run quick internal consistency checks")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
