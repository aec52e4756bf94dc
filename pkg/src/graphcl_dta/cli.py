"""Command-line entry point: train, eval, ablate, gradcheck, split."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, dump_config, load_config
from .data import DataError, make_split
from .metrics import MetricError, MetricsReport
from .objective import NumericError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("graphcl_dta")

# flag -> RunConfig field
OVERRIDES = {
    "alpha": "alpha",
    "beta": "beta",
    "epsilon": "epsilon",
    "tau": "tau",
    "lr": "learning_rate",
    "batch_size": "batch_size",
    "epochs": "epochs",
    "seed": "seed",
    "fold": "fold",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, metavar="PATH", help="flat YAML run config")
    p.add_argument("--seed", type=int)
    p.add_argument("--fold", type=int)
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="graphcl-dta", description="graph contrastive drug-target affinity model")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train on one CV fold, validate on it")
    _common(p)
    p.add_argument("--resume", metavar="CKPT", help="continue from a checkpoint")

    p = sub.add_parser("eval", help="metrics of a checkpoint on a split")
    _common(p, config_required=False)
    p.add_argument("--checkpoint", required=True, metavar="CKPT")
    p.add_argument("--split", choices=["test", "validation", "train"], default="test")
    p.add_argument("--best", action="store_true", help="use the best-validation snapshot")

    p = sub.add_parser("ablate", help="alpha-off pair or beta sweep")
    _common(p)
    p.add_argument("--mode", choices=["alpha-off", "beta-sweep"], required=True)
    p.add_argument("--seeds", type=int, default=1, help="number of seeds, counting up from --seed")

    p = sub.add_parser("gradcheck", help="finite-difference check of the joint loss")
    _common(p, config_required=False)
    p.add_argument("--tol", type=float, default=1e-4)

    p = sub.add_parser("split", help="write the test / CV-fold assignment")
    _common(p, config_required=False)
    p.add_argument("--index", metavar="TSV", help="affinity index file; only rows are counted")
    return ap


def resolve_config(args) -> RunConfig:
    overrides = {field: getattr(args, flag) for flag, field in OVERRIDES.items()
                 if getattr(args, flag, None) is not None}
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.config:
        return load_config(args.config, **overrides)
    try:
        return RunConfig(**overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _print_reports(reports: list[MetricsReport], out=None) -> None:
    w = csv.writer(out or sys.stdout, delimiter="\t", lineterminator="\n")
    w.writerow(["label", "n", "pairs", "mse", "ci", "r2m", "config_digest"])
    for r in reports:
        w.writerow([r.label, r.n, r.pairs, f"{r.mse:.6f}", f"{r.ci:.6f}", f"{r.r2m:.6f}", r.config_digest])


def cmd_train(args) -> int:
    from .train import TrainState, train
    cfg = resolve_config(args)
    resume = None
    if args.resume:
        resume = TrainState.load(args.resume)
        if resume.config.digest() != cfg.replace(epochs=resume.config.epochs).digest():
            log.warning("resumed checkpoint was written with a different config; using the checkpoint's")
        resume.config = resume.config.replace(epochs=cfg.epochs)
        cfg = resume.config
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")
    _, report = train(cfg, ds=None, out_dir=out, resume=resume)
    _print_reports([report])
    return EXIT_OK


def cmd_eval(args) -> int:
    from .train import TrainState, evaluate, load_from_config
    state = TrainState.load(args.checkpoint)
    cfg = state.config
    if args.config:
        paths = load_config(args.config)
        cfg = cfg.replace(drugs=paths.drugs, targets=paths.targets, affinities=paths.affinities)
    ds = load_from_config(cfg)
    plan = make_split(ds, cfg.seed)
    fold = cfg.fold if args.fold is None else args.fold
    train_idx, val_idx = plan.fold(fold)
    idx = {"test": plan.test, "validation": val_idx, "train": train_idx}[args.split]
    model = state.best_model() if args.best else state.model
    report = evaluate(model, ds, idx, cfg, label=f"{args.split}" + (f"/fold{fold}" if args.split != "test" else ""))
    _print_reports([report])
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / f"eval_{args.split}.json").write_text(report.to_json() + "\n")
    return EXIT_OK


def cmd_ablate(args) -> int:
    from .train import AblationRow, ablate
    cfg = resolve_config(args)
    seeds = range(cfg.seed, cfg.seed + args.seeds)
    rows, _ = ablate(cfg, args.mode, seeds=seeds, out_dir=cfg.out_dir)
    w = csv.writer(sys.stdout, delimiter="\t", lineterminator="\n")
    w.writerow(AblationRow.COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .train import gradcheck
    cfg = resolve_config(args)
    report = gradcheck(cfg, tol=args.tol)
    print(report.format())
    print(f"# {'PASS' if report.passed else 'FAIL'} tol={report.tol:g} seconds={report.seconds:.1f}")
    return EXIT_OK if report.passed else EXIT_NUMERIC


def count_index_rows(path) -> int:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh, delimiter="\t"))
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from None
    if not rows or rows[0][:3] != ["drug_id", "target_id", "affinity"]:
        raise DataError(f"{path}:1: expected header drug_id, target_id, affinity")
    return sum(1 for r in rows[1:] if r)


def cmd_split(args) -> int:
    cfg = resolve_config(args)
    if args.index:
        n = count_index_rows(args.index)
    elif args.config:
        from .train import load_from_config
        n = len(load_from_config(cfg))
    else:
        raise ConfigError("split needs --config or --index")
    plan = make_split(n, cfg.seed)
    print("\t".join(["n", "test", "train", *[f"fold{k}" for k in range(len(plan.folds))]]))
    print("\t".join(str(x) for x in [n, len(plan.test), len(plan.train_pool), *[len(f) for f in plan.folds]]))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        part = {int(i): "test" for i in plan.test}
        for k, f in enumerate(plan.folds):
            part.update({int(i): f"fold{k}" for i in f})
        with open(out / "split.tsv", "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["index", "partition"])
            w.writerows((i, part[i]) for i in range(n))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "ablate": cmd_ablate, "gradcheck": cmd_gradcheck,
            "split": cmd_split}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CheckpointError, MetricError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
