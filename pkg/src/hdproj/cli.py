"""Command-line front end.

Exit codes: 0 success, 2 invalid input or flags (nothing written), 3 numerical
degeneracy (zero projected variance).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import DataError, Direction, load_csv, load_direction_csv, make_folds, write_csv, write_direction_csv
from .projection_tests import (DegenerateVarianceError, TestOptions, fixed_provider, t_anchored,
                               t_onestep, t_plugin)
from .simulation import SETTINGS, GeneratorSpec, TestSpec, default_workers, degeneracy_demo, monte_carlo
from .sparse_logistic import AnchorConfig

EXIT_OK, EXIT_INVALID, EXIT_DEGENERATE = 0, 2, 3


class UsageError(Exception):
    """Invalid flag values or combinations."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    statistic: str = "plugin"
    pc_index: int = 1
    m_folds: int = 2
    seed: int = 0
    alpha: float = 0.05
    threshold_means: bool = True
    dense_pc: bool = False
    sparsity_budget: int | None = None
    anchor_w: float = 0.5
    anchor_r: float = 1.0 / 3.0
    anchor_r_zero: bool = False
    output: str | None = None
    format: str = "json"

    def test_options(self) -> TestOptions:
        return TestOptions(threshold_means=self.threshold_means, dense_pc=self.dense_pc,
                           sparsity_budget=self.sparsity_budget, seed=self.seed)

    def anchor(self) -> AnchorConfig:
        return AnchorConfig(self.anchor_w, self.anchor_r, self.anchor_r_zero)


def _budget(text: str) -> int | None:
    if text == "auto":
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'auto', got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("sparsity budget must be >= 1")
    return value


def _add_stat_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--statistic", choices=("plugin", "onestep", "anchored"), default="plugin")
    p.add_argument("--pc-index", type=int, default=None, help="principal component k (default 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--no-threshold-means", action="store_true",
                   help="use raw sample means in the influence function")
    p.add_argument("--sparsity-budget", type=_budget, default=None,
                   help="nonzeros per sparse PC, or 'auto' for ceil(sqrt(p))")
    p.add_argument("--dense-pc", action="store_true", help="use the dense eigenvector instead of sparse PCA")
    p.add_argument("--anchor-w", type=float, default=0.5, help="exponent alpha in w_n = n^alpha")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--anchor-r", type=float, default=None, help="exponent gamma in r_n = n^-gamma")
    g.add_argument("--anchor-r-zero", action="store_true", help="always add the classifier term")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdproj", description="Cross-fitted projection tests for two-sample means.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run a statistic on a labelled CSV")
    t.add_argument("data", help="CSV with one group column and numeric feature columns")
    t.add_argument("--group-column", default="group")
    t.add_argument("--labels", nargs=2, default=("control", "treatment"), metavar=("CONTROL", "TREATMENT"))
    t.add_argument("--m-folds", type=int, required=True)
    t.add_argument("--direction", help="feature_name,weight CSV used as the projection direction")
    t.add_argument("--output", required=True, help="JSON report path")
    _add_stat_flags(t)

    s = sub.add_parser("simulate", help="write one simulated dataset as CSV")
    s.add_argument("--setting", choices=SETTINGS, required=True)
    s.add_argument("--n", type=int, default=None, help="control group size")
    s.add_argument("--n-z", type=int, default=None, help="treatment group size")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", required=True)
    s.add_argument("--direction-output", help="also write the population eigenvector v_k")
    s.add_argument("--pc-index", type=int, default=1)

    mc = sub.add_parser("montecarlo", help="rejection proportion of a statistic on a simulated setting")
    mc.add_argument("--setting", choices=SETTINGS, required=True)
    mc.add_argument("--n", type=int, default=None)
    mc.add_argument("--n-z", type=int, default=None)
    mc.add_argument("--reps", type=int, default=1000)
    mc.add_argument("--m-folds", type=int, default=2)
    mc.add_argument("--oracle", action="store_true", help="use population nuisances")
    mc.add_argument("--workers", type=int, default=None, help="worker processes (default HDPROJ_WORKERS or cores)")
    mc.add_argument("--output", required=True)
    mc.add_argument("--format", choices=("json", "csv"), default="json")
    _add_stat_flags(mc)

    d = sub.add_parser("demo-degeneracy", help="how often the CV lasso returns an exactly zero vector")
    d.add_argument("--reps", type=int, default=200)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--setting", choices=("null", "f1-alternative"), default="null")
    d.add_argument("--n", type=int, default=500, help="per-group size for f1-alternative")
    d.add_argument("--workers", type=int, default=None)
    d.add_argument("--output", default=None)
    return parser


def _resolve(args) -> RunConfig:
    """Validate flags and build the config; raises UsageError."""
    if args.command == "test" and args.direction is not None:
        if args.statistic == "onestep":
            raise UsageError("--direction cannot be combined with --statistic onestep "
                             "(the one-step correction is specific to principal directions)")
        if args.pc_index is not None:
            raise UsageError("--pc-index cannot be combined with --direction")
        if args.dense_pc:
            raise UsageError("--dense-pc cannot be combined with --direction")
        if args.sparsity_budget is not None:
            raise UsageError("--sparsity-budget cannot be combined with --direction")
    pc_index = 1 if args.pc_index is None else args.pc_index
    if pc_index < 1:
        raise UsageError("--pc-index must be >= 1")
    if args.dense_pc and args.sparsity_budget is not None:
        raise UsageError("--sparsity-budget cannot be combined with --dense-pc")
    if args.statistic != "anchored" and (args.anchor_r is not None or args.anchor_r_zero or args.anchor_w != 0.5):
        raise UsageError(f"--anchor-w/--anchor-r/--anchor-r-zero need --statistic anchored, got {args.statistic}")
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    m_folds = args.m_folds
    if m_folds < 2:
        raise UsageError("--m-folds must be >= 2")
    cfg = RunConfig(
        command=args.command,
        statistic=args.statistic,
        pc_index=pc_index,
        m_folds=m_folds,
        seed=args.seed,
        alpha=args.alpha,
        threshold_means=not args.no_threshold_means,
        dense_pc=args.dense_pc,
        sparsity_budget=args.sparsity_budget,
        anchor_w=args.anchor_w,
        anchor_r=1.0 / 3.0 if args.anchor_r is None else args.anchor_r,
        anchor_r_zero=args.anchor_r_zero,
        output=args.output,
        format=getattr(args, "format", "json"),
    )
    try:
        cfg.anchor()
    except ValueError as exc:
        raise UsageError(f"--anchor-w/--anchor-r: {exc}") from None
    return cfg


def _write_report(path, payload: dict) -> None:
    payload["config"].pop("output", None)  # keep reports comparable across destinations
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def _top_features(weights: np.ndarray, names, k: int = 10):
    order = np.argsort(-np.abs(weights), kind="stable")[:k]
    return [(names[j], float(weights[j])) for j in order]


def cmd_test(args) -> int:
    cfg = _resolve(args)
    dataset = load_csv(args.data, args.group_column, tuple(args.labels))
    if cfg.m_folds > min(dataset.n_x, dataset.n_z):
        raise UsageError(f"--m-folds {cfg.m_folds} exceeds the smaller group size {min(dataset.n_x, dataset.n_z)}")
    if cfg.pc_index > dataset.p:
        raise UsageError(f"--pc-index {cfg.pc_index} exceeds the number of features {dataset.p}")
    if cfg.sparsity_budget is not None and cfg.sparsity_budget > dataset.p:
        raise UsageError(f"--sparsity-budget {cfg.sparsity_budget} exceeds the number of features {dataset.p}")
    provider = None
    if args.direction is not None:
        provider = fixed_provider(load_direction_csv(args.direction, dataset.feature_names))
    plan = make_folds(dataset.n_x, dataset.n_z, cfg.m_folds, cfg.seed)
    opts = cfg.test_options()
    if cfg.statistic == "plugin":
        result = t_plugin(dataset, plan, provider, opts, pc_index=cfg.pc_index)
    elif cfg.statistic == "onestep":
        result = t_onestep(dataset, plan, cfg.pc_index, opts)
    else:
        result = t_anchored(dataset, plan, cfg.anchor(), opts, direction_provider=provider,
                            pc_index=cfg.pc_index)

    names = dataset.feature_names
    config = asdict(cfg)
    config.update(data=str(args.data), group_column=args.group_column, labels=list(args.labels),
                  direction=args.direction)
    _write_report(cfg.output, {"version": __version__, "config": config, "result": result.to_dict()})
    print(f"statistic {result.statistic:.6f}  p-value {result.p_value:.6g}  "
          f"{'reject' if result.p_value < cfg.alpha else 'retain'} at alpha={cfg.alpha}")
    print("top features of the mean direction:")
    for name, w in _top_features(result.mean_direction, names):
        print(f"  {name}\t{w:+.6f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.pc_index < 1:
        raise UsageError("--pc-index must be >= 1")
    if args.n is not None and args.n < 2 or args.n_z is not None and args.n_z < 2:
        raise UsageError("--n and --n-z must be >= 2")
    gen = GeneratorSpec(args.setting, args.n, args.n_z)
    dataset, population = gen(args.seed)
    if args.pc_index > dataset.p:
        raise UsageError(f"--pc-index {args.pc_index} exceeds p={dataset.p}")
    write_csv(dataset, args.output)
    if args.direction_output:
        _, v = population.eigenpair(args.pc_index)
        write_direction_csv(Direction(v, f"pc{args.pc_index}"), args.direction_output)
    print(f"wrote {dataset.n_x} control and {dataset.n_z} treatment rows, p={dataset.p}, to {args.output}")
    return EXIT_OK


def _workers(value) -> int:
    w = default_workers() if value is None else value
    if w < 1:
        raise UsageError("--workers must be >= 1")
    return w


def cmd_montecarlo(args) -> int:
    cfg = _resolve(args)
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    if args.n is not None and args.n < cfg.m_folds or args.n_z is not None and args.n_z < cfg.m_folds:
        raise UsageError("--n and --n-z must be at least --m-folds")
    workers = _workers(args.workers)
    gen = GeneratorSpec(args.setting, args.n, args.n_z)
    test = TestSpec(cfg.statistic, cfg.pc_index, args.oracle, cfg.test_options(), cfg.anchor())
    report = monte_carlo(gen, test, args.reps, cfg.seed, cfg.alpha, cfg.m_folds, workers)
    if cfg.format == "csv":
        report.write_csv(cfg.output)
    else:
        config = asdict(cfg)
        config.update(setting=args.setting, n_x=gen.n_x, n_z=gen.n_z, reps=args.reps, oracle=args.oracle)
        _write_report(cfg.output, {"version": __version__, "config": config, "report": report.to_dict()})
    print(f"rejection_rate {report.rejection_rate:.4f} ({report.rejections}/{report.reps - report.degenerate_reps}), "
          f"ks_to_normal {report.ks_to_normal:.4f}, degenerate {report.degenerate_reps}")
    return EXIT_OK


def cmd_demo(args) -> int:
    if args.reps < 50:
        raise UsageError("--reps must be >= 50")
    if args.n < 10:
        raise UsageError("--n must be >= 10")
    frac = degeneracy_demo(args.reps, args.seed, args.setting, args.n, _workers(args.workers))
    if args.output:
        config = {"command": "demo-degeneracy", "reps": args.reps, "seed": args.seed,
                  "setting": args.setting, "n": args.n}
        _write_report(args.output, {"version": __version__, "config": config, "zero_fraction": frac})
    print(f"exact-zero fraction {frac:.4f} over {args.reps} replicates")
    return EXIT_OK


COMMANDS = {"test": cmd_test, "simulate": cmd_simulate, "montecarlo": cmd_montecarlo,
            "demo-degeneracy": cmd_demo}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DegenerateVarianceError as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
