"""Command line entry point: ``python -m ssma <subcommand>`` or ``ssma <subcommand>``.

Every subcommand prints JSON to stdout and exits 0 iff its checks pass.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import suites


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=_jsonable))


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def cmd_oracle_check(args) -> bool:
    ok1, det1 = suites.oracle_suite(args.cases, args.seed)
    ok2, det2 = suites.scalar_suite(args.cases, args.seed)
    _emit({"passed": ok1 and ok2, "results": [det1, det2]})
    return ok1 and ok2


def cmd_invariants(args) -> bool:
    ok, details = suites.invariants(args.suite, args.seed)
    _emit({"passed": ok, "results": details})
    return ok


def cmd_mix_probe(args) -> bool:
    ok, det = suites.mix_suite(args.target, args.n, args.d, args.eps, args.seed)
    det["passed"] = ok
    _emit(det)
    return ok


def cmd_stability(args) -> bool:
    ok, det = suites.stability_suite(args.probe, args.delta, args.seed)
    _emit({"passed": ok, "results": det})
    return ok


def _csv_list(kind):
    def parse(text):
        return [kind(t) for t in text.split(",") if t]
    return parse


def cmd_sumofgram(args) -> bool:
    from .experiments.sumofgram import (SumOfGramGrid, TrainConfig, summarize, train_sumofgram,
                                        write_csv, write_manifest)
    grid = SumOfGramGrid(aggregators=args.aggregators, activations=args.activations,
                         kappas=args.kappas, seeds=args.seeds, n=args.n, d=args.d, count=args.count,
                         train=TrainConfig(lr=args.lr, max_epochs=args.epochs, patience=args.patience),
                         model={} if args.slot_scale is None else {"slot_scale": args.slot_scale})
    records = train_sumofgram(grid, budget=args.budget, seed=args.seed, jobs=args.jobs)
    write_csv(records, args.out)
    manifest = args.manifest or args.out.rsplit(".", 1)[0] + ".json"
    write_manifest(grid, records, manifest, budget=args.budget, seed=args.seed)
    finite = all(np.isfinite([r.train_l1, r.test_l1]).all() for r in records)
    _emit({"passed": finite, "csv": args.out, "manifest": manifest,
           "mean_test_l1": {"/".join(map(str, k)): v for k, v in summarize(records).items()}})
    return finite


def cmd_train_tu(args) -> bool:
    from .experiments.tu import GraphTrainConfig, load_tu_dataset, train_graph_classifier
    graphs = load_tu_dataset(args.dir, args.name, undirect=args.undirect)
    cfg = GraphTrainConfig(aggregator=args.agg, hidden=args.hidden, depth=args.depth, folds=args.folds,
                           epochs=args.epochs, lr=args.lr, count_channel=args.count_channel,
                           kappa=args.kappa, seed=args.seed)
    record, folds = train_graph_classifier(graphs, cfg)
    ok = all(np.isfinite(record.fold_accuracies))
    _emit({"passed": ok, "aggregator": record.aggregator, "param_count": record.param_count,
           "mean_accuracy": record.mean_accuracy, "std_accuracy": record.std_accuracy, "folds": folds})
    return ok


def cmd_bench(args) -> bool:
    from .experiments.bench import bench, write_bench_csv
    rows = bench(repeats=args.repeats)
    write_bench_csv(rows, args.out)
    _emit({"passed": True, "csv": args.out, "rows": len(rows)})
    return True


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ssma", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("oracle-check", help="FFT path vs. direct polynomial expansion")
    s.add_argument("--cases", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_oracle_check)

    s = sub.add_parser("invariants", help="transform, separation, permutation and normalization checks")
    s.add_argument("--suite", choices=["all", *suites.INVARIANT_SUITES], default="all")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_invariants)

    s = sub.add_parser("mix-probe", help="finite-difference neighbor mixing value")
    s.add_argument("--target", choices=["sum", "ssma", "sumofgram"], default="sumofgram")
    s.add_argument("--n", type=int, default=3)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--eps", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_mix_probe)

    s = sub.add_parser("stability", help="Lipschitz probes of the coefficient grid")
    s.add_argument("--probe", choices=["lower", "upper"], default="upper")
    s.add_argument("--delta", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_stability)

    s = sub.add_parser("sumofgram", help="train the SumOfGram grid and write CSV + JSON manifest")
    s.add_argument("--n", type=int, default=4)
    s.add_argument("--d", type=int, default=4)
    s.add_argument("--count", type=int, default=5120)
    s.add_argument("--aggregators", type=_csv_list(str), default=["ssma", "sum"])
    s.add_argument("--activations", type=_csv_list(str), default=["tanh", "sigmoid", "relu", "elu"])
    s.add_argument("--kappas", type=_csv_list(int), default=[2, 3, 4])
    s.add_argument("--seeds", type=_csv_list(int), default=[0, 1, 2])
    s.add_argument("--budget", type=int, default=None, help="parameter budget per cell")
    s.add_argument("--epochs", type=int, default=2000)
    s.add_argument("--patience", type=int, default=50)
    s.add_argument("--lr", type=float, default=3e-3)
    s.add_argument("--slot-scale", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", default="results.csv")
    s.add_argument("--manifest", default=None)
    s.set_defaults(func=cmd_sumofgram)

    s = sub.add_parser("train-tu", help="k-fold graph classification on a TU-format dataset")
    s.add_argument("--dir", required=True)
    s.add_argument("--name", required=True)
    s.add_argument("--agg", choices=["ssma", "sum", "mean", "max", "deepsets"], default="sum")
    s.add_argument("--folds", type=int, default=3)
    s.add_argument("--hidden", type=int, default=16)
    s.add_argument("--depth", type=int, default=2)
    s.add_argument("--epochs", type=int, default=100)
    s.add_argument("--lr", type=float, default=1e-2)
    s.add_argument("--kappa", type=int, default=2)
    s.add_argument("--count-channel", action="store_true")
    s.add_argument("--undirect", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_train_tu)

    s = sub.add_parser("bench", help="time sum vs. SSMA aggregation on random graphs (informational)")
    s.add_argument("--out", default="bench.csv")
    s.add_argument("--repeats", type=int, default=5)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        ok = args.func(args)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(json.dumps({"passed": False, "error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
