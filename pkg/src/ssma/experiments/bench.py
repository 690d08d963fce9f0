"""Wall-clock timings of SSMA and sum aggregation on random graphs (informational, never asserted)."""
from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..autodiff import ParameterStore, Tape
from ..gnn import Graph, SSMAAggregator, SSMALayerConfig, baseline_aggregate

BENCH_COLUMNS = ("aggregator", "num_nodes", "num_edges", "kappa", "hidden", "repeats", "seconds_per_call")


@dataclass
class BenchRow:
    aggregator: str
    num_nodes: int
    num_edges: int
    kappa: int
    hidden: int
    repeats: int
    seconds_per_call: float


def _time(fn, repeats: int) -> float:
    fn()
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def random_graph(num_nodes: int, degree: int, hidden: int, rng) -> Graph:
    """Each node receives ``degree`` edges from uniformly drawn sources (self loops allowed)."""
    dst = np.repeat(np.arange(num_nodes), degree)
    src = rng.integers(0, max(num_nodes, 1), dst.size)
    return Graph.from_edges(num_nodes, src, dst, rng.normal(size=(num_nodes, hidden)))


def bench(nodes: Sequence[int] = (0, 64, 128, 256), kappas: Sequence[int] = (1, 2, 4, 7), degree: int = 8,
          hidden: int = 4, repeats: int = 5, seed: int = 0) -> list[BenchRow]:
    """Forward pass of one aggregation over every node, for each graph size and ``kappa``.

    SSMA uses attention slots, so the work grows with edges (scoring) and with
    ``kappa`` (grid size and product length).
    """
    rng = np.random.default_rng(seed)
    rows = []
    for n in nodes:
        g = random_graph(n, degree, hidden, rng)

        def run_sum():
            baseline_aggregate("sum", Tape().var(g.x), g)

        rows.append(BenchRow("sum", n, g.num_edges, 0, hidden, repeats, _time(run_sum, repeats)))
        for kappa in kappas:
            store = ParameterStore()
            agg = SSMAAggregator(SSMALayerConfig(kappa=kappa, hidden_dim=hidden), store)

            def run_ssma():
                tape = Tape()
                agg(store.bind(tape), tape.var(g.x), g)

            rows.append(BenchRow("ssma", n, g.num_edges, kappa, hidden, repeats, _time(run_ssma, repeats)))
    return rows


def write_bench_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow(asdict(r))
