"""TU-format graph datasets and a small k-fold graph classification harness."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .. import autodiff as ad
from ..autodiff import ParameterStore, Tape
from ..gnn import MPGNN, Graph, MPGNNConfig, SSMALayerConfig, mpgnn_forward
from .sumofgram import ConfigError


class TUParseError(ValueError):
    """Malformed or missing TU file; carries the file name and 1-based line number."""

    def __init__(self, path, line: Optional[int], msg: str):
        self.path, self.line = str(path), line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {msg}")


def _read_rows(path, kind=float, width: Optional[int] = None, required: bool = True):
    if not os.path.exists(path):
        if required:
            raise TUParseError(path, None, "file not found")
        return None
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            parts = [p.strip() for p in text.split(",")]
            try:
                vals = [_parse_int(p) if kind is int else float(p) for p in parts]
            except ValueError as exc:
                raise TUParseError(path, lineno, f"cannot parse {text!r}: {exc}") from None
            if width is not None and len(vals) != width:
                raise TUParseError(path, lineno, f"expected {width} values, got {len(vals)}")
            if rows and len(vals) != len(rows[0]):
                raise TUParseError(path, lineno, f"expected {len(rows[0])} values, got {len(vals)}")
            rows.append(vals)
    return rows


def _parse_int(p: str) -> int:
    v = float(p)
    if not np.isfinite(v) or v != int(v):
        raise ValueError(f"not an integer: {p!r}")
    return int(v)


def load_tu_dataset(directory, name: str, undirect: bool = False) -> list[Graph]:
    """Read ``{name}_A.txt``, ``_graph_indicator``, ``_graph_labels`` and optional node files.

    Indices in the files are 1-based.  Node features come from
    ``_node_attributes`` when present, else one-hot ``_node_labels``, else a
    single zero feature per node.
    """
    def path(suffix):
        return os.path.join(directory, f"{name}_{suffix}.txt")

    edges = _read_rows(path("A"), int, width=2)
    indicator = _read_rows(path("graph_indicator"), int, width=1)
    labels = _read_rows(path("graph_labels"), int, width=1)
    node_labels = _read_rows(path("node_labels"), int, required=False)
    attrs = _read_rows(path("node_attributes"), float, required=False)

    gid = np.array([r[0] for r in indicator], dtype=np.int64) - 1
    num_nodes = gid.size
    if num_nodes == 0:
        raise TUParseError(path("graph_indicator"), None, "no nodes")
    if gid.min() < 0:
        raise TUParseError(path("graph_indicator"), int(np.argmin(gid)) + 1, "graph ids start at 1")
    num_graphs = int(gid.max()) + 1
    if len(labels) != num_graphs:
        raise TUParseError(path("graph_labels"), None, f"expected {num_graphs} labels, got {len(labels)}")
    E = np.array(edges, dtype=np.int64).reshape(-1, 2) - 1
    for k, (a, b) in enumerate(E):
        if not (0 <= a < num_nodes and 0 <= b < num_nodes):
            raise TUParseError(path("A"), k + 1, f"node index out of range 1..{num_nodes}")
        if gid[a] != gid[b]:
            raise TUParseError(path("A"), k + 1, "edge joins two different graphs")

    if attrs is not None:
        if len(attrs) != num_nodes:
            raise TUParseError(path("node_attributes"), None, f"expected {num_nodes} rows, got {len(attrs)}")
        X = np.array(attrs, dtype=np.float64)
    elif node_labels is not None:
        if len(node_labels) != num_nodes:
            raise TUParseError(path("node_labels"), None, f"expected {num_nodes} rows, got {len(node_labels)}")
        nl = np.array([r[0] for r in node_labels], dtype=np.int64)
        values = np.unique(nl)
        X = (nl[:, None] == values[None, :]).astype(np.float64)
    else:
        X = np.zeros((num_nodes, 1))
    nl_all = np.array([r[0] for r in node_labels], dtype=np.int64) if node_labels is not None else None

    graphs = []
    for g in range(num_graphs):
        nodes = np.flatnonzero(gid == g)
        local = np.full(num_nodes, -1, dtype=np.int64)
        local[nodes] = np.arange(nodes.size)
        sel = gid[E[:, 0]] == g if E.size else np.zeros(0, dtype=bool)
        src, dst = local[E[sel, 0]], local[E[sel, 1]]
        graph = Graph.from_edges(nodes.size, src, dst, X[nodes], y=labels[g][0],
                                 node_labels=None if nl_all is None else nl_all[nodes])
        graphs.append(graph.undirected() if undirect else graph)
    return graphs


def write_tu_dataset(directory, name: str, graphs: Sequence[Graph], attributes: bool = True) -> None:
    """Inverse of :func:`load_tu_dataset` (directed edge lists, 1-based indices)."""
    os.makedirs(directory, exist_ok=True)
    shift = 0
    A, ind, lab, att = [], [], [], []
    for k, g in enumerate(graphs):
        src, dst = g.edges()
        A += [f"{s + shift + 1}, {t + shift + 1}" for s, t in zip(src, dst)]
        ind += [str(k + 1)] * g.num_nodes
        lab.append(str(int(g.y)))
        att += [", ".join(repr(float(v)) for v in row) for row in g.x]
        shift += g.num_nodes
    files = {"A": A, "graph_indicator": ind, "graph_labels": lab}
    if attributes:
        files["node_attributes"] = att
    for suffix, lines in files.items():
        with open(os.path.join(directory, f"{name}_{suffix}.txt"), "w") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

@dataclass
class GraphTrainConfig:
    aggregator: str = "sum"
    hidden: int = 16
    depth: int = 2
    activation: str = "relu"
    folds: int = 3
    epochs: int = 100
    lr: float = 1e-2
    batch_size: int = 32
    count_channel: bool = False
    kappa: int = 2
    seed: int = 0


@dataclass
class ClassifierRecord:
    aggregator: str
    param_count: int
    fold_accuracies: list = field(default_factory=list)
    epochs: int = 0
    seed: int = 0

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.fold_accuracies))


def kfold_indices(num: int, folds: int, seed: int):
    """Seeded shuffle split into ``folds`` contiguous test blocks."""
    if folds < 2:
        raise ConfigError("need at least 2 folds")
    if num < folds:
        raise ConfigError(f"{num} graphs cannot fill {folds} folds")
    perm = np.random.default_rng([seed, 3]).permutation(num)
    return np.array_split(perm, folds)


def _model(cfg: GraphTrainConfig, in_dim: int, num_classes: int, seed: int,
           counts: Optional[np.ndarray] = None) -> MPGNN:
    ssma = SSMALayerConfig(kappa=cfg.kappa, hidden_dim=cfg.hidden) if cfg.aggregator == "ssma" else None
    mcfg = MPGNNConfig(in_dim=in_dim, hidden=cfg.hidden, depth=cfg.depth, out_dim=num_classes,
                       aggregator=cfg.aggregator, activation=cfg.activation,
                       count_channel=cfg.count_channel, ssma=ssma, seed=seed)
    if counts is not None and counts.size:
        # standardize the raw node count with training-fold statistics
        mcfg.count_shift, mcfg.count_scale = float(counts.mean()), float(counts.std()) or 1.0
    return MPGNN(mcfg, ParameterStore())


def train_graph_classifier(graphs: Sequence[Graph], cfg: GraphTrainConfig = GraphTrainConfig()):
    """k-fold cross-validated accuracy of an MPGNN with the configured aggregator.

    Returns ``(record, fold_metrics)`` where each fold metric is a dict with
    the fold's train and test accuracy.
    """
    graphs = list(graphs)
    if any(g.y is None for g in graphs):
        raise ConfigError("every graph needs a label")
    y_raw = np.array([g.y for g in graphs])
    classes, y = np.unique(y_raw, return_inverse=True)
    in_dim = graphs[0].x.shape[1]
    if any(g.x.shape[1] != in_dim for g in graphs):
        raise ConfigError("graphs disagree on feature width")
    splits = kfold_indices(len(graphs), cfg.folds, cfg.seed)
    record = ClassifierRecord(cfg.aggregator, 0, [], cfg.epochs, cfg.seed)
    metrics = []
    for k, test_idx in enumerate(splits):
        train_idx = np.setdiff1d(np.arange(len(graphs)), test_idx)
        counts = np.array([graphs[j].num_nodes for j in train_idx], dtype=np.float64)
        model = _model(cfg, in_dim, len(classes), cfg.seed + k, counts)
        record.param_count = model.store.count()
        rng = np.random.default_rng([cfg.seed, k])
        for _ in range(cfg.epochs):
            order = rng.permutation(train_idx)
            for i in range(0, order.size, cfg.batch_size):
                idx = order[i:i + cfg.batch_size]
                tape = Tape()
                logits = mpgnn_forward(model, [graphs[j] for j in idx], tape)
                loss = ad.cross_entropy(logits, y[idx])
                model.store.zero_grad()
                tape.backward(loss)
                ad.adam_step(model.store, lr=cfg.lr)

        def accuracy(idx):
            pred = mpgnn_forward(model, [graphs[j] for j in idx]).value.argmax(axis=1)
            return float(np.mean(pred == y[idx]))

        metrics.append({"fold": k, "train_accuracy": accuracy(train_idx), "test_accuracy": accuracy(test_idx)})
        record.fold_accuracies.append(metrics[-1]["test_accuracy"])
    return record, metrics


def parity_dataset(count: int, seed: int, sizes: Sequence[int] = tuple(range(2, 10))) -> list[Graph]:
    """Random graphs with zero features whose label is the parity of the node count."""
    rng = np.random.default_rng(seed)
    graphs = []
    for _ in range(count):
        n = int(rng.choice(sizes))
        src = rng.integers(0, n, size=n)
        dst = rng.integers(0, n, size=n)
        keep = src != dst
        g = Graph.from_edges(n, src[keep], dst[keep], np.zeros((n, 1)), y=n % 2)
        graphs.append(g.undirected())
    return graphs
