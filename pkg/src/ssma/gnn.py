"""Graphs, neighbor selection, SSMA and baseline aggregators, and a small MPGNN.

All learnable pieces run on the :mod:`ssma.autodiff` tape.  A module object
(``SSMAAggregator``, ``DeepSetsAggregator``, ``MPGNN``) only knows how to
register its parameters in a :class:`~ssma.autodiff.ParameterStore` and how
to run a forward pass given the bound parameter ``Var`` dict.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import ParameterStore, Tape, Var
from .core import canonical_affine, representation_shape
from .numerics import LOG_CLAMP, dft_matrix_2d

GAMMA_GRID = (0.1, 0.25, 0.5, 0.75, 1.0)
SELECTIONS = ("random", "attention_slots")
BASELINES = ("sum", "mean", "max", "deepsets")


# ---------------------------------------------------------------------------
# Graph data model
# ---------------------------------------------------------------------------

@dataclass
class Graph:
    """Directed graph with CSR incoming-neighbor lists.

    ``indices[offsets[i]:offsets[i+1]]`` are the sources of the edges ``j -> i``.
    """

    num_nodes: int
    offsets: np.ndarray
    indices: np.ndarray
    x: np.ndarray
    y: Optional[object] = None
    node_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=np.int64)
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim != 2:
            self.x = self.x.reshape(self.num_nodes, -1) if self.num_nodes else self.x.reshape(0, 1)
        if self.x.shape[0] != self.num_nodes:
            raise ValueError(f"expected {self.num_nodes} feature rows, got {self.x.shape[0]}")
        if self.offsets.shape != (self.num_nodes + 1,) or self.offsets[0] != 0:
            raise ValueError("offsets must have num_nodes + 1 entries starting at 0")
        if np.any(np.diff(self.offsets) < 0) or self.offsets[-1] != self.indices.size:
            raise ValueError("offsets must be monotone and end at the edge count")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.num_nodes):
            raise ValueError("neighbor index out of range")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("node features must be finite")

    @classmethod
    def from_edges(cls, num_nodes: int, src, dst, x=None, **kw) -> "Graph":
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        order = np.lexsort((src, dst))
        src, dst = src[order], dst[order]
        offsets = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(dst, minlength=num_nodes), out=offsets[1:])
        if x is None:
            x = np.zeros((num_nodes, 1))
        return cls(num_nodes, offsets, src, x, **kw)

    @property
    def num_edges(self) -> int:
        return int(self.indices.size)

    @property
    def in_degree(self) -> np.ndarray:
        return np.diff(self.offsets)

    def edges(self):
        """``(src, dst)`` arrays, grouped by destination."""
        dst = np.repeat(np.arange(self.num_nodes), self.in_degree)
        return self.indices.copy(), dst

    def in_neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.offsets[i]:self.offsets[i + 1]]

    def relabel(self, perm) -> "Graph":
        """Graph with node ``i`` renamed to ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        src, dst = self.edges()
        x = np.empty_like(self.x)
        x[perm] = self.x
        labels = None
        if self.node_labels is not None:
            labels = np.empty_like(self.node_labels)
            labels[perm] = self.node_labels
        return Graph.from_edges(self.num_nodes, perm[src], perm[dst], x, y=self.y, node_labels=labels)

    def undirected(self) -> "Graph":
        src, dst = self.edges()
        pairs = np.unique(np.concatenate([np.stack([src, dst], 1), np.stack([dst, src], 1)]), axis=0)
        return Graph.from_edges(self.num_nodes, pairs[:, 0], pairs[:, 1], self.x,
                                y=self.y, node_labels=self.node_labels)


def batch_graphs(graphs):
    """Disjoint union of ``graphs`` plus the graph id of every node."""
    offsets, indices, xs, ids = [np.zeros(1, dtype=np.int64)], [], [], []
    shift = 0
    for k, g in enumerate(graphs):
        offsets.append(g.offsets[1:] + offsets[-1][-1])
        indices.append(g.indices + shift)
        xs.append(g.x)
        ids.append(np.full(g.num_nodes, k, dtype=np.int64))
        shift += g.num_nodes
    big = Graph(shift, np.concatenate(offsets), np.concatenate(indices) if indices else [],
                np.concatenate(xs) if xs else np.zeros((0, 1)))
    return big, np.concatenate(ids) if ids else np.zeros(0, dtype=np.int64)


# ---------------------------------------------------------------------------
# Neighbor selection
# ---------------------------------------------------------------------------

def select_random_neighbors(g: Graph, kappa: int, seed: int) -> Graph:
    """Keep at most ``kappa`` in-neighbors per node, drawn without replacement."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    rng = np.random.default_rng(seed)
    deg = g.in_degree
    keep = np.ones(g.num_edges, dtype=bool)
    for i in np.flatnonzero(deg > kappa):
        lo = g.offsets[i]
        drop = rng.permutation(deg[i])[kappa:]
        keep[lo + drop] = False
    src, dst = g.edges()
    return Graph.from_edges(g.num_nodes, src[keep], dst[keep], g.x, y=g.y, node_labels=g.node_labels)


def padded_neighbors(g: Graph, kappa: int):
    """``(N, kappa)`` neighbor index table and presence mask; needs in-degree <= kappa."""
    deg = g.in_degree
    if deg.size and deg.max() > kappa:
        raise ValueError(f"in-degree {deg.max()} exceeds kappa={kappa}; select neighbors first")
    idx = np.zeros((g.num_nodes, kappa), dtype=np.int64)
    mask = np.arange(kappa)[None, :] < deg[:, None]
    idx[mask] = g.indices
    return idx, mask


@dataclass
class SlotParams:
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def init(cls, kappa: int, d: int, rng, scale: float = 0.1) -> "SlotParams":
        return cls(rng.normal(0.0, scale, (kappa, d)), rng.normal(0.0, scale, (kappa, d)))


def attention_weights(H: Var, g: Graph, a, b) -> Var:
    """Per-edge, per-slot softmax weights ``(E, kappa)`` over each node's in-neighbors.

    ``a`` may be ``None`` when the receiving node carries no features (pure
    multiset pooling); the score then depends on the sender only.
    """
    src, dst = g.edges()
    score = ad.matmul(H[src], ad.swapaxes(b, 0, 1) if isinstance(b, Var) else np.asarray(b).T)
    if a is not None:
        score = score + ad.matmul(H[dst], ad.swapaxes(a, 0, 1) if isinstance(a, Var) else np.asarray(a).T)
    return ad.segment_softmax(ad.leaky_relu(score), dst, g.num_nodes)


def attention_slots(H: Var, g: Graph, a, b, kappa: int) -> Var:
    """Slot tensor ``(N, kappa, d)``: softmax-weighted averages of incoming neighbors."""
    src, dst = g.edges()
    alpha = attention_weights(H, g, a, b)
    if alpha.shape[1] != kappa:
        raise ValueError(f"slot parameters have {alpha.shape[1]} slots, expected {kappa}")
    msgs = ad.reshape(alpha, (-1, kappa, 1)) * ad.reshape(H[src], (src.size, 1, H.shape[1]))
    return ad.segment_sum(msgs, dst, g.num_nodes)


def multiset_slots(H: Var, b, kappa: int) -> Var:
    """Attention slots for a batch of equal-size multisets ``H (B, n, d)`` -> ``(B, kappa, d)``.

    Same weights as :func:`attention_slots` on a star graph whose center has no
    features, without building the graph.
    """
    bT = ad.swapaxes(b, 0, 1) if isinstance(b, Var) else np.asarray(b, dtype=np.float64).T
    score = ad.leaky_relu(ad.matmul(H, bT))
    e = ad.exp(score - score.value.max(axis=1, keepdims=True))
    alpha = e / ad.sum(e, axis=1, keepdims=True)
    if alpha.shape[-1] != kappa:
        raise ValueError(f"slot parameters have {alpha.shape[-1]} slots, expected {kappa}")
    return ad.matmul(ad.swapaxes(alpha, 1, 2), H)


# ---------------------------------------------------------------------------
# SSMA
# ---------------------------------------------------------------------------

@dataclass
class SSMALayerConfig:
    kappa: int
    hidden_dim: int
    out_dim: Optional[int] = None
    selection: str = "attention_slots"
    seed: int = 0
    normalize: bool = True
    compression_rate: float = 1.0
    phase_mean: bool = False
    learnable_affine: bool = False
    compressor: str = "lowrank"  # or "mlp"
    mlp_activation: str = "relu"
    slot_init_scale: float = 0.1

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if not 0.0 < self.compression_rate <= 1.0:
            raise ValueError("compression rate must lie in (0, 1]")
        if self.selection not in SELECTIONS:
            raise ValueError(f"selection must be one of {SELECTIONS}")
        if self.compressor not in ("lowrank", "mlp"):
            raise ValueError("compressor must be 'lowrank' or 'mlp'")
        if self.out_dim is None:
            self.out_dim = self.hidden_dim

    @property
    def shape(self):
        return representation_shape(self.kappa, self.hidden_dim)

    @property
    def rank(self) -> int:
        return max(1, int(round(self.compression_rate * self.shape.m)))


def compressor_param_count(m: int, d: int, r: int) -> int:
    """Low-rank m -> r -> d map with biases on both factors."""
    return r * (m + d) + r + d


def conjugate_half(m1: int, m2: int):
    """Flat indices of one frequency per conjugate pair of an ``m1 x m2`` grid, with weights.

    Self-conjugate frequencies get weight 1, the others weight 2, so that
    ``Re(sum_k G_k P_k)`` over the full grid equals the weighted half sum.
    """
    s, b = np.divmod(np.arange(m1 * m2), m2)
    partner = ((-s) % m1) * m2 + (-b) % m2
    k = np.arange(m1 * m2)
    half = np.flatnonzero(k <= partner)
    return half, np.where(partner[half] == half, 1.0, 2.0)


class SSMAAggregator:
    """Affine lift, Fourier-domain product over neighbor slots, inverse, low-rank compressor."""

    def __init__(self, cfg: SSMALayerConfig, store: ParameterStore, prefix: str = "ssma",
                 rng=None, slot_query: bool = True):
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        self.cfg, self.prefix = cfg, prefix
        m1, m2, m = cfg.shape
        d, r, out = cfg.hidden_dim, cfg.rank, cfg.out_dim
        W, B = canonical_affine(cfg.kappa, d)
        self.enc_W, self.enc_B = W, B
        F = dft_matrix_2d(m1, m2)
        G = np.linalg.inv(F)
        # fixed real operators; note fft of a real grid needs no imaginary input
        self.Fr_T, self.Fi_T = F.real.T.copy(), F.imag.T.copy()
        self.Gr_T, self.Gi_T = G.real.T.copy(), G.imag.T.copy()
        # spectra of real grids are conjugate-symmetric, so half the frequencies
        # suffice when the product keeps that symmetry (everything but phase_mean)
        half, weight = conjugate_half(m1, m2)
        self.Fr_half, self.Fi_half = self.Fr_T[:, half].copy(), self.Fi_T[:, half].copy()
        self.Gr_half = self.Gr_T[half] * weight[:, None]
        self.Gi_half = self.Gi_T[half] * weight[:, None]
        self.slot_query = slot_query
        p = prefix + "."

        def add(name, value):
            if name not in store:
                store.add(name, value)

        if cfg.selection == "attention_slots":
            sp = SlotParams.init(cfg.kappa, d, rng, cfg.slot_init_scale)
            if slot_query:
                add(p + "slot_a", sp.a)
            add(p + "slot_b", sp.b)
        if cfg.learnable_affine:
            add(p + "affine_W", W)
            add(p + "affine_B", B)
        if cfg.compressor == "lowrank":
            add(p + "down_W", rng.normal(0.0, 1.0 / np.sqrt(m), (r, m)))
            add(p + "down_b", np.zeros(r))
            add(p + "up_W", rng.normal(0.0, 1.0 / np.sqrt(r), (out, r)))
            add(p + "up_b", np.zeros(out))
        else:
            add(p + "mlp_W1", rng.normal(0.0, 1.0 / np.sqrt(m), (r, m)))
            add(p + "mlp_b1", np.zeros(r))
            add(p + "mlp_W2", rng.normal(0.0, 1.0 / np.sqrt(r), (out, r)))
            add(p + "mlp_b2", np.zeros(out))

    def _p(self, P, name):
        return P[self.prefix + "." + name]

    def representation(self, P, U, mask) -> Var:
        """Flattened coefficient grids ``(N, m)`` from slot inputs ``U (N, kappa, d)``."""
        cfg = self.cfg
        mask = np.asarray(mask, dtype=np.float64)[..., None]
        if cfg.learnable_affine:
            W, B = self._p(P, "affine_W"), self._p(P, "affine_B")
            enc = ad.affine(U, W, B)
        else:
            enc = ad.affine(U, self.enc_W, self.enc_B)
        # absent inputs become the canonical lift of the zero vector (the factor t)
        grid = enc * mask + (1.0 - mask) * self.enc_B
        if cfg.phase_mean:
            Fr, Fi, Gr, Gi = self.Fr_T, self.Fi_T, self.Gr_T, self.Gi_T
        else:
            Fr, Fi, Gr, Gi = self.Fr_half, self.Fi_half, self.Gr_half, self.Gi_half
        re, im = ad.matmul(grid, Fr), ad.matmul(grid, Fi)
        if not cfg.normalize:
            # plain product in rectangular form: same value as the polar route, smooth everywhere
            pr, pi = re[:, 0], im[:, 0]
            for k in range(1, cfg.kappa):
                rk, ik = re[:, k], im[:, k]
                pr, pi = pr * rk - pi * ik, pr * ik + pi * rk
            return ad.matmul(pr, Gr) - ad.matmul(pi, Gi)
        logmag = ad.scale(ad.log(ad.square(re) + ad.square(im), floor=LOG_CLAMP ** 2), 0.5)
        phase = ad.atan2(im, re)
        logmag, phase = ad.sum(logmag, axis=1), ad.sum(phase, axis=1)
        count = np.maximum(mask.sum(axis=1), 1.0)
        logmag = logmag / count
        if cfg.phase_mean:
            phase = phase / count
        mag = ad.exp(logmag)
        pr, pi = mag * ad.cos(phase), mag * ad.sin(phase)
        return ad.matmul(pr, Gr) - ad.matmul(pi, Gi)

    def compress(self, P, rep: Var) -> Var:
        if self.cfg.compressor == "lowrank":
            z = ad.affine(rep, self._p(P, "down_W"), self._p(P, "down_b"))
            return ad.affine(z, self._p(P, "up_W"), self._p(P, "up_b"))
        z = ad.activation(ad.affine(rep, self._p(P, "mlp_W1"), self._p(P, "mlp_b1")), self.cfg.mlp_activation)
        return ad.affine(z, self._p(P, "mlp_W2"), self._p(P, "mlp_b2"))

    def aggregate_inputs(self, P, U, mask) -> Var:
        return self.compress(P, self.representation(P, U, mask))

    def gather_inputs(self, P, H: Var, g: Graph):
        """Slot inputs ``(N, kappa, d)`` and presence mask for every node."""
        cfg = self.cfg
        if cfg.selection == "attention_slots":
            a = self._p(P, "slot_a") if self.slot_query else None
            U = attention_slots(H, g, a, self._p(P, "slot_b"), cfg.kappa)
            mask = np.repeat((g.in_degree > 0)[:, None], cfg.kappa, axis=1)
            return U, mask
        sel = select_random_neighbors(g, cfg.kappa, cfg.seed)
        idx, mask = padded_neighbors(sel, cfg.kappa)
        return H[idx], mask

    def __call__(self, P, H: Var, g: Graph) -> Var:
        U, mask = self.gather_inputs(P, H, g)
        return self.aggregate_inputs(P, U, mask)


def ssma_aggregate(inputs, cfg: SSMALayerConfig, store: Optional[ParameterStore] = None,
                   mask=None, tape: Optional[Tape] = None, prefix: str = "ssma") -> Var:
    """Functional SSMA on explicit per-node inputs ``(N, kappa, d)``; returns ``(N, out_dim)``.

    Parameters under ``prefix`` are created in ``store`` if missing, else reused.
    """
    store = ParameterStore() if store is None else store
    agg = SSMAAggregator(cfg, store, prefix)
    if isinstance(inputs, Var):
        tape, U = inputs.tape, inputs
    else:
        tape = Tape() if tape is None else tape
        U = tape.var(inputs)
    if mask is None:
        mask = np.ones(U.shape[:2], dtype=bool)
    return agg.aggregate_inputs(store.bind(tape), U, mask)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

class DeepSetsAggregator:
    """``rho(sum_j phi(h_j))`` with ``phi = act(A h + b)`` and a two-layer ``rho``."""

    def __init__(self, in_dim: int, width: int, hidden: int, out_dim: int, store: ParameterStore,
                 prefix: str = "deepsets", activation: str = "tanh", rng=None, identity_init=False):
        rng = np.random.default_rng(0) if rng is None else rng
        self.prefix, self.activation = prefix, activation
        p = prefix + "."
        if identity_init:
            store.add(p + "phi_A", np.eye(width, in_dim))
            store.add(p + "rho_W1", np.eye(hidden, width))
            store.add(p + "rho_W2", np.eye(out_dim, hidden))
        else:
            store.add(p + "phi_A", rng.normal(0.0, 1.0 / np.sqrt(in_dim), (width, in_dim)))
            store.add(p + "rho_W1", rng.normal(0.0, 1.0 / np.sqrt(width), (hidden, width)))
            store.add(p + "rho_W2", rng.normal(0.0, 1.0 / np.sqrt(hidden), (out_dim, hidden)))
        store.add(p + "phi_b", np.zeros(width))
        store.add(p + "rho_b1", np.zeros(hidden))
        store.add(p + "rho_b2", np.zeros(out_dim))

    def phi(self, P, X: Var) -> Var:
        p = self.prefix + "."
        return ad.activation(ad.affine(X, P[p + "phi_A"], P[p + "phi_b"]), self.activation)

    def rho(self, P, Z: Var) -> Var:
        p = self.prefix + "."
        h = ad.activation(ad.affine(Z, P[p + "rho_W1"], P[p + "rho_b1"]), self.activation)
        return ad.affine(h, P[p + "rho_W2"], P[p + "rho_b2"])

    def __call__(self, P, H: Var, g: Graph) -> Var:
        src, dst = g.edges()
        return self.rho(P, ad.segment_sum(self.phi(P, H[src]), dst, g.num_nodes))


def baseline_aggregate(kind: str, H, g: Graph, params=None, deepsets: Optional[DeepSetsAggregator] = None):
    """Parameter-free ``sum``/``mean``/``max`` reductions or a ``deepsets`` module."""
    if not isinstance(H, Var):
        H = Tape().var(H)
    src, dst = g.edges()
    if kind == "sum":
        return ad.segment_sum(H[src], dst, g.num_nodes)
    if kind == "mean":
        return ad.segment_mean(H[src], dst, g.num_nodes)
    if kind == "max":
        return ad.segment_max(H[src], dst, g.num_nodes)
    if kind == "deepsets":
        if deepsets is None or params is None:
            raise ValueError("deepsets aggregation needs a module and bound parameters")
        return deepsets(params, H, g)
    raise ValueError(f"unknown aggregator {kind!r}")


# ---------------------------------------------------------------------------
# Message-passing network
# ---------------------------------------------------------------------------

@dataclass
class MPGNNConfig:
    in_dim: int
    hidden: int
    depth: int = 2
    out_dim: int = 1
    aggregator: str = "sum"
    activation: str = "relu"
    residual: bool = True
    input_projection: bool = True
    task: str = "graph"  # or "node"
    head_hidden: Optional[int] = None
    count_channel: bool = False
    count_shift: float = 0.0
    count_scale: float = 1.0
    ssma: Optional[SSMALayerConfig] = None
    deepsets_width: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.aggregator not in BASELINES + ("ssma",):
            raise ValueError(f"unknown aggregator {self.aggregator!r}")
        if self.head_hidden is None:
            self.head_hidden = self.hidden


class MPGNN:
    """GIN-style stack ``h <- act(U h + agg(h)) (+ h)`` with mean readout and a ReLU MLP head."""

    def __init__(self, cfg: MPGNNConfig, store: ParameterStore):
        self.cfg, self.store = cfg, store
        rng = np.random.default_rng(cfg.seed)
        h = cfg.hidden
        if cfg.input_projection:
            store.add("input.W", rng.normal(0.0, 1.0 / np.sqrt(max(cfg.in_dim, 1)), (h, cfg.in_dim)))
            store.add("input.b", np.zeros(h))
        elif cfg.in_dim != h:
            raise ValueError("without an input projection in_dim must equal hidden")
        self.aggs = []
        for layer in range(cfg.depth):
            store.add(f"layer{layer}.U", rng.normal(0.0, 1.0 / np.sqrt(h), (h, h)))
            store.add(f"layer{layer}.c", np.zeros(h))
            prefix = f"layer{layer}.agg"
            if cfg.aggregator == "ssma":
                scfg = replace(cfg.ssma or SSMALayerConfig(kappa=2, hidden_dim=h), hidden_dim=h,
                               out_dim=h, seed=cfg.seed + layer)
                self.aggs.append(SSMAAggregator(scfg, store, prefix, rng))
            elif cfg.aggregator == "deepsets":
                self.aggs.append(DeepSetsAggregator(h, cfg.deepsets_width or h, h, h, store, prefix,
                                                    activation="tanh", rng=rng))
            else:
                self.aggs.append(None)
        if cfg.task == "graph":
            readout_dim = h + (1 if cfg.count_channel else 0)
            store.add("head.W1", rng.normal(0.0, 1.0 / np.sqrt(readout_dim), (cfg.head_hidden, readout_dim)))
            # nonzero biases spread the ReLU kinks over the input range
            bound = 1.0 / np.sqrt(readout_dim)
            store.add("head.b1", rng.uniform(-bound, bound, cfg.head_hidden))
            store.add("head.W2", rng.normal(0.0, 1.0 / np.sqrt(cfg.head_hidden), (cfg.out_dim, cfg.head_hidden)))
            store.add("head.b2", np.zeros(cfg.out_dim))

    def node_embeddings(self, P, g: Graph) -> Var:
        cfg = self.cfg
        tape = next(iter(P.values())).tape
        H = tape.var(g.x)
        if cfg.input_projection:
            H = ad.affine(H, P["input.W"], P["input.b"])
        for layer, agg in enumerate(self.aggs):
            if agg is None:
                msg = baseline_aggregate(cfg.aggregator, H, g)
            else:
                msg = agg(P, H, g)
            upd = ad.activation(ad.affine(H, P[f"layer{layer}.U"], P[f"layer{layer}.c"]) + msg,
                                cfg.activation)
            H = upd + H if cfg.residual else upd
        return H

    def readout(self, P, H: Var, graph_ids, num_graphs: int) -> Var:
        z = ad.segment_mean(H, graph_ids, num_graphs)
        if self.cfg.count_channel:
            counts = np.bincount(graph_ids, minlength=num_graphs).astype(np.float64)[:, None]
            counts = (counts - self.cfg.count_shift) / self.cfg.count_scale
            z = ad.concat([z, counts], axis=1)
        return z

    def head(self, P, z: Var) -> Var:
        h = ad.relu(ad.affine(z, P["head.W1"], P["head.b1"]))
        return ad.affine(h, P["head.W2"], P["head.b2"])

    def __call__(self, P, g: Graph, graph_ids=None, num_graphs: int = 1) -> Var:
        H = self.node_embeddings(P, g)
        if self.cfg.task == "node":
            return H
        if graph_ids is None:
            graph_ids = np.zeros(g.num_nodes, dtype=np.int64)
        return self.head(P, self.readout(P, H, graph_ids, num_graphs))


def mpgnn_forward(model: MPGNN, graphs, tape: Optional[Tape] = None, embeddings: bool = False) -> Var:
    """Forward a list of graphs (or one graph) through ``model``.

    Returns the per-graph head output, or node embeddings with ``embeddings=True``.
    """
    if isinstance(graphs, Graph):
        graphs = [graphs]
    tape = Tape() if tape is None else tape
    P = model.store.bind(tape)
    big, ids = batch_graphs(graphs)
    H = model.node_embeddings(P, big)
    if embeddings or model.cfg.task == "node":
        return H
    return model.head(P, model.readout(P, H, ids, len(graphs)))
