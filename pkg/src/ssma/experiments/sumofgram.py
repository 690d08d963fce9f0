"""SumOfGram regression: a multiset task that needs interaction between elements.

Every model has the same three stages: a per-element encoder, an aggregator
over the multiset, and an MLP head.  Only the aggregator changes between runs,
and the head width is tuned so parameter counts match across aggregators.
"""
from __future__ import annotations

import csv
import json
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .. import autodiff as ad
from ..autodiff import ParameterStore, Tape, Var
from ..core import representation_shape
from ..gnn import SSMAAggregator, SSMALayerConfig, multiset_slots

AGGREGATORS = ("ssma", "sum", "mean", "max", "deepsets")
FEATURES = "uniform[-1,1]"
CSV_COLUMNS = ("aggregator", "activation", "m", "kappa", "param_count", "train_l1", "val_l1",
               "test_l1", "epochs", "seed", "n", "d", "features", "seconds")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------

def sumofgram_labels(X, full: bool = False) -> np.ndarray:
    """``sum_{p<=q} <x_p, x_q>`` for each multiset in ``X (..., n, d)``.

    Uses ``(|sum x|^2 + sum |x|^2) / 2``; with ``full`` the double sum over all
    ordered pairs, ``|sum x|^2``.
    """
    X = np.asarray(X, dtype=np.float64)
    s = X.sum(axis=-2)
    total = np.sum(s * s, axis=-1)
    if full:
        return total
    return 0.5 * (total + np.sum(X * X, axis=(-2, -1)))


@dataclass
class SumOfGramDataset:
    X: np.ndarray
    y: np.ndarray
    n: int
    d: int
    seed: int
    features: str = FEATURES

    def __len__(self):
        return len(self.y)

    @property
    def samples(self):
        return list(zip(self.X, self.y))

    def subset(self, idx) -> "SumOfGramDataset":
        return SumOfGramDataset(self.X[idx], self.y[idx], self.n, self.d, self.seed, self.features)

    def split(self, fractions=(0.8, 0.1, 0.1)):
        """Seeded shuffle, then train/validation/test slices."""
        if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
            raise ConfigError("split fractions must be three nonnegative numbers summing to 1")
        perm = np.random.default_rng([self.seed, 1]).permutation(len(self))
        a = int(round(fractions[0] * len(self)))
        b = a + int(round(fractions[1] * len(self)))
        return self.subset(perm[:a]), self.subset(perm[a:b]), self.subset(perm[b:])


def gen_sumofgram(n: int, d: int, count: int, seed: int, full: bool = False) -> SumOfGramDataset:
    """``count`` multisets of ``n`` i.i.d. Uniform[-1, 1] vectors in R^d with their labels."""
    if min(n, d, count) < 1:
        raise ValueError("n, d and count must all be >= 1")
    X = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(count, n, d))
    return SumOfGramDataset(X, sumofgram_labels(X, full=full), n, d, seed)


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

@dataclass
class SetModelConfig:
    aggregator: str
    activation: str
    n: int
    d: int
    kappa: int
    head_width: int = 32
    ssma_out: int = 16
    compression_rate: float = 0.25
    normalize: bool = True
    learnable_affine: bool = True
    compressor: str = "lowrank"
    enc_scale: float = 1.0
    slot_scale: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.aggregator not in AGGREGATORS:
            raise ConfigError(f"unknown aggregator {self.aggregator!r}")
        if self.activation not in ad.ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.head_width < 1:
            raise ConfigError("head width must be >= 1")

    @property
    def m(self) -> int:
        """Representation size shared by all aggregators at this grid cell."""
        return representation_shape(self.kappa, self.d).m


def orthogonal_init(rng, rows: int, cols: int) -> np.ndarray:
    """Random matrix with equal singular values, scaled like an ``N(0, 1/cols)`` draw.

    A Gaussian square encoder is often nearly singular, and the direction it
    misses is slow to recover under SSMA.
    """
    q, r = np.linalg.qr(rng.normal(size=(max(rows, cols), min(rows, cols))))
    q = q * np.sign(np.diag(r))
    q = q if rows >= cols else q.T
    return q * np.sqrt(max(rows, cols) / cols)


class SetModel:
    """Encoder, aggregator and head for fixed-size multisets ``X (B, n, d)``.

    * ``sum``/``mean``/``max``: linear encoder to width ``m``, reduction, head.
    * ``deepsets``: ``phi = act(A x + b)`` of width ``m``, sum, head as ``rho``.
    * ``ssma``: linear encoder to width ``d``, SSMA over ``kappa`` slots
      (attention slots when ``kappa < n``, else the elements themselves), head.
    """

    def __init__(self, cfg: SetModelConfig, store: Optional[ParameterStore] = None):
        self.cfg = cfg
        self.store = st = ParameterStore() if store is None else store
        rng = np.random.default_rng([cfg.seed, 7])
        d, m = cfg.d, cfg.m
        self.ssma = None
        enc_out = d if cfg.aggregator == "ssma" else m
        scale = cfg.enc_scale if cfg.aggregator == "ssma" else 1.0
        st.add("enc.W", scale * orthogonal_init(rng, enc_out, d))
        st.add("enc.b", np.zeros(enc_out))
        rep_dim = m
        if cfg.aggregator == "ssma":
            self.use_slots = cfg.kappa < cfg.n
            scfg = SSMALayerConfig(kappa=cfg.kappa, hidden_dim=d, out_dim=cfg.ssma_out,
                                   selection="attention_slots" if self.use_slots else "random",
                                   seed=cfg.seed, normalize=cfg.normalize,
                                   compression_rate=cfg.compression_rate,
                                   learnable_affine=cfg.learnable_affine,
                                   compressor=cfg.compressor, mlp_activation=cfg.activation,
                                   slot_init_scale=cfg.slot_scale)
            self.ssma = SSMAAggregator(scfg, st, "ssma", rng, slot_query=False)
            rep_dim = cfg.ssma_out
        w = cfg.head_width
        st.add("head.W1", rng.normal(0.0, 1.0 / np.sqrt(rep_dim), (w, rep_dim)))
        st.add("head.b1", np.zeros(w))
        st.add("head.W2", rng.normal(0.0, 1.0 / np.sqrt(w), (1, w)))
        st.add("head.b2", np.zeros(1))

    def representation(self, P, X: Var) -> Var:
        cfg = self.cfg
        B, n, d = X.shape
        H = ad.affine(X, P["enc.W"], P["enc.b"])
        if cfg.aggregator == "deepsets":
            return ad.sum(ad.activation(H, cfg.activation), axis=1)
        if cfg.aggregator == "sum":
            return ad.sum(H, axis=1)
        if cfg.aggregator == "mean":
            return ad.mean(H, axis=1)
        if cfg.aggregator == "max":
            flat = ad.reshape(H, (B * n, H.shape[-1]))
            return ad.segment_max(flat, np.repeat(np.arange(B), n), B)
        mask = np.ones((B, cfg.kappa), dtype=bool)
        if self.use_slots:
            U = multiset_slots(H, P["ssma.slot_b"], cfg.kappa)
        elif cfg.kappa > n:
            mask[:, n:] = False
            U = ad.concat([H, H.tape.var(np.zeros((B, cfg.kappa - n, d)))], axis=1)
        else:
            U = H
        return self.ssma.aggregate_inputs(P, U, mask)

    def __call__(self, P, X: Var) -> Var:
        z = self.representation(P, X)
        h = ad.activation(ad.affine(z, P["head.W1"], P["head.b1"]), self.cfg.activation)
        return ad.affine(h, P["head.W2"], P["head.b2"])[:, 0]

    def predict(self, X, batch: int = 1024) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = []
        for i in range(0, len(X), batch):
            tape = Tape()
            out.append(self(self.store.bind(tape), tape.var(X[i:i + batch])).value)
        return np.concatenate(out) if out else np.zeros(0)


def model_param_count(cfg: SetModelConfig) -> int:
    return SetModel(cfg).store.count()


def match_head_width(cfg: SetModelConfig, budget: int, tol: float = 0.02) -> SetModelConfig:
    """Head width whose total parameter count is closest to ``budget``.

    Raises :class:`ConfigError` when no width lands within ``tol * budget``.
    """
    base = model_param_count(replace(cfg, head_width=1))
    per_unit = model_param_count(replace(cfg, head_width=2)) - base
    w = max(1, int(round((budget - base) / per_unit)) + 1)
    out = replace(cfg, head_width=w)
    got = model_param_count(out)
    if abs(got - budget) > tol * budget:
        raise ConfigError(f"cannot match budget {budget} for {cfg.aggregator} at m={cfg.m}: "
                          f"closest count is {got}")
    return out


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    lr: float = 3e-3
    batch_size: int = 256
    max_epochs: int = 2000
    patience: int = 50
    min_delta: float = 0.0


@dataclass
class RunRecord:
    aggregator: str
    activation: str
    m: int
    param_count: int
    train_l1: float
    test_l1: float
    epochs: int
    seed: int
    kappa: int = 0
    val_l1: float = float("nan")
    n: int = 0
    d: int = 0
    features: str = FEATURES
    seconds: float = 0.0

    def row(self) -> dict:
        rec = asdict(self)
        return {k: rec[k] for k in CSV_COLUMNS}


def _l1(model: SetModel, data: SumOfGramDataset, mu: float, sd: float) -> float:
    return float(np.mean(np.abs(model.predict(data.X) * sd + mu - data.y)))


def train_model(cfg: SetModelConfig, train: SumOfGramDataset, val: SumOfGramDataset,
                test: SumOfGramDataset, tcfg: TrainConfig = TrainConfig()) -> RunRecord:
    """Adam on L1 of standardized targets, early stopping on validation L1.

    The parameters reported are those of the best validation epoch.  Epoch
    zero is the untrained model, so ``max_epochs=0`` reports the loss at
    initialization.
    """
    t0 = time.perf_counter()
    model = SetModel(cfg)
    store = model.store
    mu, sd = float(train.y.mean()), float(train.y.std()) or 1.0
    target = (train.y - mu) / sd
    rng = np.random.default_rng([cfg.seed, 11])
    best_val, best_state, best_epoch, waited = _l1(model, val, mu, sd), store.state(), 0, 0
    epoch = 0
    for epoch in range(1, tcfg.max_epochs + 1):
        perm = rng.permutation(len(train))
        for i in range(0, len(perm), tcfg.batch_size):
            idx = perm[i:i + tcfg.batch_size]
            tape = Tape()
            loss = ad.l1_loss(model(store.bind(tape), tape.var(train.X[idx])), target[idx])
            store.zero_grad()
            tape.backward(loss)
            ad.adam_step(store, lr=tcfg.lr)
        val_l1 = _l1(model, val, mu, sd)
        if not np.isfinite(val_l1):
            raise FloatingPointError(f"non-finite validation loss at epoch {epoch}")
        if val_l1 < best_val - tcfg.min_delta:
            best_val, best_state, best_epoch, waited = val_l1, store.state(), epoch, 0
        else:
            waited += 1
            if waited >= tcfg.patience:
                break
    for name, value in best_state.items():
        store[name].value[...] = value
    return RunRecord(cfg.aggregator, cfg.activation, cfg.m, store.count(),
                     _l1(model, train, mu, sd), _l1(model, test, mu, sd), epoch, cfg.seed,
                     kappa=cfg.kappa, val_l1=best_val, n=cfg.n, d=cfg.d,
                     seconds=time.perf_counter() - t0)


@dataclass
class SumOfGramGrid:
    aggregators: Sequence[str] = ("ssma", "sum")
    activations: Sequence[str] = ("tanh", "sigmoid", "relu", "elu")
    kappas: Sequence[int] = (2, 3, 4)
    seeds: Sequence[int] = (0, 1, 2)
    n: int = 4
    d: int = 4
    count: int = 5120
    baseline_width: int = 32
    train: TrainConfig = field(default_factory=TrainConfig)
    model: dict = field(default_factory=dict)

    def cells(self):
        for act in self.activations:
            for kappa in self.kappas:
                for seed in self.seeds:
                    yield act, kappa, seed


def acceptance_grid(**overrides) -> SumOfGramGrid:
    """n = d = 4, every activation, kappa in {2, 3, 4}, three seeds, SSMA vs. sum.

    Epochs are capped at 300 (with patience 50) so the whole grid fits a
    half-hour budget on a small workstation.
    """
    base = dict(aggregators=("ssma", "sum"), train=TrainConfig(max_epochs=300, patience=50))
    base.update(overrides)
    return SumOfGramGrid(**base)


def cell_configs(grid: SumOfGramGrid, act: str, kappa: int, seed: int, budget: Optional[int] = None):
    """Parameter-matched model configs for every aggregator at one grid cell.

    The budget defaults to the sum baseline with ``baseline_width`` head units;
    every other aggregator gets its head width tuned to it.
    """
    common = dict(activation=act, n=grid.n, d=grid.d, kappa=kappa, seed=seed, **grid.model)
    if budget is None:
        budget = model_param_count(SetModelConfig("sum", head_width=grid.baseline_width, **common))
    return budget, {agg: match_head_width(SetModelConfig(agg, **common), budget)
                    for agg in grid.aggregators}


def train_sumofgram(grid: SumOfGramGrid, budget: Optional[int] = None, seed: int = 0,
                    jobs: int = 1) -> list[RunRecord]:
    """Train every (aggregator, activation, m, seed) cell; data depend on ``seed`` and the cell seed."""
    jobs_list = []
    for act, kappa, cell_seed in grid.cells():
        _, cfgs = cell_configs(grid, act, kappa, cell_seed, budget)
        for agg in grid.aggregators:
            jobs_list.append((cfgs[agg], grid, seed))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_run_job, jobs_list))
    return [_run_job(j) for j in jobs_list]


def _run_job(job) -> RunRecord:
    cfg, grid, seed = job
    data = gen_sumofgram(grid.n, grid.d, grid.count, seed=int(np.random.SeedSequence([seed, cfg.seed]).generate_state(1)[0]))
    train, val, test = data.split()
    return train_model(cfg, train, val, test, grid.train)


def write_csv(records: Sequence[RunRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow(r.row())


def write_manifest(grid: SumOfGramGrid, records: Sequence[RunRecord], path, budget=None, seed=0) -> None:
    payload = {
        "grid": asdict(grid),
        "budget": budget,
        "seed": seed,
        "features": FEATURES,
        "versions": {"python": platform.python_version(), "numpy": np.__version__},
        "records": [asdict(r) for r in records],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def summarize(records: Sequence[RunRecord]) -> dict:
    """Mean test L1 keyed by ``(aggregator, activation, m)``."""
    acc: dict = {}
    for r in records:
        acc.setdefault((r.aggregator, r.activation, r.m), []).append(r.test_l1)
    return {k: float(np.mean(v)) for k, v in acc.items()}
