import numpy as np
import pytest

from ssma import autodiff as ad
from ssma.autodiff import ParameterStore, Tape
from ssma.core import fconv, representation_shape
from ssma.gnn import (MPGNN, DeepSetsAggregator, Graph, MPGNNConfig, SSMAAggregator, SSMALayerConfig,
                      attention_slots, attention_weights, baseline_aggregate, batch_graphs,
                      compressor_param_count, conjugate_half, mpgnn_forward, multiset_slots,
                      padded_neighbors, select_random_neighbors, ssma_aggregate)
from ssma.numerics import fft_2d
from ssma.polyset import expand_bivariate


def random_graph(rng, n=8, p=0.35, d=3):
    A = rng.random((n, n)) < p
    np.fill_diagonal(A, False)
    src, dst = np.nonzero(A)
    return Graph.from_edges(n, src, dst, rng.normal(size=(n, d)), y=int(rng.integers(2)))


def star(H):
    """Center node 0 receives an edge from each of the leaves 1..n."""
    n = len(H)
    x = np.vstack([np.zeros((1, H.shape[1])), H])
    return Graph.from_edges(n + 1, np.arange(1, n + 1), np.zeros(n, dtype=int), x)


class TestGraph:
    def test_csr_layout(self):
        g = Graph.from_edges(3, [0, 1, 2, 0], [1, 2, 0, 2])
        assert list(g.in_degree) == [1, 1, 2]
        assert sorted(g.in_neighbors(2)) == [0, 1]
        assert g.num_edges == 4

    @pytest.mark.parametrize("kw", [
        dict(offsets=[0, 1], indices=[0]),
        dict(offsets=[0, 2, 1], indices=[0]),
        dict(offsets=[0, 1, 1], indices=[5]),
    ])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            Graph(2, x=np.zeros((2, 1)), **kw)

    def test_nonfinite_features(self):
        with pytest.raises(ValueError):
            Graph.from_edges(1, [], [], np.array([[np.nan]]))

    def test_relabel_preserves_edges(self):
        g = random_graph(np.random.default_rng(0))
        perm = np.random.default_rng(1).permutation(g.num_nodes)
        h = g.relabel(perm)
        for i in range(g.num_nodes):
            assert sorted(perm[g.in_neighbors(i)]) == sorted(h.in_neighbors(perm[i]))
            np.testing.assert_array_equal(h.x[perm[i]], g.x[i])

    def test_undirected_is_symmetric_and_deduplicated(self):
        g = Graph.from_edges(3, [0, 1, 1], [1, 0, 2]).undirected()
        pairs = set(zip(*g.edges()))
        assert pairs == {(0, 1), (1, 0), (1, 2), (2, 1)}

    def test_batch_is_disjoint_union(self):
        rng = np.random.default_rng(2)
        gs = [random_graph(rng, n) for n in (3, 5, 4)]
        big, ids = batch_graphs(gs)
        assert big.num_nodes == 12 and big.num_edges == sum(g.num_edges for g in gs)
        assert list(np.bincount(ids)) == [3, 5, 4]
        src, dst = big.edges()
        assert np.all(ids[src] == ids[dst])


class TestNeighborSelection:
    def test_random_selection_caps_degree(self):
        g = random_graph(np.random.default_rng(3), n=12, p=0.6)
        sel = select_random_neighbors(g, 2, seed=0)
        assert sel.in_degree.max() <= 2
        for i in range(g.num_nodes):
            assert set(sel.in_neighbors(i)) <= set(g.in_neighbors(i))
            assert len(sel.in_neighbors(i)) == min(2, g.in_degree[i])

    def test_selection_is_seeded(self):
        g = random_graph(np.random.default_rng(4), n=12, p=0.6)
        a, b = select_random_neighbors(g, 3, 7), select_random_neighbors(g, 3, 7)
        np.testing.assert_array_equal(a.indices, b.indices)

    def test_low_degree_graph_is_unchanged(self):
        g = random_graph(np.random.default_rng(2), n=9, p=0.2)
        sel = select_random_neighbors(g, int(g.in_degree.max()), seed=5)
        np.testing.assert_array_equal(sel.offsets, g.offsets)
        np.testing.assert_array_equal(sel.indices, g.indices)

    def test_padding_needs_selection_first(self):
        g = random_graph(np.random.default_rng(5), n=10, p=0.8)
        with pytest.raises(ValueError):
            padded_neighbors(g, 1)
        idx, mask = padded_neighbors(select_random_neighbors(g, 2, 0), 2)
        assert idx.shape == mask.shape == (10, 2)


class TestAttentionSlots:
    def test_weights_are_per_slot_distributions(self):
        rng = np.random.default_rng(6)
        g = random_graph(rng)
        H = Tape().var(g.x)
        alpha = attention_weights(H, g, rng.normal(size=(3, 3)), rng.normal(size=(3, 3))).value
        _, dst = g.edges()
        for i in np.unique(dst):
            np.testing.assert_allclose(alpha[dst == i].sum(axis=0), 1.0)

    def test_single_neighbor_fills_every_slot(self):
        rng = np.random.default_rng(18)
        g = Graph.from_edges(3, [2], [0], rng.normal(size=(3, 4)))
        slots = attention_slots(Tape().var(g.x), g, rng.normal(size=(3, 4)), rng.normal(size=(3, 4)), 3).value
        np.testing.assert_allclose(slots[0], np.tile(g.x[2], (3, 1)), atol=1e-12)

    def test_zero_scores_give_the_mean(self):
        g = star(np.random.default_rng(19).normal(size=(5, 3)))
        z = np.zeros((2, 3))
        slots = attention_slots(Tape().var(g.x), g, z, z, 2).value
        np.testing.assert_allclose(slots[0], np.tile(g.x[1:].mean(axis=0), (2, 1)), atol=1e-12)

    def test_nodes_without_neighbors_get_zero_slots(self):
        rng = np.random.default_rng(20)
        g = random_graph(rng, n=10, p=0.1)
        slots = attention_slots(Tape().var(g.x), g, rng.normal(size=(2, 3)), rng.normal(size=(2, 3)), 2).value
        assert (g.in_degree == 0).any()
        np.testing.assert_array_equal(slots[g.in_degree == 0], 0.0)

    def test_weights_sum_to_one_tightly(self):
        rng = np.random.default_rng(21)
        g = random_graph(rng, n=12, p=0.5)
        alpha = attention_weights(Tape().var(g.x), g, 5 * rng.normal(size=(4, 3)), 5 * rng.normal(size=(4, 3))).value
        _, dst = g.edges()
        sums = np.array([alpha[dst == i].sum(axis=0) for i in np.unique(dst)])
        np.testing.assert_allclose(sums, 1.0, rtol=0, atol=1e-12)

    def test_multiset_slots_match_star_graph(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(5, 4, 3))
        b = rng.normal(size=(2, 3))
        fast = multiset_slots(Tape().var(X), b, 2).value
        for k in range(5):
            g = star(X[k])
            ref = attention_slots(Tape().var(g.x), g, None, b, 2).value[0]
            np.testing.assert_allclose(fast[k], ref, atol=1e-12)

    def test_slot_count_checked(self):
        with pytest.raises(ValueError):
            multiset_slots(Tape().var(np.ones((1, 3, 2))), np.ones((2, 2)), 3)


class TestConjugateHalf:
    @pytest.mark.parametrize("shape", [(2, 1), (3, 4), (4, 7), (5, 5), (4, 4)])
    def test_weighted_half_recovers_real_sum(self, shape):
        rng = np.random.default_rng(8)
        half, w = conjugate_half(*shape)
        P = fft_2d(rng.normal(size=shape)).ravel()
        G = fft_2d(rng.normal(size=shape)).ravel()
        assert np.real(np.sum(G * P)) == pytest.approx(np.real(np.sum(w * G[half] * P[half])), abs=1e-10)
        assert w.sum() == shape[0] * shape[1]


class TestSSMALayer:
    def _rep(self, cfg, U, mask=None):
        store = ParameterStore()
        agg = SSMAAggregator(cfg, store)
        tape = Tape()
        mask = np.ones(U.shape[:2], dtype=bool) if mask is None else mask
        return agg.representation(store.bind(tape), tape.var(U), mask).value

    @pytest.mark.parametrize("kappa,d", [(1, 1), (2, 3), (3, 2), (4, 4)])
    @pytest.mark.parametrize("normalize", [False, True])
    def test_representation_is_the_coefficient_grid(self, kappa, d, normalize):
        U = np.random.default_rng(kappa * 10 + d).uniform(-1, 1, (6, kappa, d))
        cfg = SSMALayerConfig(kappa=kappa, hidden_dim=d, normalize=normalize)
        expect = fconv(U, normalize=normalize).reshape(6, -1)
        np.testing.assert_allclose(self._rep(cfg, U), expect, atol=1e-10)

    def test_absent_slots_act_as_the_factor_t(self):
        rng = np.random.default_rng(9)
        U = rng.uniform(-1, 1, (1, 3, 2))
        mask = np.array([[True, False, True]])
        rep = self._rep(SSMALayerConfig(kappa=3, hidden_dim=2, normalize=False), U, mask)
        present = expand_bivariate(U[0, [0, 2]])
        m1, m2, _ = representation_shape(3, 2)
        expect = np.zeros((m1, m2))
        expect[1:1 + present.shape[0], :present.shape[1]] = present
        np.testing.assert_allclose(rep.reshape(m1, m2), expect, atol=1e-12)

    def test_phase_mean_path_is_finite_and_invariant(self):
        U = np.random.default_rng(10).uniform(-1, 1, (4, 3, 2))
        cfg = SSMALayerConfig(kappa=3, hidden_dim=2, phase_mean=True)
        a, b = self._rep(cfg, U), self._rep(cfg, U[:, ::-1])
        assert np.isfinite(a).all()
        np.testing.assert_allclose(a, b, atol=1e-10)

    @pytest.mark.parametrize("gamma", [0.1, 0.25, 0.5, 1.0])
    def test_compressor_size(self, gamma):
        cfg = SSMALayerConfig(kappa=3, hidden_dim=4, out_dim=5, compression_rate=gamma)
        m = cfg.shape.m
        assert cfg.rank == max(1, round(gamma * m))
        store = ParameterStore()
        SSMAAggregator(cfg, store)
        comp = sum(p.value.size for n, p in store.params.items() if "down" in n or "up" in n)
        assert comp == compressor_param_count(m, 5, cfg.rank)

    def test_output_shape_and_parameter_reuse(self):
        cfg = SSMALayerConfig(kappa=2, hidden_dim=3, out_dim=4)
        store = ParameterStore()
        U = np.random.default_rng(11).normal(size=(5, 2, 3))
        a = ssma_aggregate(U, cfg, store).value
        b = ssma_aggregate(U, cfg, store).value
        assert a.shape == (5, 4)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("normalize", [False, True])
    def test_zero_inputs_give_one_constant_output(self, normalize):
        cfg = SSMALayerConfig(kappa=3, hidden_dim=2, out_dim=4, normalize=normalize)
        out = ssma_aggregate(np.zeros((5, 3, 2)), cfg, ParameterStore()).value
        assert np.isfinite(out).all()
        np.testing.assert_allclose(out, np.tile(out[0], (5, 1)), atol=1e-12)

    def test_invalid_configs(self):
        for kw in (dict(kappa=0), dict(compression_rate=0.0), dict(selection="topk"), dict(compressor="svd")):
            with pytest.raises(ValueError):
                SSMALayerConfig(**{"kappa": 2, "hidden_dim": 2, **kw})


class TestBaselines:
    def test_reductions_match_loops(self):
        rng = np.random.default_rng(12)
        g = random_graph(rng)
        for kind, fn in (("sum", np.sum), ("mean", np.mean), ("max", np.max)):
            out = baseline_aggregate(kind, g.x, g).value
            for i in range(g.num_nodes):
                nb = g.in_neighbors(i)
                expect = fn(g.x[nb], axis=0) if nb.size else np.zeros(g.x.shape[1])
                np.testing.assert_allclose(out[i], expect)

    def test_deepsets_identity_init(self):
        store = ParameterStore()
        DeepSetsAggregator(3, 4, 5, 2, store, identity_init=True)
        np.testing.assert_array_equal(store["deepsets.phi_A"].value, np.eye(4, 3))
        np.testing.assert_array_equal(store["deepsets.rho_W2"].value, np.eye(2, 5))

    def test_identity_deepsets_equals_sum(self):
        g = random_graph(np.random.default_rng(22))
        store = ParameterStore()
        ds = DeepSetsAggregator(3, 3, 3, 3, store, activation="identity", identity_init=True)
        tape = Tape()
        out = baseline_aggregate("deepsets", tape.var(g.x), g, store.bind(tape), ds).value
        np.testing.assert_allclose(out, baseline_aggregate("sum", g.x, g).value, atol=1e-10)

    def test_unknown_kind(self):
        g = random_graph(np.random.default_rng(13))
        with pytest.raises(ValueError):
            baseline_aggregate("median", g.x, g)
        with pytest.raises(ValueError):
            baseline_aggregate("deepsets", g.x, g)


class TestMPGNN:
    @pytest.mark.parametrize("agg", ["sum", "mean", "max", "deepsets", "ssma"])
    def test_readout_invariant_under_relabeling(self, agg):
        rng = np.random.default_rng(14)
        ssma = SSMALayerConfig(kappa=3, hidden_dim=8)
        model = MPGNN(MPGNNConfig(in_dim=3, hidden=8, aggregator=agg, ssma=ssma, count_channel=True),
                      ParameterStore())
        for _ in range(5):
            g = random_graph(rng)
            perm = rng.permutation(g.num_nodes)
            a = mpgnn_forward(model, g).value
            b = mpgnn_forward(model, g.relabel(perm)).value
            np.testing.assert_allclose(a, b, atol=1e-10)

    def _bare_sum_layer(self):
        cfg = MPGNNConfig(in_dim=3, hidden=3, depth=1, aggregator="sum", activation="identity",
                          residual=False, input_projection=False, task="node")
        model = MPGNN(cfg, ParameterStore())
        model.store["layer0.U"].value[:] = 0.0
        return model

    def test_bare_sum_layer_is_the_neighbor_sum(self):
        g = random_graph(np.random.default_rng(23))
        out = mpgnn_forward(self._bare_sum_layer(), g).value
        np.testing.assert_allclose(out, baseline_aggregate("sum", g.x, g).value, atol=1e-12)

    def test_edgeless_graph_uses_only_self_features(self):
        rng = np.random.default_rng(24)
        model = MPGNN(MPGNNConfig(in_dim=3, hidden=5, aggregator="ssma", task="node"), ParameterStore())
        x = rng.normal(size=(4, 3))
        out = mpgnn_forward(model, Graph.from_edges(4, [], [], x)).value
        for i in range(4):
            alone = mpgnn_forward(model, Graph.from_edges(1, [], [], x[i:i + 1])).value
            np.testing.assert_allclose(out[i], alone[0], atol=1e-12)

    def test_batched_equals_separate(self):
        rng = np.random.default_rng(15)
        model = MPGNN(MPGNNConfig(in_dim=3, hidden=6, out_dim=2), ParameterStore())
        gs = [random_graph(rng, n) for n in (4, 7, 5)]
        together = mpgnn_forward(model, gs).value
        for k, g in enumerate(gs):
            np.testing.assert_allclose(together[k], mpgnn_forward(model, g).value[0], atol=1e-12)

    def test_node_task_returns_embeddings(self):
        g = random_graph(np.random.default_rng(16))
        model = MPGNN(MPGNNConfig(in_dim=3, hidden=5, task="node"), ParameterStore())
        assert mpgnn_forward(model, g).shape == (g.num_nodes, 5)

    def test_training_step_reduces_loss(self):
        rng = np.random.default_rng(17)
        gs = [random_graph(rng) for _ in range(8)]
        y = np.array([g.y for g in gs])
        model = MPGNN(MPGNNConfig(in_dim=3, hidden=8, out_dim=2, aggregator="ssma"), ParameterStore())
        losses = []
        for _ in range(30):
            tape = Tape()
            loss = ad.cross_entropy(mpgnn_forward(model, gs, tape), y)
            model.store.zero_grad()
            tape.backward(loss)
            ad.adam_step(model.store, lr=1e-2)
            losses.append(float(loss.value))
        assert losses[-1] < losses[0]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MPGNNConfig(in_dim=2, hidden=2, depth=0)
        with pytest.raises(ValueError):
            MPGNNConfig(in_dim=2, hidden=2, aggregator="median")
        with pytest.raises(ValueError):
            MPGNN(MPGNNConfig(in_dim=2, hidden=3, input_projection=False), ParameterStore())
