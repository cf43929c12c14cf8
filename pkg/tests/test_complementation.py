import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from graphcomp.bench import SyntheticSpec, homophily_ratio, erdos_renyi, synth_graph
from graphcomp.complementation import (
    BackboneConfig,
    ComplementEdges,
    ComplementModel,
    PairSamplingConfig,
    RankingList,
    TopologyComplementer,
    backbone_adjacency,
    backbone_forward,
    backbone_loss_and_grad,
    build_pair_sets,
    build_ranking_list,
    build_ranking_lists,
    fit_backbone,
    grouping_loss,
    init_backbone,
    listnet_loss,
    listnet_scores_loss,
    pretrain_backbone,
    synthesize_topology,
    train_complement_model,
)
from graphcomp.discrimination import HETEROPHILY_PRONE, HOMOPHILY_PRONE
from graphcomp.exceptions import NumericalError, ValidationError
from graphcomp.graph import Graph
from graphcomp.nn import MLP, accuracy

from conftest import central_diff, rel_err
from oracles import ranking_list_bruteforce


def separable_graph(n=20, seed=0, d=4):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    x = rng.normal(size=(n, d)) * 0.3 + np.where(y[:, None] == 1, 2.0, -2.0)
    iu, ju = np.triu_indices(n, 1)
    keep = (y[iu] == y[ju]) & (rng.random(len(iu)) < 0.4)
    return Graph.build(n, np.stack([iu[keep], ju[keep]], 1), x, y)


def grouping_oracle(z, pos, neg, eps=1e-10):
    mp = np.mean([z[i] @ z[j] for i, j in pos])
    mn = np.mean([z[i] @ z[j] for i, j in neg])
    sig = lambda t: 1 / (1 + np.exp(-t))  # noqa: E731
    return -np.log(sig(mp) + eps) - np.log(1 - sig(mn + eps))


class TestBackbone:
    def test_raw_features_identity(self):
        g = separable_graph()
        z = pretrain_backbone(g, BackboneConfig("raw-features"), np.arange(10))
        assert np.array_equal(z, g.features)
        assert z is not g.features

    def test_gcn_fits_separable_toy(self):
        g = separable_graph(n=10, seed=1)
        cfg = BackboneConfig("gcn-1layer", hidden_dim=16, epochs=200, seed=0)
        params, hist = fit_backbone(g, cfg, np.arange(10))
        logits, _, _ = backbone_forward(params, g.features, backbone_adjacency(g, cfg.kind), cfg.kind)
        assert accuracy(logits, g.labels, np.arange(10)) == 1.0
        assert hist[-1] < hist[0]

    @pytest.mark.parametrize("kind", ["gcn-1layer", "mlp"])
    def test_gradient_finite_differences(self, kind):
        g = separable_graph(n=8, seed=2, d=3)
        cfg = BackboneConfig(kind, hidden_dim=5, seed=3)
        params = init_backbone(cfg, 3, 2)
        a = backbone_adjacency(g, kind)
        idx = np.array([0, 1, 2, 5])
        _, grads = backbone_loss_and_grad(params, g.features, a, g.labels, idx, kind)
        for p, gp in zip(params, grads):
            num = central_diff(lambda: backbone_loss_and_grad(params, g.features, a, g.labels, idx, kind)[0], p)
            assert rel_err(gp, num) < 1e-4

    def test_output_is_hidden_layer(self):
        g = separable_graph()
        z = pretrain_backbone(g, BackboneConfig("mlp", hidden_dim=7, epochs=5), np.arange(12))
        assert z.shape == (g.n_nodes, 7) and np.all(z >= 0)

    def test_missing_labels(self):
        g = Graph.build(3, [(0, 1)], np.eye(3))
        with pytest.raises(ValidationError):
            pretrain_backbone(g, BackboneConfig(), [0])

    def test_empty_train(self):
        with pytest.raises(ValidationError):
            pretrain_backbone(separable_graph(), BackboneConfig(), [])

    @pytest.mark.parametrize("kw", [{"kind": "gat"}, {"hidden_dim": 0}, {"learning_rate": 0.0}])
    def test_config_validation(self, kw):
        with pytest.raises(ValidationError):
            BackboneConfig(**kw)


class TestGroupingLoss:
    def test_zero_embeddings(self):
        loss, grad = grouping_loss(np.zeros((4, 3)), [(0, 1)], [(0, 2)])
        assert loss == pytest.approx(2 * np.log(2), abs=1e-9)
        assert np.array_equal(grad, np.zeros((4, 3)))

    def test_saturation(self):
        z = np.array([[10.0, 0], [10.0, 0], [-10.0, 0]])
        loss, _ = grouping_loss(z, [(0, 1)], [(0, 2), (1, 2)])
        assert loss < 1e-3

    def test_matches_oracle(self, rng):
        z = rng.standard_normal((6, 3))
        pos, neg = [(0, 1), (2, 3), (0, 1)], [(1, 4), (5, 2)]
        assert grouping_loss(z, pos, neg)[0] == pytest.approx(grouping_oracle(z, pos, neg), rel=1e-12)

    def test_gradient(self, rng):
        z = rng.standard_normal((5, 3))
        pos, neg = [(0, 1), (1, 2)], [(0, 3), (2, 4), (3, 4)]
        num = central_diff(lambda: grouping_loss(z, pos, neg)[0], z)
        assert rel_err(grouping_loss(z, pos, neg)[1], num) < 1e-4

    def test_empty_pairs(self):
        with pytest.raises(ValidationError):
            grouping_loss(np.zeros((3, 2)), [], [(0, 1)])

    @given(st.integers(0, 10_000))
    def test_non_negative(self, seed):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((6, 2)) * 3
        assert grouping_loss(z, [(0, 1), (2, 3)], [(1, 5)])[0] >= 0


class TestRankingList:
    def setup_method(self):
        # six nodes on a circle around two class clusters
        ang = np.array([0.0, 0.3, 0.5, 2.0, 2.6, 3.1])
        self.x = np.stack([np.cos(ang), np.sin(ang)], 1)
        self.y = np.array([0, 0, 0, 1, 1, 1])

    def test_k1(self):
        rl = build_ranking_list(0, self.x, self.y, np.arange(6), K=1)
        assert rl.members.tolist() == [1, 5]
        assert rl.true_scores.tolist() == [1.0, 0.0]

    def test_truncated_intra_block(self):
        rl = build_ranking_list(0, self.x, self.y, np.arange(6), K=5)
        assert rl.members.tolist() == [1, 2, 3, 4, 5]
        assert np.all(np.diff(rl.true_scores) < 0)

    def test_matches_bruteforce(self):
        for t in range(6):
            for K in (1, 2, 3):
                rl = build_ranking_list(t, self.x, self.y, np.arange(6), K)
                assert rl.members.tolist() == ranking_list_bruteforce(t, self.x, self.y, range(6), K)

    def test_ties_by_ascending_id(self):
        x = np.array([[1.0, 0], [1, 0], [1, 0], [-1, 0], [-1, 0]])
        y = np.array([0, 0, 0, 1, 1])
        rl = build_ranking_list(0, x, y, np.arange(5), K=1)
        assert rl.members.tolist() == [1, 4]

    @given(st.integers(0, 10_000), st.integers(1, 4))
    def test_only_training_nodes(self, seed, K):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((15, 3))
        y = rng.integers(0, 2, 15)
        y[:2] = [0, 1]
        train = np.sort(rng.choice(15, 8, replace=False))
        for rl in build_ranking_lists(x, y, train, K):
            assert set(rl.members.tolist()) <= set(train.tolist())
            assert rl.target not in rl.members
            assert len(set(rl.members.tolist())) == len(rl.members) <= 2 * K
            assert rl.members.tolist() == ranking_list_bruteforce(rl.target, x, y, train, K)

    def test_no_inter_candidates(self):
        with pytest.raises(ValidationError):
            build_ranking_list(0, self.x, self.y, np.array([0, 1, 2]), K=2)


class TestListNet:
    def test_single_member(self):
        z = np.array([[1.0, 2.0], [3.0, -1.0]])
        loss, _ = listnet_loss(z, [RankingList(0, np.array([1]), np.array([0.0]))])
        assert loss == pytest.approx(0.0, abs=1e-15)

    def test_entropy_floor(self):
        y = np.array([3.0, 2.0, 1.0, 0.0])
        p = np.exp(y) / np.exp(y).sum()
        loss, grad = listnet_scores_loss(y, y)
        assert loss == pytest.approx(-(p * np.log(p)).sum(), rel=1e-12)
        assert np.allclose(grad, 0, atol=1e-15)

    @given(st.lists(st.floats(-20, 20), min_size=4, max_size=4))
    def test_at_least_entropy(self, pred):
        y = np.array([3.0, 2.0, 1.0, 0.0])
        floor = listnet_scores_loss(y, y)[0]
        assert listnet_scores_loss(pred, y)[0] >= floor - 1e-12

    def test_gradient(self, rng):
        z = rng.standard_normal((5, 3))
        rl = RankingList(0, np.array([1, 2, 3, 4]), np.array([3.0, 2, 1, 0]))
        num = central_diff(lambda: listnet_loss(z, [rl])[0], z)
        assert rel_err(listnet_loss(z, [rl])[1], num) < 1e-4

    def test_batched_equals_per_list(self, rng):
        z = rng.standard_normal((7, 2))
        lists = [RankingList(0, np.array([1, 2, 3]), np.array([2.0, 1, 0])),
                 RankingList(4, np.array([5, 6]), np.array([1.0, 0])),
                 RankingList(6, np.array([0, 3, 4]), np.array([2.0, 1, 0])),
                 RankingList(3, np.array([3]), np.array([0.0]))]
        loss, grad = listnet_loss(z, lists)
        parts = [listnet_loss(z, [rl]) for rl in lists]
        assert loss == pytest.approx(sum(p[0] for p in parts), rel=1e-12)
        assert np.allclose(grad, sum(p[1] for p in parts), atol=1e-12)

    def test_empty(self):
        with pytest.raises(ValidationError):
            listnet_loss(np.zeros((2, 2)), [])


class TestPairSets:
    def test_full_enumeration(self):
        y = np.array([0, 0, 1, 1, 0])
        pos, neg = build_pair_sets(np.array([0, 1, 2, 3]), y)
        assert pos.tolist() == [[0, 1], [2, 3]]
        assert neg.tolist() == [[0, 2], [0, 3], [1, 2], [1, 3]]

    def test_caps(self):
        y = np.arange(30) % 3
        pos, neg = build_pair_sets(np.arange(30), y, PairSamplingConfig(5, 7, None, 0))
        assert len(pos) == 5 and len(neg) == 7
        assert np.all(y[pos[:, 0]] == y[pos[:, 1]]) and np.all(y[neg[:, 0]] != y[neg[:, 1]])

    def test_bad_cap(self):
        with pytest.raises(ValidationError):
            PairSamplingConfig(max_pos_pairs=0)


class TestTraining:
    def test_zero_epochs_is_init(self):
        g = separable_graph()
        m = train_complement_model(g, g.features, np.arange(14), K=2, epochs=0, seed=4, hidden_dim=8, embedding_dim=5)
        ref = MLP.init([4, 8, 5], np.random.default_rng(4))
        assert all(np.array_equal(a, b) for a, b in zip(m.weights, ref.weights))
        assert m.loss_history == []

    def test_separable_toy(self):
        g = separable_graph(n=20, seed=3)
        train = np.arange(14)
        m = train_complement_model(g, g.features, train, K=3, epochs=100, seed=0, hidden_dim=16, embedding_dim=8)
        assert m.loss_history[-1] < m.loss_history[0]
        z = m.embed(g.features)
        s = z @ z.T
        same = g.labels[:, None] == g.labels[None, :]
        off = ~np.eye(g.n_nodes, dtype=bool)
        assert s[same & off].mean() > s[~same].mean()

    def test_caps_above_population_are_noop(self):
        g = separable_graph()
        kw = dict(K=2, epochs=10, seed=1, hidden_dim=8, embedding_dim=4)
        a = train_complement_model(g, g.features, np.arange(12), **kw)
        b = train_complement_model(g, g.features, np.arange(12), sampling=PairSamplingConfig(10**6, 10**6, 10**6), **kw)
        assert a.loss_history == b.loss_history

    def test_bitwise_deterministic(self):
        g = separable_graph()
        kw = dict(K=2, epochs=15, seed=9, hidden_dim=8, embedding_dim=4)
        a = train_complement_model(g, g.features, np.arange(12), **kw)
        b = train_complement_model(g, g.features, np.arange(12), **kw)
        assert a.to_json() == b.to_json()

    def test_divergence_reported(self):
        g = separable_graph()
        z = np.full(g.features.shape, np.nan)
        with pytest.raises(NumericalError):
            train_complement_model(g, z, np.arange(12), epochs=3, hidden_dim=4, embedding_dim=3)

    def test_mlp_parameter_gradients(self, rng):
        from graphcomp.complementation import complement_objective

        g = separable_graph(n=10, seed=5, d=3)
        mlp = MLP.init([3, 4, 3], rng)
        pos, neg = build_pair_sets(np.arange(10), g.labels)
        lists = build_ranking_lists(g.features, g.labels, np.arange(10), 2)
        _, grads = complement_objective(mlp, g.features, pos, neg, lists, 1e-10)
        for p, gp in zip(mlp.params, grads):
            num = central_diff(lambda: complement_objective(mlp, g.features, pos, neg, lists, 1e-10)[0], p)
            assert rel_err(gp, num) < 1e-4


class TestModelJson:
    def test_round_trip_exact(self):
        g = separable_graph()
        m = train_complement_model(g, g.features, np.arange(12), K=2, epochs=5, hidden_dim=6, embedding_dim=3)
        back = ComplementModel.from_json(m.to_json())
        assert all(np.array_equal(a, b) for a, b in zip(m.weights + m.biases, back.weights + back.biases))
        assert back.to_json() == m.to_json()
        doc = json.loads(m.to_json())
        assert set(doc) == {"layers", "embedding_dim", "epsilon"}
        assert set(doc["layers"][0]) == {"w", "b"}

    def test_malformed(self):
        with pytest.raises(ValidationError):
            ComplementModel.from_dict({"layers": [{"w": [[1.0]]}], "embedding_dim": 1, "epsilon": 0.0})

    def test_bad_chain(self):
        doc = {"layers": [{"w": [[1.0, 2.0]], "b": [0.0, 0.0]}, {"w": [[1.0]], "b": [0.0]}],
               "embedding_dim": 1, "epsilon": 1e-10}
        with pytest.raises(ValidationError):
            ComplementModel.from_dict(doc)


def dense_picks(z, k, low):
    s = z @ z.T
    out = set()
    for i in range(len(z)):
        cand = [j for j in range(len(z)) if j != i]
        cand.sort(key=lambda j: ((s[i, j] if low else -s[i, j]), j))
        out |= {tuple(sorted((i, j))) for j in cand[:k]}
    return sorted(out)


class TestSynthesize:
    def test_argmin_partner(self):
        z = np.array([[1.0, 0], [0.5, 0], [0.2, 0], [-1.0, 0]])
        e = synthesize_topology(z, None, HOMOPHILY_PRONE, 1)
        assert [0, 3] in e.edges.tolist()
        assert e.kind == "heterophily-half"

    def test_argmax_kind(self):
        z = np.array([[1.0, 0], [0.9, 0], [-1.0, 0], [-0.8, 0]])
        e = synthesize_topology(z, None, HETEROPHILY_PRONE, 1)
        assert e.kind == "homophily-half" and e.edges.tolist() == [[0, 1], [2, 3]]

    @given(st.integers(0, 10_000), st.integers(1, 5), st.booleans())
    def test_matches_dense_bruteforce(self, seed, k, low):
        z = np.random.default_rng(seed).integers(-2, 3, size=(9, 2)).astype(float)
        verdict = HOMOPHILY_PRONE if low else HETEROPHILY_PRONE
        e = synthesize_topology(z, None, verdict, k, block_size=4)
        assert e.edges.tolist() == [list(p) for p in dense_picks(z, k, low)]
        assert np.all(e.edges[:, 0] != e.edges[:, 1])
        assert 9 * k / 2 <= e.n_edges <= 9 * k

    def test_block_size_invariant(self, rng):
        z = rng.standard_normal((30, 4))
        a = synthesize_topology(z, None, HOMOPHILY_PRONE, 3, block_size=1024)
        b = synthesize_topology(z, None, HOMOPHILY_PRONE, 3, block_size=7)
        assert np.array_equal(a.edges, b.edges)

    def test_excludes_original_edges(self, rng):
        g = separable_graph()
        z = rng.standard_normal((g.n_nodes, 3))
        e = synthesize_topology(z, None, HETEROPHILY_PRONE, 4, exclude=g)
        orig = {tuple(p) for p in g.edges.tolist()}
        assert not orig & {tuple(p) for p in e.edges.tolist()}

    @pytest.mark.parametrize("k", [0, 4])
    def test_k_range(self, k):
        with pytest.raises(ValidationError):
            synthesize_topology(np.eye(4), None, HOMOPHILY_PRONE, k)

    def test_bad_verdict(self):
        with pytest.raises(ValidationError):
            synthesize_topology(np.eye(4), None, "unsure", 1)

    def test_from_model(self):
        g = separable_graph()
        m = train_complement_model(g, g.features, np.arange(12), K=2, epochs=3, hidden_dim=6, embedding_dim=3)
        a = synthesize_topology(m, g.features, HOMOPHILY_PRONE, 2)
        b = synthesize_topology(m.embed(g.features), None, HOMOPHILY_PRONE, 2)
        assert np.array_equal(a.edges, b.edges)

    def test_planted_heterophily_half_below_er(self):
        g = synth_graph(SyntheticSpec(n_nodes=80, n_classes=2, n_edges=300, target_homophily=0.9, seed=3, noise=0.75))
        train = np.arange(48)
        m = train_complement_model(g, g.features, train, K=3, epochs=100, seed=0, hidden_dim=32, embedding_dim=16)
        e = synthesize_topology(m, g.features, HOMOPHILY_PRONE, 3, exclude=g)
        er = homophily_ratio(erdos_renyi(80, e.n_edges, 0), g.labels).ratio
        assert homophily_ratio(e, g.labels).ratio < er


class TestTopologyComplementer:
    def test_fit_transform(self):
        g = synth_graph(SyntheticSpec(n_nodes=40, n_edges=100, target_homophily=0.95, seed=1))
        est = TopologyComplementer(backbone="raw-features", epochs=10, hidden_dim=8, embedding_dim=4,
                                   k_heter=3, random_state=0)
        e = est.fit(g, np.arange(24), verdict=HOMOPHILY_PRONE).transform(g)
        assert isinstance(e, ComplementEdges) and e.kind == "heterophily-half" and e.k_per_node == 3
        again = clone(est).fit_transform(g, np.arange(24), verdict=HOMOPHILY_PRONE)
        assert np.array_equal(e.edges, again.edges)

    def test_discriminates_when_no_verdict(self):
        g = synth_graph(SyntheticSpec(n_nodes=40, n_edges=100, target_homophily=1.0, seed=1))
        est = TopologyComplementer(backbone="raw-features", epochs=2, hidden_dim=4, embedding_dim=3)
        assert est.fit(g, np.arange(24)).verdict_ == HOMOPHILY_PRONE

    def test_params(self):
        est = TopologyComplementer(K=3, lr=0.5)
        assert est.get_params()["K"] == 3
        assert est.set_params(lr=0.1).lr == 0.1

    def test_transform_before_fit(self):
        with pytest.raises(ValidationError):
            TopologyComplementer().transform(separable_graph())

    def test_transform_size_mismatch(self):
        g = separable_graph()
        est = TopologyComplementer(backbone="raw-features", epochs=1, hidden_dim=4, embedding_dim=3)
        est.fit(g, np.arange(12), verdict=HOMOPHILY_PRONE)
        with pytest.raises(ValidationError):
            est.transform(separable_graph(n=10))

    def test_bad_verdict(self):
        with pytest.raises(ValidationError):
            TopologyComplementer().fit(separable_graph(), np.arange(12), verdict="maybe")
