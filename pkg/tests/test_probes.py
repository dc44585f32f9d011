import itertools

import numpy as np
import pytest
from scipy.stats import special_ortho_group

from losslab import data as D
from losslab import nanonet as nn
from losslab import probes as pb
from losslab import rng
from losslab.errors import DegenerateInputError, DomainError


@pytest.fixture(scope="module")
def bundled():
    return D.load_bundled()


def small_weights(seed=0, width=4, depth=2, act="tanh"):
    spec = nn.NetworkSpec(6, width, depth, activation=act, init_scheme="xavier_normal")
    return spec, nn.init_weights(spec, rng.trial_seed(seed, 0))


class TestTwoNN:
    def test_gaussian_five(self):
        x = np.random.default_rng(0).standard_normal((10_000, 5))
        assert 4.5 <= pb.two_nn_id(x).value <= 5.5

    def test_circle_in_ten(self):
        th = np.random.default_rng(1).uniform(0, 2 * np.pi, 10_000)
        x = np.zeros((10_000, 10))
        x[:, 3], x[:, 7] = np.cos(th), np.sin(th)
        assert 0.8 <= pb.two_nn_id(x).value <= 1.2

    def test_random_points_on_line(self):
        t = np.random.default_rng(2).uniform(0, 1, 3000)
        x = np.outer(t, [1.0, -2.0, 0.5])
        assert pb.two_nn_id(x).value == pytest.approx(1.0, abs=0.1)

    def test_equally_spaced_line_is_degenerate(self):
        # interior points have tied first and second neighbours (mu = 1)
        with pytest.raises(DegenerateInputError):
            pb.two_nn_id(np.outer(np.arange(100.0), [1.0, 1.0]))

    def test_duplicates_dropped(self):
        x = np.random.default_rng(3).standard_normal((200, 3))
        est = pb.two_nn_id(np.r_[x, x[:15]])
        assert est.dropped_duplicates == 15
        assert est.n_points == 200
        assert est.value == pb.two_nn_id(x).value

    def test_identical(self):
        with pytest.raises(DegenerateInputError):
            pb.two_nn_id(np.ones((20, 3)))

    def test_too_few(self):
        with pytest.raises(DomainError):
            pb.two_nn_id(np.random.default_rng(0).standard_normal((9, 2)))

    def test_rotation_and_scale_invariance(self):
        g = np.random.default_rng(4)
        x = g.standard_normal((2000, 4)) * [1, 2, 3, 4]
        Q = special_ortho_group.rvs(4, random_state=5)
        a = pb.two_nn_id(x).value
        assert abs(pb.two_nn_id(3.7 * x @ Q).value - a) < 1e-9


class TestParticipationRatio:
    def test_rank_one(self):
        t = np.random.default_rng(0).standard_normal(50)
        assert pb.participation_ratio_id(np.outer(t, [1, 2, 3])).value == pytest.approx(1.0, rel=1e-12)

    def test_two_equal_directions(self):
        x = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
        assert pb.participation_ratio_id(x).value == pytest.approx(2.0, rel=1e-12)

    def test_gaussian_five(self):
        x = np.random.default_rng(0).standard_normal((10_000, 5))
        assert 4.5 <= pb.participation_ratio_id(x).value <= 5.5

    def test_bounds(self):
        x = np.random.default_rng(2).standard_normal((30, 7))
        v = pb.participation_ratio_id(x).value
        assert 1.0 <= v <= 7.0

    def test_invariance(self):
        g = np.random.default_rng(3)
        x = g.standard_normal((300, 5)) * [1, 1, 2, 3, 5]
        Q = special_ortho_group.rvs(5, random_state=1)
        a = pb.participation_ratio_id(x).value
        assert pb.participation_ratio_id(0.01 * x @ Q + 7.0).value == pytest.approx(a, rel=1e-10)

    def test_zero_variance(self):
        with pytest.raises(DegenerateInputError):
            pb.participation_ratio_id(np.ones((5, 2)))

    def test_too_few(self):
        with pytest.raises(DomainError):
            pb.participation_ratio_id(np.eye(2))


class TestEnsemble:
    def test_full_batch_identical(self, bundled):
        sub = bundled.subset(range(12))
        _, w = small_weights()
        ens = pb.gradient_ensemble(w, sub, 12, 5, seed=0)
        assert np.all(ens.gradients == ens.gradients[0])
        np.testing.assert_array_equal(ens.gradients[0], nn.gradient(w, sub))

    def test_deterministic(self, bundled):
        _, w = small_weights()
        a = pb.gradient_ensemble(w, bundled, 8, 10, seed=3)
        b = pb.gradient_ensemble(w, bundled, 8, 10, seed=3)
        np.testing.assert_array_equal(a.gradients, b.gradients)
        assert not np.array_equal(a.gradients, pb.gradient_ensemble(w, bundled, 8, 10, seed=4).gradients)

    def test_mean_approaches_full_batch(self, bundled):
        sub = bundled.subset(range(40))
        _, w = small_weights(1)
        full = nn.gradient(w, sub)
        errs = [np.linalg.norm(pb.gradient_ensemble(w, sub, b, 200, seed=0).gradients.mean(0) - full)
                for b in (10, 20, 40)]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 1e-12

    @pytest.mark.parametrize("b,K", [(0, 5), (201, 5), (4, 2)])
    def test_bad_args(self, bundled, b, K):
        _, w = small_weights()
        with pytest.raises(DomainError):
            pb.gradient_ensemble(w, bundled, b, K, seed=0)


class TestConfusion:
    def test_identical(self):
        g = np.array([1.0, 2.0, -1.0])
        assert pb.gradient_confusion(np.stack([g, g, g])) == pytest.approx(1.0)

    def test_antipodal(self):
        g = np.array([1.0, 2.0, -1.0])
        assert pb.gradient_confusion(np.stack([g, -g])) == pytest.approx(-1.0)

    def test_all_zero(self):
        with pytest.raises(DegenerateInputError):
            pb.gradient_confusion(np.zeros((4, 3)))

    def test_reorder_and_rescale(self):
        G = np.random.default_rng(0).standard_normal((10, 6))
        a = pb.gradient_confusion(G)
        assert pb.gradient_confusion(G[::-1]) == a
        assert pb.gradient_confusion(3.5 * G) == pytest.approx(a, abs=1e-14)

    def test_in_range(self, bundled):
        _, w = small_weights()
        c = pb.gradient_confusion(pb.gradient_ensemble(w, bundled, 4, 20, seed=0))
        assert -1.0 <= c <= 1.0

    def test_deeper_more_confused(self, bundled):
        sub = bundled.subset(range(50))
        means = {}
        for depth in (2, 9):
            width = pb.width_for_budget(6, depth, 150)
            spec = nn.NetworkSpec(6, width, depth)
            vals = [pb.gradient_confusion(pb.gradient_ensemble(
                nn.init_weights(spec, rng.trial_seed(0, s)), sub, 10, 20, seed=s)) for s in range(20)]
            means[depth] = float(np.mean(vals))
        assert means[9] <= means[2]


def architectures(max_params=50):
    for input_dim, width, depth in itertools.product(range(1, 12), range(1, 12), range(0, 12)):
        spec = nn.NetworkSpec(input_dim, width, depth)
        if nn.param_count(spec) <= max_params:
            yield spec


class TestInfluence:
    def test_single_path(self):
        assert pb.influence_ratio(nn.NetworkSpec(1, 1, 1)) == 0.25

    def test_logistic(self):
        assert pb.influence_ratio(nn.NetworkSpec(5, 3, 0)) == 0.0

    def test_deeper_larger(self):
        wide, deep = nn.NetworkSpec(3, 4, 2), nn.NetworkSpec(3, 2, 4)
        for s in (wide, deep):
            assert pb.interaction_count(s.layer_dims) == pb.interaction_count_bruteforce(s.layer_dims)
        assert pb.influence_ratio(deep) > pb.influence_ratio(wide)

    def test_closed_form_matches_enumeration(self):
        specs = list(architectures())
        assert len(specs) > 50
        for s in specs:
            assert pb.interaction_count(s.layer_dims) == pb.interaction_count_bruteforce(s.layer_dims), s


class TestTendril:
    def test_lr_zero_constant(self, bundled):
        sub = bundled.subset(range(20))
        spec = nn.NetworkSpec(6, 4, 2, activation="tanh", init_scheme="xavier_normal")
        run = nn.train(spec, sub, lr=0.0, epochs=4, batch_size=4, seed=0, snapshot_every=2)
        rows = pb.tendril_profile(run, sub, 4, 12, seed=1)
        assert len(rows) == len(run.snapshots)
        for r in rows[1:]:
            assert (r.id_two_nn, r.id_pr, r.confusion, r.loss) == (
                rows[0].id_two_nn, rows[0].id_pr, rows[0].confusion, rows[0].loss)

    def test_deterministic_and_csv(self, bundled):
        sub = bundled.subset(range(20))
        spec = nn.NetworkSpec(6, 4, 2, activation="tanh", init_scheme="xavier_normal")
        run = nn.train(spec, sub, lr=0.1, epochs=6, batch_size=4, seed=0, snapshot_every=3)
        a = pb.profile_csv(pb.tendril_profile(run, sub, 4, 12, seed=1))
        b = pb.profile_csv(pb.tendril_profile(run, sub, 4, 12, seed=1))
        assert a == b
        lines = a.strip().split("\n")
        assert lines[0] == "epoch,loss,id_two_nn,id_pr,confusion"
        assert len(lines) == 1 + len(run.snapshots)

    def test_degenerate_rows_reported(self, bundled):
        sub = bundled.subset(range(5))
        spec = nn.NetworkSpec(6, 3, 1, activation="tanh", init_scheme="xavier_normal")
        run = nn.train(spec, sub, lr=0.1, epochs=2, batch_size=5, seed=0)
        rows = pb.tendril_profile(run, sub, 5, 4, seed=0)
        assert all(r.id_pr is None and r.notes for r in rows)
        assert all(r.confusion == pytest.approx(1.0) for r in rows)

    def test_needs_two_snapshots(self, bundled):
        run = nn.TrainRun([0.5], [(0, small_weights()[1])], 0.5, 0.1, 1, 0, small_weights()[1])
        with pytest.raises(DomainError):
            pb.tendril_profile(run, bundled, 1, 5, 0)

    def test_pr_shrinks_near_fit(self, bundled):
        sub = bundled.subset(range(8))
        run = nn.train(nn.NetworkSpec(6, 3, 3), sub, lr=0.1, epochs=300, batch_size=1, seed=0,
                       snapshot_every=100)
        rows = pb.tendril_profile(run, sub, 1, 32, seed=0)
        assert rows[-1].loss < 0.01
        assert rows[-1].id_pr < rows[0].id_pr


def test_width_for_budget():
    w = pb.width_for_budget(6, 3, 253)
    assert abs(nn.param_count(nn.NetworkSpec(6, w, 3)) - 253) <= abs(
        nn.param_count(nn.NetworkSpec(6, w + 1, 3)) - 253)
