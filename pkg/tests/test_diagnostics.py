import numpy as np
import pytest

import gradsuite
from structnet.diagnostics import (
    ablation_projection_variants,
    ablation_residual,
    condition_number,
    depth_sweep,
    frequency_response,
    jacobian_spectrum,
    multires_compose,
    perturbation_robustness,
    recurse,
    two_branch_network,
)
from structnet.errors import DivergenceError, ValidationError
from structnet.linalg import svd_values
from structnet.net import Architecture, CorrectionNet, Network, StructuredLayer, init_network
from structnet.shaping import DCTBand, DiagonalScale, Identity
from structnet.tasks import gen_freq_sweep, gen_multiscale_signal, gen_signal_recovery
from structnet.train import TrainConfig
from test_net import numeric_jacobian


def linear_net(dim, *ops, seed=0):
    r = np.random.default_rng(seed)
    return Network([StructuredLayer(r.standard_normal((dim, dim)) / np.sqrt(dim), op, None) for op in ops])


def contraction_layer(dim=16, gamma=0.9, phi_lip=0.05, seed=0):
    """Capped structured layer whose correction has Lipschitz product ``phi_lip``."""
    r = np.random.default_rng(seed)
    layer = init_network(Architecture((dim, dim), shaping="dct_band", gamma=gamma), seed).layers[0]
    w2 = r.standard_normal((dim, dim))
    corr = layer.correction
    w2 *= phi_lip / (svd_values(w2)[0] * svd_values(corr.w1)[0])
    corr.w2[...] = w2
    corr.b1[...] = r.standard_normal(dim)
    corr.b2[...] = r.standard_normal(dim)
    return layer


class TestJacobianSpectrum:
    def test_disabled_correction(self, rng):
        layer = gradsuite.random_layer("laplacian_smooth", 6, 6, rng, correction=False)
        rep = jacobian_spectrum(Network([layer]), rng.standard_normal((4, 6)))
        expected = svd_values(layer.effective_map())
        assert np.max(np.abs(rep.spectra[0] - expected)) < 1e-10

    def test_identity_net(self, rng):
        net = Network([StructuredLayer(np.eye(5), Identity(5, 5), None)])
        rep = jacobian_spectrum(net, rng.standard_normal((3, 5)))
        np.testing.assert_allclose(rep.network, 1.0, atol=1e-14)
        assert np.all(rep.condition[0] == 1.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_finite_difference_spectrum(self, seed):
        r = np.random.default_rng(seed)
        net = Network([gradsuite.random_layer("dct_band", 5, 5, r, True, "tanh"),
                       gradsuite.random_layer("learned_projection", 5, 4, r)])
        x = r.standard_normal(5)
        rep = jacobian_spectrum(net, x[None])
        fd = svd_values(numeric_jacobian(net, x))
        assert np.max(np.abs(rep.network[0] - fd)) < 1e-5

    def test_condition_floor(self):
        assert condition_number(np.array([4.0, 2.0, 1e-15])) == 2.0
        assert condition_number(np.zeros(3)) == float("inf")


class TestFrequencyResponse:
    def test_identity(self):
        net = Network([StructuredLayer(np.eye(16), Identity(16, 16), None)])
        fr = frequency_response(net, gen_freq_sweep(16, 15))
        np.testing.assert_allclose(fr.gains, 1.0, atol=1e-14)

    def test_lowpass_forced(self):
        dim = 32
        net = linear_net(dim, DCTBand.lowpass(dim, dim), Identity(dim, dim))
        fr = frequency_response(net, gen_freq_sweep(dim, dim - 1))
        low, high = fr.gains[fr.modes < dim / 4], fr.gains[fr.modes >= 3 * dim / 4]
        assert np.all(high < 1e-9)
        assert np.all(low > 0)

    def test_linear_recompute(self):
        dim = 12
        net = linear_net(dim, DCTBand.highpass(dim, dim), Identity(dim, dim), seed=4)
        a = net.layers[1].effective_map() @ net.layers[0].effective_map()
        sweep = gen_freq_sweep(dim, 8)
        fr = frequency_response(net, sweep)
        for g, (_, probes) in zip(fr.gains, sweep):
            assert abs(g - np.mean(np.linalg.norm(probes @ a.T, axis=1))) < 1e-10

    def test_needs_square(self, rng):
        net = Network([StructuredLayer(rng.standard_normal((3, 4)), Identity(3, 4), None)])
        with pytest.raises(ValidationError):
            frequency_response(net, gen_freq_sweep(4, 3))


class TestRecurse:
    def test_half_identity(self, rng):
        layer = StructuredLayer(np.eye(6), DiagonalScale(np.full(6, 0.5), 6), None)
        x0 = rng.standard_normal(6)
        tr = recurse(layer, x0, max_iters=60, tol=1e-300)
        t = np.arange(1, tr.deltas.size + 1)
        expected = 0.5 ** t * np.linalg.norm(x0)
        assert np.max(np.abs(tr.deltas / expected - 1)) < 1e-12
        assert np.max(np.abs(tr.energies[1:] / tr.energies[:-1] - 0.25)) < 1e-12
        assert abs(tr.decay_rate() - 0.5) < 1e-12

    def test_identity_converges_immediately(self, rng):
        layer = StructuredLayer(np.eye(4), Identity(4, 4), None)
        tr = recurse(layer, rng.standard_normal(4))
        assert tr.converged and tr.iterations == 1 and tr.deltas[0] == 0

    def test_banach_decay(self):
        layer = contraction_layer()
        lip = layer.lipschitz_bound()
        assert lip <= 0.95 + 1e-9
        tr = recurse(layer, np.ones(16) * 3, max_iters=500, tol=1e-12)
        assert tr.converged
        assert tr.decay_rate() <= 0.95 + 0.01
        assert np.all(tr.energies[1:] <= lip ** 2 * tr.energies[:-1] * (1 + 1e-9) + 1e-300)

    def test_divergence_recorded(self):
        layer = StructuredLayer(np.eye(3), DiagonalScale(np.full(3, 3.0), 3), None)
        with pytest.raises(DivergenceError) as err:
            recurse(layer, np.ones(3))
        assert err.value.record.deltas.size == err.value.index

    def test_rejects(self, rng):
        with pytest.raises(ValidationError):
            recurse(StructuredLayer(np.eye(3, 4), Identity(3, 4), None), np.ones(4))


class TestRobustness:
    def test_zero_sigma(self, rng):
        net = linear_net(4, Identity(4, 4))
        rep = perturbation_robustness(net, rng.standard_normal((5, 4)), [0.0], trials=3)
        assert rep.mean[0] == 0 and rep.slope == 0

    def test_linear_slope(self, rng):
        dim = 8
        net = linear_net(dim, DCTBand.lowpass(dim, dim, 0.5), Identity(dim, dim), seed=2)
        a = net.layers[1].effective_map() @ net.layers[0].effective_map()
        rep = perturbation_robustness(net, rng.standard_normal((4, dim)), [0.1, 0.2, 0.4], trials=200, seed=1)
        # independent Monte Carlo of E|A z| with its own draws
        z = np.random.default_rng(99).standard_normal((20000, dim))
        expected = np.mean(np.linalg.norm(z @ a.T, axis=1))
        assert abs(rep.slope / expected - 1) < 0.10
        assert np.all(rep.mean >= 0) and np.all(rep.std >= 0)

    def test_rejects(self, rng):
        net = linear_net(3, Identity(3, 3))
        with pytest.raises(ValidationError):
            perturbation_robustness(net, np.ones(3), [0.2, 0.1])
        with pytest.raises(ValidationError):
            perturbation_robustness(net, np.ones(3), [0.1], trials=0)


QUICK = TrainConfig(epochs=8, learning_rate=1e-2)


class TestSweeps:
    def test_depth(self):
        task = gen_signal_recovery(0, n_samples=64, dim=8)
        recs = depth_sweep(Architecture((8, 8), shaping="dct_band"), [1, 2, 3], task, QUICK)
        assert [r.depth for r in recs] == [1, 2, 3]
        assert recs[0].final_loss < recs[0].initial_loss
        assert not any(r.diverged for r in recs)

    def test_depth_divergence_marker(self):
        task = gen_signal_recovery(0, n_samples=32, dim=4)
        cfg = TrainConfig(epochs=3, optimizer="sgd", learning_rate=1e8)
        recs = depth_sweep(Architecture((4, 4), shaping="identity", gamma=None), [2], task, cfg)
        assert recs[0].diverged and recs[0].diverged_epoch is not None
        assert np.isnan(recs[0].final_loss)

    def test_projection_variants(self):
        task = gen_signal_recovery(0, n_samples=64, dim=8)
        arch = Architecture((8, 8))
        res = ablation_projection_variants(task, ["identity", "identity", "learned_projection"][1:],
                                           QUICK, arch, seeds=range(5))
        assert set(res) == {"identity", "learned_projection"}
        for info in res.values():
            assert len(info["runs"]) == 5 and info["var"] >= 0
        p = res["learned_projection"]["runs"][0][2].layers[0].shaping.p
        assert np.linalg.norm(p - np.eye(8)) > 0

    def test_identity_variant_reproducible(self):
        task = gen_signal_recovery(0, n_samples=64, dim=8)
        a = ablation_projection_variants(task, ["identity"], QUICK, Architecture((8, 8)), seeds=[0])
        b = ablation_projection_variants(task, ["identity"], QUICK, Architecture((8, 8)), seeds=[0])
        assert a["identity"]["runs"][0][1].loss == b["identity"]["runs"][0][1].loss

    def test_residual_ablation(self):
        task = gen_multiscale_signal(0, n_samples=64, dim=16)
        (_, on, off), = ablation_residual(task, QUICK, Architecture((16, 16), shaping="dct_band"), seeds=[0])
        assert all(r == [0.0] for r in off.residual_norms)
        assert on.loss[0] == off.loss[0]
        assert on.epochs == off.epochs

    def test_multires(self):
        task = gen_multiscale_signal(0, n_samples=64, dim=16)
        res = multires_compose(task, QUICK, seed=0)
        pg, mlp = res["params"]["pgnn"], res["params"]["mlp"]
        assert abs(pg - mlp) / pg < 0.05
        logs = res["logs"]
        assert np.isfinite(logs["pgnn"].loss[-1]) and np.isfinite(logs["mlp"].loss[-1])
        assert logs["pgnn"].epochs == logs["mlp"].epochs

    def test_two_branch_bands(self):
        net = two_branch_network(16, 0)
        low, high = (b.shaping for b in net.layers[0].branches)
        assert set(low.passband).isdisjoint(high.passband)
        assert sorted(set(low.passband) | set(high.passband)) == list(range(16))
