import numpy as np
import pytest

from ris_sim import channel
from ris_sim.channel import (effective_channel_miso, generate_channels,
                             path_loss, reflect_channel_split, rician_channel,
                             steering_ula, steering_upa)
from ris_sim.config import ReflectionTopology, default_config

from oracles import dense_cascade_channel


class TestPathLoss:
    def test_reference_distance(self):
        assert path_loss(1.0, 2.2) == pytest.approx(1e-3, rel=1e-12)

    def test_hand_value(self):
        assert path_loss(100.0, 2.2) == pytest.approx(3.981071705534969e-08,
                                                      rel=1e-12)

    def test_zero_exponent(self):
        assert path_loss(1.0, 0.0) == pytest.approx(1e-3, rel=1e-12)

    def test_below_reference_rejected(self):
        with pytest.raises(ValueError, match="below reference distance"):
            path_loss(0.5, 2.2)


class TestSteering:
    def test_broadside(self):
        assert np.allclose(steering_ula(2, 0.5, 0.0), [1.0, 1.0])

    def test_hand_value(self):
        vec = steering_ula(2, 0.5, 0.5)
        assert np.allclose(vec, [1.0, 1.0j])

    def test_unit_modulus(self):
        vec = steering_ula(4, 0.5, -0.73)
        assert np.allclose(np.abs(vec), 1.0)

    def test_upa_single_element(self):
        assert np.allclose(steering_upa(1, 1, 0.125, 0.3, -0.2), [1.0])

    def test_upa_degenerate_axis(self):
        az, el = 0.4, 0.1
        vec = steering_upa(2, 1, 0.5, az, el)
        expected = steering_ula(2, 0.5, np.cos(el) * np.cos(az))
        assert np.allclose(vec, expected)

    def test_upa_broadside_all_ones(self):
        vec = steering_upa(2, 2, 0.125, np.pi / 2, 0.0)
        assert np.allclose(vec, np.ones(4))


class TestRician:
    def test_zero_gain(self):
        rng = np.random.default_rng(0)
        out = rician_channel(3, 2, 0.0, 5.0, np.ones((3, 2)), rng)
        assert np.allclose(out, 0.0)

    def test_los_limit(self):
        rng = np.random.default_rng(1)
        los = np.exp(1j * rng.random((4, 4)))
        out = rician_channel(4, 4, 2.0, 1e12, los, rng)
        assert np.linalg.norm(out - np.sqrt(2.0) * los) <= 1e-5 * np.linalg.norm(out)

    def test_rayleigh_variance(self):
        rng = np.random.default_rng(2)
        samples = rician_channel(100, 100, 1.0, 0.0, np.ones((100, 100)), rng)
        variance = np.mean(np.abs(samples) ** 2)
        assert abs(variance - 1.0) <= 0.05

    def test_shape_mismatch(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError, match="LoS shape"):
            rician_channel(2, 2, 1.0, 1.0, np.ones((3, 2)), rng)


class TestGenerateChannels:
    def test_determinism(self):
        cfg = default_config(users=3, bs_antennas=2, ris_elements=[4])
        a = generate_channels(cfg, seed=7)
        b = generate_channels(cfg, seed=7)
        assert np.array_equal(a.direct, b.direct)
        assert np.array_equal(a.bs_ris[0], b.bs_ris[0])
        for key in a.ris_user:
            assert np.array_equal(a.ris_user[key], b.ris_user[key])

    def test_seed_changes_draw(self):
        cfg = default_config(users=2, bs_antennas=2, ris_elements=[4])
        a = generate_channels(cfg, seed=1)
        b = generate_channels(cfg, seed=2)
        assert not np.allclose(a.direct, b.direct)

    def test_shapes(self):
        cfg = default_config(users=3, bs_antennas=5, ris_elements=[7, 4])
        chans = generate_channels(cfg, seed=0)
        assert chans.direct.shape == (3, 5)
        assert chans.bs_ris[0].shape == (7, 5)
        assert chans.ris_ris[(0, 1)].shape == (4, 7)
        assert chans.ris_user[(0, 1)].shape == (4,)

    def test_direct_rayleigh_when_k_factor_zero(self):
        # K_d = 0 leaves no LoS term: entries have zero mean
        cfg = default_config(users=1, bs_antennas=4, ris_elements=[4])
        draws = np.stack([generate_channels(cfg, seed=s).direct[0]
                          for s in range(400)])
        pooled_mean = np.abs(np.mean(draws))
        pooled_std = np.sqrt(np.mean(np.abs(draws) ** 2))
        assert pooled_mean <= 0.15 * pooled_std

    def test_direct_energy_scale(self):
        # E||h_d||^2 ~ M * kappa(d) within 10%
        cfg = default_config(users=1, bs_antennas=4, ris_elements=[4])
        total = 0.0
        expected = 0.0
        trials = 800
        for s in range(trials):
            chans = generate_channels(cfg, seed=s)
            total += np.linalg.norm(chans.direct[0]) ** 2
            d = np.linalg.norm(chans.user_positions[0]
                               - np.asarray(cfg.geometry.bs))
            expected += cfg.bs_antennas * path_loss(d, cfg.rician_direct.exponent)
        assert abs(total / expected - 1.0) <= 0.10

    def test_mimo_shapes(self):
        cfg = default_config(system="mimo", users=2, ris_elements=[6],
                             tx_antennas=3, rx_antennas=2)
        chans = generate_channels(cfg, seed=0)
        assert chans.ris_rx[0].shape == (2, 6)
        assert chans.tx_ris[1].shape == (6, 3)
        assert chans.direct[0][1].shape == (2, 3)


def unit_phases(rng, n):
    return np.exp(2j * np.pi * rng.random(n))


class TestEffectiveChannel:
    def test_no_ris_reduction(self):
        cfg = default_config(users=2, bs_antennas=3, ris_elements=[4])
        chans = generate_channels(cfg, seed=0)
        topo = ReflectionTopology.no_ris(2)
        thetas = [np.ones(4, dtype=complex)]
        h = effective_channel_miso(0, thetas, chans, topo)
        assert np.array_equal(h, chans.direct[0])

    def test_identity_composition(self):
        # L=1, G=I, theta=1, h_r=e1, h_d=0 -> e1
        chans = channel.ChannelSetMiso(
            bs_ris={0: np.eye(3, dtype=complex)},
            ris_ris={},
            ris_user={(0, 0): np.eye(3, dtype=complex)[:, 0]},
            direct=np.zeros((1, 3), dtype=complex),
            user_positions=np.zeros((1, 3)))
        topo = ReflectionTopology(paths=(((0,),),))
        h = effective_channel_miso(0, [np.ones(3, dtype=complex)], chans, topo)
        assert np.allclose(h, np.eye(3)[:, 0])

    def test_two_hop_matches_dense_oracle(self):
        cfg = default_config(users=2, bs_antennas=3, ris_elements=[5, 4],
                             distance_m=100.0)
        chans = generate_channels(cfg, seed=3)
        topo = ReflectionTopology.cascade(2, 2)
        rng = np.random.default_rng(5)
        thetas = [unit_phases(rng, 5), unit_phases(rng, 4)]
        for k in range(2):
            h = effective_channel_miso(k, thetas, chans, topo)
            dense = dense_cascade_channel(
                chans.bs_ris, chans.ris_ris, chans.ris_user[(k, 1)], thetas,
                (0, 1), chans.direct[k])
            assert np.linalg.norm(h - dense) <= 1e-12 * max(
                1.0, np.linalg.norm(dense))

    def test_missing_edge_raises(self):
        chans = channel.ChannelSetMiso(
            bs_ris={}, ris_ris={}, ris_user={},
            direct=np.zeros((1, 2), dtype=complex),
            user_positions=np.zeros((1, 3)))
        topo = ReflectionTopology(paths=(((0,),),))
        with pytest.raises(ValueError, match="missing"):
            effective_channel_miso(0, [np.ones(2, dtype=complex)], chans, topo)


class TestReflectSplit:
    def test_single_hop_closed_form(self):
        cfg = default_config(users=2, bs_antennas=3, ris_elements=[4])
        chans = generate_channels(cfg, seed=1)
        topo = ReflectionTopology.cascade(1, 2)
        thetas = [unit_phases(np.random.default_rng(0), 4)]
        f, rem = reflect_channel_split(0, 0, thetas, chans, topo)
        expected = chans.bs_ris[0].T * chans.ris_user[(0, 0)]
        assert np.allclose(f, expected)
        assert np.allclose(rem, chans.direct[0])

    def test_affinity_against_effective_channel(self):
        cfg = default_config(users=2, bs_antennas=3, ris_elements=[5, 4],
                             distance_m=100.0)
        chans = generate_channels(cfg, seed=2)
        topo = ReflectionTopology.cascade(2, 2)
        rng = np.random.default_rng(9)
        for _ in range(100):
            thetas = [unit_phases(rng, 5), unit_phases(rng, 4)]
            for l in range(2):
                f, rem = reflect_channel_split(0, l, thetas, chans, topo)
                h = effective_channel_miso(0, thetas, chans, topo)
                assert np.linalg.norm(f @ thetas[l] + rem - h) <= 1e-12 * max(
                    1.0, np.linalg.norm(h))

    def test_double_ris_includes_single_and_double_reflections(self):
        # fully-connected double-RIS: F_{k,1} = G01^T diag(G12^T Th2 h2 + h1)
        topo = ReflectionTopology(paths=(((0, 1), (0,), (1,)),))
        cfg = default_config(users=1, bs_antennas=2, ris_elements=[3, 3],
                             distance_m=100.0, topology=topo)
        chans = generate_channels(cfg, seed=4)
        rng = np.random.default_rng(11)
        thetas = [unit_phases(rng, 3), unit_phases(rng, 3)]
        f, rem = reflect_channel_split(0, 0, thetas, chans, topo)
        inner = (chans.ris_ris[(0, 1)].T @ (thetas[1] * chans.ris_user[(0, 1)])
                 + chans.ris_user[(0, 0)])
        expected_f = chans.bs_ris[0].T * inner
        expected_rem = (chans.bs_ris[1].T @ (thetas[1] * chans.ris_user[(0, 1)])
                        + chans.direct[0])
        assert np.allclose(f, expected_f)
        assert np.allclose(rem, expected_rem)

    def test_unused_ris_raises(self):
        cfg = default_config(users=2, bs_antennas=2, ris_elements=[3])
        chans = generate_channels(cfg, seed=0)
        topo = ReflectionTopology(paths=(((0,),), ()))
        with pytest.raises(ValueError, match="not used"):
            reflect_channel_split(1, 0, [np.ones(3, dtype=complex)], chans, topo)
