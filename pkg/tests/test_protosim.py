import json
import math

import numpy as np
import pytest

from steerlab import steer
from steerlab.protosim import ProtocolConfig, expected_eta, run_protocol, significance, worker_count


def honest(**kw):
    base = dict(mu=0.991, eta_detector=0.17, n_settings=16, rounds=200_000, seed=1)
    return ProtocolConfig(**{**base, **kw})


class TestSignificance:
    def test_reported_value(self):
        assert significance(0.966, 0.005, 0.924) == pytest.approx(8.4)

    def test_zero(self):
        assert significance(0.7, 0.01, 0.7) == 0

    def test_negative(self):
        assert significance(0.951, 0.006, 0.989) < 0

    def test_bad_delta(self):
        with pytest.raises(ValueError):
            significance(0.9, 0.0, 0.5)


class TestConfig:
    def test_defaults(self):
        cfg = ProtocolConfig()
        assert cfg.n_settings == 16 and cfg.strategy == "honest" and cfg.seed is None

    @pytest.mark.parametrize("kw", [
        dict(mu=1.2), dict(p=-0.1), dict(eta_detector=2), dict(rounds=0), dict(n_settings=7),
        dict(strategy="sneaky"), dict(direction="both"), dict(systematic_tilt_deg=-1), dict(state="fock"),
        dict(strategy="dishonest", eta_detector=0.0),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ProtocolConfig(**kw)

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            ProtocolConfig.from_dict({"mu": 0.5, "colour": "blue"})

    def test_json_round_trip(self):
        cfg = honest(p=0.3, direction="bob_steers_alice")
        assert ProtocolConfig.from_json(json.dumps(cfg.to_dict())) == cfg

    def test_with_seed(self):
        cfg = ProtocolConfig().with_seed()
        assert isinstance(cfg.seed, int)
        assert honest().with_seed().seed == 1


class TestHonest:
    def test_perfect(self):
        rec = run_protocol(ProtocolConfig(mu=1, rounds=100_000, seed=3))
        assert rec.s_n == 1.0
        assert rec.delta_stat == 0
        assert rec.eta_observed == 1.0

    def test_reported_parameters(self):
        rec = run_protocol(honest(rounds=1_000_000))
        assert abs(rec.s_n - 0.991) <= 3 * rec.delta_stat
        sigma_eta = math.sqrt(0.17 * 0.83 / rec.kept)
        assert abs(rec.eta_observed - 0.17) <= 3 * sigma_eta
        assert rec.bound == pytest.approx(steer.deterministic_bound(16, rec.eta_observed).value)
        assert rec.significance > 0

    def test_error_budget(self):
        rec = run_protocol(honest(systematic_tilt_deg=0.5))
        assert rec.delta_sys == pytest.approx(math.sin(math.radians(0.5)))
        assert rec.delta_total**2 == pytest.approx(rec.delta_stat**2 + rec.delta_sys**2, abs=1e-12)
        assert rec.delta_stat == pytest.approx(math.sqrt((1 - rec.s_n**2) / rec.reported))

    @pytest.mark.parametrize("p", [0.0, 0.5, 0.87])
    def test_loss_invariance(self, p):
        rec = run_protocol(honest(p=p, rounds=400_000))
        assert abs(rec.s_n - 0.991) <= 3 * rec.delta_stat

    def test_oneway_state(self):
        # only (1 - p)/3 of rounds carry Bob's qubit
        rec = run_protocol(honest(mu=0.978, p=0.995, state="oneway_povm", eta_detector=1.0, rounds=3_000_000))
        assert rec.kept == pytest.approx(3_000_000 * 0.005 / 3, rel=0.1)
        assert abs(rec.s_n - 0.978) <= 3 * rec.delta_stat

    def test_bob_steers(self):
        cfg = honest(p=0.5, eta_detector=0.8, direction="bob_steers_alice")
        assert expected_eta(cfg) == pytest.approx(0.4)
        rec = run_protocol(cfg)
        assert abs(rec.eta_observed - 0.4) <= 3 * math.sqrt(0.4 * 0.6 / rec.kept)
        assert abs(rec.s_n - 0.991) <= 3 * rec.delta_stat

    @pytest.mark.parametrize("n", [6, 10])
    def test_other_settings(self, n):
        rec = run_protocol(honest(n_settings=n, mu=0.6, eta_detector=1.0))
        assert abs(rec.s_n - 0.6) <= 3 * rec.delta_stat

    def test_nothing_reported(self):
        with pytest.raises(ValueError):
            run_protocol(ProtocolConfig(eta_detector=0.0, rounds=100, seed=0))


class TestDishonest:
    def cfg(self, **kw):
        base = dict(strategy="dishonest", eta_detector=0.17, rounds=200_000, seed=5)
        return ProtocolConfig(**{**base, **kw})

    def test_saturates_bound(self):
        rec = run_protocol(self.cfg(rounds=1_000_000))
        c = steer.deterministic_bound(16, 0.17).value
        assert abs(rec.s_n - c) <= 3 * rec.delta_stat
        assert rec.kept == 1_000_000
        assert abs(rec.eta_observed - 0.17) <= 3 * math.sqrt(0.17 * 0.83 / rec.kept)

    @pytest.mark.parametrize("eta", [0.1, 0.5, 1.0])
    def test_reporting_rate(self, eta):
        rec = run_protocol(self.cfg(eta_detector=eta))
        assert abs(rec.eta_observed - eta) <= 3 * math.sqrt(eta * (1 - eta) / rec.kept) + 1e-12

    def test_seed_suite_calibrated(self):
        # z = (S - C)/delta_stat should be standard normal across seeds
        c = steer.deterministic_bound(16, 0.17).value
        z = np.array([
            (r.s_n - c) / r.delta_stat
            for r in (run_protocol(self.cfg(rounds=50_000, seed=s)) for s in range(100))
        ])
        assert abs(z.mean()) <= 0.4
        assert 0.7 <= z.std() <= 1.3
        # P(3 or more beyond 3 sigma in 100 draws) is 3e-4
        assert np.sum(z > 3) <= 2


class TestReproducibility:
    def test_same_seed(self):
        cfg = honest(rounds=300_000, seed=11)
        assert run_protocol(cfg) == run_protocol(cfg)

    def test_thread_count(self):
        cfg = honest(rounds=3 * (1 << 17) + 17, seed=12)
        one, many = run_protocol(cfg, threads=1), run_protocol(cfg, threads=3)
        assert one == many
        dis = ProtocolConfig(strategy="dishonest", eta_detector=0.3, rounds=300_000, seed=4)
        assert run_protocol(dis, threads=1) == run_protocol(dis, threads=4)

    def test_env_threads(self, monkeypatch):
        monkeypatch.setenv("STEERLAB_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("STEERLAB_THREADS", "junk")
        with pytest.raises(ValueError, match="STEERLAB_THREADS"):
            worker_count()

    def test_record_echoes_config(self):
        rec = run_protocol(honest(rounds=1000))
        data = json.loads(rec.to_json())
        assert ProtocolConfig.from_dict(data["config"]) == rec.config
        for key in ("s_n", "delta_stat", "delta_sys", "delta_total", "eta_observed", "bound", "significance"):
            assert key in data
