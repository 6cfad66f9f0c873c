import numpy as np
import pytest

from intervaltv import experiments as ex
from intervaltv.signals import tv


class TestConfig:
    def test_defaults_validate(self):
        assert ex.ExperimentConfig().validate() == []

    def test_field_level_messages(self):
        cfg = ex.ExperimentConfig(n=4, sigma=-1.0, data_noise=2.0, levels=(1.0,))
        errs = cfg.validate()
        joined = " ".join(errs)
        assert "n:" in joined
        assert "sigma:" in joined
        assert "data_noise:" in joined
        assert "levels:" in joined

    def test_breakpoint_ordering_checked(self):
        cfg = ex.ExperimentConfig(breakpoints=(5.0, 4.0), levels=(1.0, 2.0, 3.0))
        assert any("increasing" in e for e in cfg.validate())

    def test_json_roundtrip_and_hash(self):
        cfg = ex.ExperimentConfig(seed=5, gamma=3e-4)
        back = ex.ExperimentConfig.from_json(cfg.to_json())
        assert back == cfg
        assert back.config_hash() == cfg.config_hash()
        assert back.config_hash() != ex.ExperimentConfig(seed=6, gamma=3e-4).config_hash()

    def test_with_seed(self):
        cfg = ex.ExperimentConfig(seed=1)
        assert cfg.with_seed(9).seed == 9


class TestSynthesize:
    def test_deterministic(self):
        a = ex.synthesize(ex.ExperimentConfig(seed=4, n=32))
        b = ex.synthesize(ex.ExperimentConfig(seed=4, n=32))
        np.testing.assert_array_equal(a.f_noisy.values, b.f_noisy.values)
        np.testing.assert_array_equal(a.a_noisy.entries, b.a_noisy.entries)

    def test_seed_changes_noise(self):
        a = ex.synthesize(ex.ExperimentConfig(seed=4, n=32))
        b = ex.synthesize(ex.ExperimentConfig(seed=5, n=32))
        assert not np.array_equal(a.f_noisy.values, b.f_noisy.values)

    def test_interval_invariants(self):
        inst = ex.synthesize(ex.ExperimentConfig(seed=0, n=32))
        assert inst.data.contains(inst.f_clean)
        assert inst.op.contains(inst.a_exact)
        assert np.all(inst.op.lower.entries >= 0)

    def test_zero_noise_degenerate(self):
        inst = ex.synthesize(
            ex.ExperimentConfig(seed=0, n=32, data_noise=0.0, op_noise=0.0)
        )
        np.testing.assert_array_equal(inst.data.lower.values, inst.data.upper.values)
        np.testing.assert_array_equal(inst.op.lower.entries, inst.op.upper.entries)
        np.testing.assert_array_equal(inst.f_noisy.values, inst.f_clean.values)

    def test_absolute_noise_model(self):
        cfg = ex.ExperimentConfig(seed=0, n=32, data_noise_model="absolute")
        inst = ex.synthesize(cfg)
        widths = inst.data.upper.values - inst.data.lower.values
        np.testing.assert_allclose(widths, widths[0])
        assert inst.data.contains(inst.f_clean)

    def test_nested_op_noise_override(self):
        cfg = ex.ExperimentConfig(seed=2, n=32)
        full = ex.synthesize(cfg)
        half = ex.synthesize(cfg, op_noise=0.025)
        assert np.all(half.op.lower.entries >= full.op.lower.entries - 1e-15)
        assert np.all(half.op.upper.entries <= full.op.upper.entries + 1e-15)
        assert half.op.contains(half.a_exact)

    def test_piecewise_signal_levels(self):
        cfg = ex.ExperimentConfig(n=32)
        inst = ex.synthesize(cfg)
        assert set(np.unique(inst.u_exact.values)) == set(cfg.levels)
        assert tv(inst.u_exact) > 0

    def test_invalid_config_raises(self):
        with pytest.raises(ValueError):
            ex.synthesize(ex.ExperimentConfig(n=2))


def test_schedule_config_roundtrip():
    cfg = ex.ExperimentConfig(schedule=ex.ScheduleConfig(eps0=0.5, steps=3))
    back = ex.ExperimentConfig.from_json(cfg.to_json())
    assert back.schedule == cfg.schedule
    assert back.schedule.to_schedule().steps == 3
