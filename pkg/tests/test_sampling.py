import numpy as np
import pytest

from specbridge.bridge import BridgeSchedule, bwe_mask, degrade, inpaint_mask
from specbridge.denoise import OracleDenoiser
from specbridge.sampling import (
    SamplerConfig,
    WindowPlan,
    multidiffusion_eval,
    plan_windows,
    predict_x0,
    restore,
    restore_long,
    reverse_step,
)
from specbridge.spectral import FactorizedSpec

from conftest import TOY_SR


def _rand_spec(rng, n=33, w=24):
    return FactorizedSpec(rng.standard_normal((n, w, 3)), sample_rate=TOY_SR)


# ------------------------------------------------------------ reverse steps


def test_predict_x0_inverts_oracle(rng):
    sched = BridgeSchedule()
    x0 = _rand_spec(rng)
    x_t = FactorizedSpec(x0.data + rng.standard_normal(x0.data.shape),
                         sample_rate=TOY_SR)
    for t in (0.2, 0.5, 1.0):
        eps = OracleDenoiser(x0, sched).evaluate(x_t, t)
        x0_hat = predict_x0(x_t, eps, t, sched)
        assert np.max(np.abs(x0_hat.data - x0.data)) < 1e-12


def test_reverse_step_dt_zero_is_identity(rng):
    cfg = SamplerConfig(num_steps=10)
    x_t = _rand_spec(rng)
    x0_hat = _rand_spec(rng)  # arbitrary estimate must not leak in
    for t in (0.2, 0.5, 0.9, 1.0):
        out = reverse_step(x_t, x0_hat, t, 0.0, rng, cfg)
        assert np.max(np.abs(out.data - x_t.data)) < 1e-12


def test_reverse_step_final_collapse(rng):
    cfg = SamplerConfig(num_steps=10)
    x_t = _rand_spec(rng)
    x0_hat = _rand_spec(rng)
    out = reverse_step(x_t, x0_hat, 0.25, 0.25, rng, cfg)
    assert np.max(np.abs(out.data - x0_hat.data)) < 1e-12
    # stochastic mode too: the step-to-zero variance is exactly zero
    out2 = reverse_step(x_t, x0_hat, 0.25, 0.25, rng, SamplerConfig(num_steps=10))
    assert np.array_equal(out2.data, out.data)


def test_reverse_step_mean_and_variance(rng):
    sched = BridgeSchedule()
    cfg = SamplerConfig(num_steps=10)
    x_t = FactorizedSpec(np.full((8, 8, 3), 0.7), sample_rate=TOY_SR)
    x0_hat = FactorizedSpec(np.full((8, 8, 3), -0.4), sample_rate=TOY_SR)
    t, dt = 0.8, 0.3
    s_t = float(sched.sigma2(t))
    s_p = float(sched.sigma2(t - dt))
    mean_expect = ((s_t - s_p) * -0.4 + s_p * 0.7) / s_t
    var_expect = (s_t - s_p) * s_p / s_t
    draws = np.stack(
        [reverse_step(x_t, x0_hat, t, dt, rng, cfg).data for _ in range(3000)]
    )
    assert np.mean(draws) == pytest.approx(mean_expect, abs=0.01)
    assert np.var(draws) == pytest.approx(var_expect, rel=0.1)
    det = reverse_step(x_t, x0_hat, t, dt, rng, SamplerConfig(10, deterministic=True))
    assert np.allclose(det.data, mean_expect, atol=1e-15)


def test_reverse_step_domain_errors(rng):
    cfg = SamplerConfig(num_steps=10)
    x = _rand_spec(rng)
    with pytest.raises(ValueError):
        reverse_step(x, x, 0.0, 0.0, rng, cfg)
    with pytest.raises(ValueError):
        reverse_step(x, x, 0.3, 0.4, rng, cfg)  # overshoots zero


# ---------------------------------------------------------------- restore


@pytest.mark.parametrize("num_steps", [1, 4, 50])
@pytest.mark.parametrize("deterministic", [True, False])
def test_restore_oracle_recovers_exactly(rng, num_steps, deterministic):
    x0 = _rand_spec(rng, n=65, w=40)
    m = bwe_mask((65, 40), 20)
    x1 = degrade(x0, m, 1.0, rng)
    cfg = SamplerConfig(num_steps=num_steps, deterministic=deterministic)
    out = restore(x1, m, OracleDenoiser(x0), cfg, rng)
    assert np.max(np.abs(out.data - x0.data)) < 1e-8
    # known region comes back bit-identical under clamping
    assert np.array_equal(out.data[~m.mask], x1.data[~m.mask])


def test_restore_exact_without_clamp(rng):
    x0 = _rand_spec(rng, n=65, w=40)
    m = inpaint_mask((65, 40), [(10, 25)])
    x1 = degrade(x0, m, 1.0, rng)
    cfg = SamplerConfig(num_steps=25, clamp_known_region=False)
    out = restore(x1, m, OracleDenoiser(x0), cfg, rng)
    assert np.max(np.abs(out.data - x0.data)) < 1e-8


def test_restore_rejects_oversized_input(rng):
    x0 = _rand_spec(rng, n=33, w=40)
    m = bwe_mask((33, 40), 16)
    x1 = degrade(x0, m, 1.0, rng)
    oracle = OracleDenoiser(x0)
    oracle.window_frames = 16  # narrower than the input
    with pytest.raises(ValueError):
        restore(x1, m, oracle, SamplerConfig(4), rng)


# ------------------------------------------------------------ window plans


def test_plan_windows_worked_example():
    plan = plan_windows(512, 256, 128)
    assert plan.offsets == (0, 128, 256)
    assert plan.pad == 0
    # coverage counts form the 1,2,2,1 block pattern
    assert np.all(plan.counts[0:128] == 1)
    assert np.all(plan.counts[128:384] == 2)
    assert np.all(plan.counts[384:512] == 1)


def test_plan_windows_cyclic_tail():
    plan = plan_windows(300, 256, 128)
    assert plan.offsets == (0, 128)
    assert plan.pad == 84  # 128 + 256 - 300
    assert np.all(plan.counts >= 1)


def test_plan_windows_degenerate_single_window():
    plan = plan_windows(64, 256, 128)
    assert plan.offsets == (0,)
    assert plan.window == 64 and plan.pad == 0


def test_plan_windows_errors():
    with pytest.raises(ValueError):
        plan_windows(100, 32, 0)
    with pytest.raises(ValueError):
        plan_windows(100, 32, 48)  # hop > window
    with pytest.raises(ValueError):
        plan_windows(0, 32, 16)


def test_window_plan_rejects_uncovered_frames():
    with pytest.raises(ValueError):
        WindowPlan(window=16, hop=16, full_width=64, offsets=(0, 32), pad=0)


# ------------------------------------------------------- multidiffusion


class _ConstantDenoiser:
    window_frames = None

    def __init__(self, value):
        self.value = value

    def evaluate(self, x_t, t):
        return FactorizedSpec(np.full_like(x_t.data, self.value),
                              sample_rate=x_t.sample_rate)


def test_multidiffusion_constant_field(rng):
    x = _rand_spec(rng, n=17, w=300)
    plan = plan_windows(300, 96, 48)
    out = multidiffusion_eval(x, 0.5, _ConstantDenoiser(0.37), plan)
    assert np.max(np.abs(out.data - 0.37)) < 1e-12


def test_multidiffusion_matches_direct_oracle(rng):
    x0 = _rand_spec(rng, n=17, w=300)
    x_t = FactorizedSpec(x0.data + rng.standard_normal(x0.data.shape),
                         sample_rate=TOY_SR)
    oracle = OracleDenoiser(x0)
    direct = oracle.evaluate(x_t, 0.4)
    for window, hop in ((96, 48), (100, 30), (300, 10)):
        plan = plan_windows(300, window, hop)
        tiled = multidiffusion_eval(x_t, 0.4, oracle, plan)
        assert np.max(np.abs(tiled.data - direct.data)) < 1e-10


def test_multidiffusion_width_mismatch(rng):
    x = _rand_spec(rng, n=17, w=64)
    plan = plan_windows(128, 32, 16)
    with pytest.raises(ValueError):
        multidiffusion_eval(x, 0.5, _ConstantDenoiser(0.0), plan)


def test_restore_long_single_window_bitwise_equals_restore(rng):
    x0 = _rand_spec(rng, n=33, w=48)
    m = bwe_mask((33, 48), 12)
    x1 = degrade(x0, m, 1.0, rng)
    oracle = OracleDenoiser(x0)
    cfg = SamplerConfig(num_steps=7)  # stochastic: rng streams must align
    plan = plan_windows(48, 64, 32)
    out_a = restore(x1, m, oracle, cfg, np.random.default_rng(5))
    out_b = restore_long(x1, m, oracle, cfg, plan, np.random.default_rng(5))
    assert np.array_equal(out_a.data, out_b.data)


def test_restore_long_oracle_recovers_long_input(rng):
    x0 = _rand_spec(rng, n=33, w=200)
    m = inpaint_mask((33, 200), [(40, 60), (140, 170)])
    x1 = degrade(x0, m, 1.0, rng)
    plan = plan_windows(200, 64, 32)
    cfg = SamplerConfig(num_steps=25)
    out = restore_long(x1, m, OracleDenoiser(x0), cfg, plan, rng)
    assert np.max(np.abs(out.data - x0.data)) < 1e-8


def test_restore_long_plan_width_guard(rng):
    x0 = _rand_spec(rng, n=33, w=200)
    m = bwe_mask((33, 200), 16)
    x1 = degrade(x0, m, 1.0, rng)
    plan = plan_windows(128, 64, 32)
    with pytest.raises(ValueError):
        restore_long(x1, m, OracleDenoiser(x0), SamplerConfig(4), plan, rng)
