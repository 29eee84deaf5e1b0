"""Reverse bridge sampler and overlapped-window tiling for long inputs.

The sampler walks t from 1 to 0 on a uniform grid. Each step converts the
denoiser output into an x0 estimate and draws from the bridge posterior
conditioned on that estimate and the current state:

    mean = (dsig2 * x0_hat + sigma2(t-dt) * x_t) / sigma2(t)
    var  = dsig2 * sigma2(t-dt) / sigma2(t)

with dsig2 = sigma2(t) - sigma2(t-dt). The final step (t-dt = 0) therefore
collapses onto x0_hat exactly, and dt -> 0 leaves the state unchanged.

Long inputs are handled by averaging per-window denoiser outputs on an
overlapped frame grid (windows of W frames every H frames, the last window
cyclically padded); cells are divided by their coverage counts, so a
windowing-invariant denoiser yields exactly the full-width evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bridge import BridgeSchedule, MaskSpec
from .denoise import Denoiser
from .spectral import FactorizedSpec


@dataclass(frozen=True)
class SamplerConfig:
    num_steps: int = 50
    deterministic: bool = False
    clamp_known_region: bool = True

    def __post_init__(self) -> None:
        if self.num_steps < 1:
            raise ValueError("num_steps must be at least 1")


@dataclass(frozen=True)
class WindowPlan:
    """Overlapped frame-window layout for tiled evaluation."""

    window: int
    hop: int
    full_width: int
    offsets: tuple[int, ...]
    pad: int
    counts: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        counts = np.zeros(self.full_width, dtype=np.int64)
        for o in self.offsets:
            counts[o : min(o + self.window, self.full_width)] += 1
        if np.any(counts < 1):
            raise ValueError("window plan leaves frames uncovered")
        object.__setattr__(self, "counts", counts)


def plan_windows(full_width: int, window: int, hop: int) -> WindowPlan:
    """Window offsets 0, H, 2H, ... generated while the previous window does
    not yet reach the end; the last window may extend ``pad`` frames past the
    end (cyclically padded during evaluation, outputs there discarded).

    Degenerate case: full_width <= window collapses to a single exact-width
    window, so tiled evaluation reduces to direct evaluation.
    """
    if full_width < 1:
        raise ValueError("full_width must be positive")
    if not 0 < hop <= window:
        raise ValueError(f"need 0 < hop <= window, got hop={hop} window={window}")
    if full_width <= window:
        return WindowPlan(
            window=full_width, hop=hop, full_width=full_width, offsets=(0,), pad=0
        )
    offsets = [0]
    while offsets[-1] + window < full_width:
        offsets.append(offsets[-1] + hop)
    pad = max(0, offsets[-1] + window - full_width)
    return WindowPlan(
        window=window, hop=hop, full_width=full_width, offsets=tuple(offsets), pad=pad
    )


def _window_eval(d: Denoiser, x_t: FactorizedSpec, t: float, offset: int) -> FactorizedSpec:
    if hasattr(d, "evaluate_window"):
        return d.evaluate_window(x_t, t, offset)  # type: ignore[attr-defined]
    return d.evaluate(x_t, t)


def multidiffusion_eval(
    x_t: FactorizedSpec, t: float, d: Denoiser, plan: WindowPlan
) -> FactorizedSpec:
    """Coverage-count-averaged denoiser evaluation over the window plan."""
    if x_t.n_frames != plan.full_width:
        raise ValueError(
            f"tensor has {x_t.n_frames} frames, plan covers {plan.full_width}"
        )
    data = x_t.data
    if plan.pad > 0:
        data = np.concatenate([data, data[:, : plan.pad, :]], axis=1)
    acc = np.zeros_like(x_t.data)
    for o in plan.offsets:
        crop = FactorizedSpec(
            data[:, o : o + plan.window, :].copy(),
            rho=x_t.rho,
            sample_rate=x_t.sample_rate,
        )
        out = _window_eval(d, crop, t, o)
        valid = min(o + plan.window, plan.full_width) - o
        acc[:, o : o + valid, :] += out.data[:, :valid, :]
    acc /= plan.counts[None, :, None]
    return FactorizedSpec(acc, rho=x_t.rho, sample_rate=x_t.sample_rate)


def predict_x0(
    x_t: FactorizedSpec,
    eps_hat: FactorizedSpec,
    t: float,
    schedule: BridgeSchedule | None = None,
) -> FactorizedSpec:
    """Fold the displacement prediction back: x0_hat = x_t - sigma(t) * eps."""
    if not 0.0 < t <= 1.0:
        raise ValueError(f"t must lie in (0, 1], got {t}")
    schedule = schedule or BridgeSchedule()
    sig = float(schedule.sigma(t))
    return FactorizedSpec(
        x_t.data - sig * eps_hat.data, rho=x_t.rho, sample_rate=x_t.sample_rate
    )


def reverse_step(
    x_t: FactorizedSpec,
    x0_hat: FactorizedSpec,
    t: float,
    dt: float,
    rng: np.random.Generator,
    cfg: SamplerConfig,
    schedule: BridgeSchedule | None = None,
) -> FactorizedSpec:
    """One posterior step from t to t - dt given the current x0 estimate."""
    if not 0.0 < t <= 1.0:
        raise ValueError(f"t must lie in (0, 1], got {t}")
    if dt < 0.0 or t - dt < 0.0:
        raise ValueError(f"invalid step: t={t}, dt={dt}")
    schedule = schedule or BridgeSchedule()
    s_t = float(schedule.sigma2(t))
    s_p = float(schedule.sigma2(t - dt))
    dsig2 = s_t - s_p
    mean = (dsig2 * x0_hat.data + s_p * x_t.data) / s_t
    var = dsig2 * s_p / s_t
    data = mean
    if not cfg.deterministic and var > 0.0:
        data = mean + np.sqrt(var) * rng.standard_normal(mean.shape)
    return FactorizedSpec(data, rho=x_t.rho, sample_rate=x_t.sample_rate)


def _reverse_loop(x1, mask, eval_fn, cfg, rng, schedule):
    known = ~mask.mask
    x = x1.copy()
    n = cfg.num_steps
    for k in range(n):
        t = (n - k) / n
        t_next = (n - k - 1) / n
        eps = eval_fn(x, t)
        x0_hat = predict_x0(x, eps, t, schedule)
        x = reverse_step(x, x0_hat, t, t - t_next, rng, cfg, schedule)
        if cfg.clamp_known_region:
            x.data[known] = x1.data[known]
    return x


def restore(
    x1: FactorizedSpec,
    mask: MaskSpec,
    d: Denoiser,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    schedule: BridgeSchedule | None = None,
) -> FactorizedSpec:
    """Run the full reverse pass on a single window.

    With clamping enabled (default) the known region is reset to the degraded
    input after every step, so unmasked cells come back bit-identical.
    """
    if mask.mask.shape != x1.data.shape:
        raise ValueError("mask shape does not match input tensor")
    if d.window_frames is not None and x1.n_frames > d.window_frames:
        raise ValueError(
            f"input of {x1.n_frames} frames exceeds the denoiser window "
            f"({d.window_frames}); use restore_long"
        )
    schedule = schedule or BridgeSchedule()
    return _reverse_loop(x1, mask, lambda x, t: d.evaluate(x, t), cfg, rng, schedule)


def restore_long(
    x1: FactorizedSpec,
    mask: MaskSpec,
    d: Denoiser,
    cfg: SamplerConfig,
    plan: WindowPlan,
    rng: np.random.Generator,
    schedule: BridgeSchedule | None = None,
) -> FactorizedSpec:
    """Reverse pass with tiled denoiser evaluation (same loop as
    :func:`restore`; a single-window plan is bitwise identical to it)."""
    if mask.mask.shape != x1.data.shape:
        raise ValueError("mask shape does not match input tensor")
    if x1.n_frames != plan.full_width:
        raise ValueError("plan does not cover the input width")
    if d.window_frames is not None and plan.window > d.window_frames:
        raise ValueError(
            f"plan window {plan.window} exceeds the denoiser window "
            f"({d.window_frames})"
        )
    schedule = schedule or BridgeSchedule()
    return _reverse_loop(
        x1, mask, lambda x, t: multidiffusion_eval(x, t, d, plan), cfg, rng, schedule
    )
