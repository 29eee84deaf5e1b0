"""Bridge process between clean and degraded spectrogram tensors.

The forward process interpolates between a clean endpoint ``x0`` (t=0) and a
degraded endpoint ``x1`` (t=1) with a symmetric noise schedule

    beta(t) = beta_max * min(t, 1 - t) ** 2

whose accumulated variance has the closed form

    sigma2(t) = beta_max * t**3 / 3                      for t <= 1/2
    sigma2(t) = beta_max * (1/12 - (1 - t)**3 / 3)       for t >  1/2

and the reverse accumulation sigma_bar2(t) = sigma2(1) - sigma2(t). The
posterior given both endpoints is Gaussian with

    mean = (sigma_bar2 * x0 + sigma2 * x1) / (sigma_bar2 + sigma2)
    var  = sigma_bar2 * sigma2 / (sigma_bar2 + sigma2)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import FactorizedSpec, StftParams


def round_half_up(x: float) -> int:
    """Round to nearest integer with exact halves going up (not banker's)."""
    return int(np.floor(x + 0.5))


def cutoff_to_subband(cutoff_hz: float, fft_size: int, sample_rate: int) -> int:
    """Number of low subbands kept for a bandwidth cutoff.

    E.g. a 4 kHz cutoff with fft_size=2048 at 44.1 kHz keeps
    round(4000 * 2048 / 44100) = 186 subbands.
    """
    if cutoff_hz <= 0 or cutoff_hz > sample_rate / 2:
        raise ValueError(f"cutoff {cutoff_hz} Hz outside (0, Nyquist]")
    return round_half_up(cutoff_hz * fft_size / sample_rate)


def seconds_to_frames(duration_s: float, sample_rate: int, hop: int) -> int:
    """Frame count covered by a duration: round(duration * sr / hop)."""
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    return max(1, round_half_up(duration_s * sample_rate / hop))


@dataclass(frozen=True)
class BridgeSchedule:
    """Closed-form noise schedule for the symmetric quadratic beta."""

    beta_max: float = 1.0

    def __post_init__(self) -> None:
        if self.beta_max <= 0:
            raise ValueError(f"beta_max must be positive, got {self.beta_max}")

    def beta(self, t):
        t = self._check(t)
        return self.beta_max * np.minimum(t, 1.0 - t) ** 2

    def sigma2(self, t):
        t = self._check(t)
        lo = t**3 / 3.0
        hi = 1.0 / 12.0 - (1.0 - t) ** 3 / 3.0
        return self.beta_max * np.where(t <= 0.5, lo, hi)

    def sigma(self, t):
        return np.sqrt(self.sigma2(t))

    def sigma_bar2(self, t):
        # Computed as terminal minus accumulated so the complementarity
        # sigma2 + sigma_bar2 == sigma2(1) holds exactly.
        return self.terminal_sigma2() - self.sigma2(t)

    def sigma_bar(self, t):
        return np.sqrt(self.sigma_bar2(t))

    def terminal_sigma2(self) -> float:
        return self.beta_max / 12.0

    def sigma2_inverse(self, s):
        """t such that sigma2(t) == s (the cubic is piecewise invertible)."""
        s = np.asarray(s, dtype=np.float64)
        if np.any(s < 0) or np.any(s > self.terminal_sigma2() * (1 + 1e-12)):
            raise ValueError("sigma2 value outside [0, sigma2(1)]")
        lo = np.cbrt(3.0 * s / self.beta_max)
        hi = 1.0 - np.cbrt(np.clip(3.0 * (self.terminal_sigma2() - s), 0.0, None) / self.beta_max)
        t = np.where(s <= self.beta_max / 24.0, lo, hi)
        return float(t) if t.ndim == 0 else t

    @staticmethod
    def _check(t):
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise ValueError("t must lie in [0, 1]")
        return t


@dataclass
class MaskSpec:
    """Boolean degradation mask over the factorized tensor (True = degraded),
    plus the metadata needed to describe it in sidecars and reports."""

    mask: np.ndarray
    task: str
    cutoff_subband: int | None = None
    gaps: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self) -> None:
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 3 or self.mask.shape[2] != 3:
            raise ValueError(f"mask must have shape (N, W, 3), got {self.mask.shape}")
        if self.task not in ("bandwidth_extension", "inpainting"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.gaps is not None:
            self.gaps = tuple((int(a), int(b)) for a, b in self.gaps)
            w = self.mask.shape[1]
            for w1, w2 in self.gaps:
                if not 0 <= w1 <= w2 < w:
                    raise ValueError(f"gap ({w1}, {w2}) outside frame range [0, {w})")

    @property
    def n_masked(self) -> int:
        return int(np.count_nonzero(self.mask))


def bwe_mask(shape: tuple[int, int], n_keep: int) -> MaskSpec:
    """Mask every subband above the kept low-frequency block (all channels)."""
    n, w = shape
    if not 0 < n_keep < n:
        raise ValueError(f"n_keep must lie in (0, {n}), got {n_keep}")
    mask = np.zeros((n, w, 3), dtype=bool)
    mask[n_keep:, :, :] = True
    return MaskSpec(mask, task="bandwidth_extension", cutoff_subband=n_keep)


def inpaint_mask(shape: tuple[int, int], gaps) -> MaskSpec:
    """Mask whole frame intervals (inclusive endpoints), all subbands/channels."""
    n, w = shape
    mask = np.zeros((n, w, 3), dtype=bool)
    gaps = tuple(gaps)
    for w1, w2 in gaps:
        if not 0 <= w1 <= w2 < w:
            raise ValueError(f"gap ({w1}, {w2}) outside frame range [0, {w})")
        mask[:, w1 : w2 + 1, :] = True
    return MaskSpec(mask, task="inpainting", gaps=gaps)


@dataclass(frozen=True)
class DegradationConfig:
    """Random degradation sampler settings (training-time augmentation)."""

    sample_rate: int = 44100
    sigma_fill: float = 1.0
    task: str = "both"
    bwe_min_hz: float = 4000.0
    bwe_max_hz: float | None = None
    gap_min_s: float = 0.1
    gap_max_s: float = 1.6

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.sigma_fill < 0:
            raise ValueError("sigma_fill must be non-negative")
        if self.task not in ("both", "bandwidth_extension", "inpainting"):
            raise ValueError(f"unknown task {self.task!r}")
        nyq = self.sample_rate / 2
        if not 0 < self.bwe_min_hz <= nyq:
            raise ValueError("bwe_min_hz outside (0, Nyquist]")
        if self.bwe_max_hz is not None and not self.bwe_min_hz <= self.bwe_max_hz <= nyq:
            raise ValueError("bwe_max_hz must lie in [bwe_min_hz, Nyquist]")
        if not 0 < self.gap_min_s <= self.gap_max_s:
            raise ValueError("need 0 < gap_min_s <= gap_max_s")


def sample_mask(
    rng: np.random.Generator,
    shape: tuple[int, int],
    cfg: DegradationConfig,
    stft_params: StftParams,
) -> MaskSpec:
    """Draw a random degradation mask.

    Bandwidth extension picks a cutoff subband uniformly over those whose
    center frequency lies in [bwe_min_hz, bwe_max_hz]; inpainting picks a gap
    duration uniformly in [gap_min_s, gap_max_s] (clamped to what fits) and a
    uniformly random placement.
    """
    n, w = shape
    task = cfg.task
    if task == "both":
        task = ("bandwidth_extension", "inpainting")[int(rng.integers(0, 2))]
    if task == "bandwidth_extension":
        lo = cutoff_to_subband(cfg.bwe_min_hz, stft_params.fft_size, cfg.sample_rate)
        if cfg.bwe_max_hz is None:
            hi = n - 1
        else:
            hi = cutoff_to_subband(cfg.bwe_max_hz, stft_params.fft_size, cfg.sample_rate)
        hi = min(hi, n - 1)
        if lo > hi:
            raise ValueError(
                f"no admissible cutoff subbands in [{cfg.bwe_min_hz}, "
                f"{cfg.bwe_max_hz}] Hz for {n} subbands"
            )
        n_keep = int(rng.integers(lo, hi + 1))
        return bwe_mask(shape, n_keep)
    # inpainting
    min_frames = seconds_to_frames(cfg.gap_min_s, cfg.sample_rate, stft_params.hop)
    if min_frames > w:
        raise ValueError(
            f"segment of {w} frames cannot hold a {cfg.gap_min_s}s gap "
            f"({min_frames} frames)"
        )
    dur = float(rng.uniform(cfg.gap_min_s, cfg.gap_max_s))
    g = min(seconds_to_frames(dur, cfg.sample_rate, stft_params.hop), w)
    w1 = int(rng.integers(0, w - g + 1))
    return inpaint_mask(shape, [(w1, w1 + g - 1)])


def degrade(
    x0: FactorizedSpec,
    mask: MaskSpec,
    sigma_fill: float,
    rng: np.random.Generator,
) -> FactorizedSpec:
    """Build the degraded endpoint: keep x0 outside the mask, replace masked
    cells with iid Gaussian fill of scale sigma_fill."""
    if mask.mask.shape != x0.data.shape:
        raise ValueError(
            f"mask shape {mask.mask.shape} does not match tensor {x0.data.shape}"
        )
    if sigma_fill < 0:
        raise ValueError("sigma_fill must be non-negative")
    fill = sigma_fill * rng.standard_normal(x0.data.shape)
    data = np.where(mask.mask, fill, x0.data)
    return FactorizedSpec(data, rho=x0.rho, sample_rate=x0.sample_rate)


def posterior_sample(
    x0: FactorizedSpec,
    x1: FactorizedSpec,
    t: float,
    rng: np.random.Generator,
    schedule: BridgeSchedule | None = None,
) -> FactorizedSpec:
    """Sample the bridge posterior q(x_t | x0, x1). Endpoints are returned
    exactly (t=0 -> x0, t=1 -> x1)."""
    if x0.data.shape != x1.data.shape:
        raise ValueError("endpoint tensors must share a shape")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return x0.copy()
    if t == 1.0:
        return x1.copy()
    schedule = schedule or BridgeSchedule()
    s2 = float(schedule.sigma2(t))
    sb2 = float(schedule.sigma_bar2(t))
    denom = s2 + sb2
    mean = (sb2 * x0.data + s2 * x1.data) / denom
    var = sb2 * s2 / denom
    data = mean + np.sqrt(var) * rng.standard_normal(x0.data.shape)
    return FactorizedSpec(data, rho=x0.rho, sample_rate=x0.sample_rate)


def training_target(
    x_t: FactorizedSpec,
    x0: FactorizedSpec,
    t: float,
    schedule: BridgeSchedule | None = None,
) -> FactorizedSpec:
    """Normalized displacement (x_t - x0) / sigma(t) the denoiser regresses."""
    if x_t.data.shape != x0.data.shape:
        raise ValueError("tensors must share a shape")
    if not 0.0 < t <= 1.0:
        raise ValueError(f"t must lie in (0, 1] for a finite target, got {t}")
    schedule = schedule or BridgeSchedule()
    sig = float(schedule.sigma(t))
    data = (x_t.data - x0.data) / sig
    return FactorizedSpec(data, rho=x0.rho, sample_rate=x0.sample_rate)


def masked_loss(
    eps_pred: FactorizedSpec,
    eps_target: FactorizedSpec,
    mask: MaskSpec,
    freq_mask: np.ndarray | None = None,
) -> float:
    """Mean squared error restricted to masked cells; optionally further
    restricted to a boolean subband selection. Empty selection -> 0.0."""
    if eps_pred.data.shape != eps_target.data.shape:
        raise ValueError("prediction/target shapes differ")
    if mask.mask.shape != eps_pred.data.shape:
        raise ValueError("mask shape does not match tensors")
    sel = mask.mask
    if freq_mask is not None:
        freq_mask = np.asarray(freq_mask, dtype=bool)
        if freq_mask.shape != (sel.shape[0],):
            raise ValueError("freq_mask must be a boolean vector over subbands")
        sel = sel & freq_mask[:, None, None]
    n = int(np.count_nonzero(sel))
    if n == 0:
        return 0.0
    diff = eps_pred.data[sel] - eps_target.data[sel]
    return float(np.mean(diff * diff))


def inpaint_gap_grid(
    n_samples: int,
    sample_rate: int,
    gap_ms: float,
    period_s: float,
    hop: int,
) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Deterministic evaluation gaps: one per full period, centered in it.

    Returns (sample intervals, frame intervals); both inclusive of the start,
    sample intervals exclusive of the end, frame intervals inclusive. The
    frame width is round(gap_s * sr / hop) for every gap.
    """
    if gap_ms <= 0 or period_s <= 0:
        raise ValueError("gap_ms and period_s must be positive")
    period = int(round(period_s * sample_rate))
    gap = round_half_up(gap_ms / 1000.0 * sample_rate)
    if gap > period:
        raise ValueError("gap longer than its period")
    n_gaps = n_samples // period
    g_frames = seconds_to_frames(gap_ms / 1000.0, sample_rate, hop)
    sample_iv: list[tuple[int, int]] = []
    frame_iv: list[tuple[int, int]] = []
    for k in range(n_gaps):
        start = k * period + (period - gap) // 2
        sample_iv.append((start, start + gap))
        w1 = round_half_up(start / hop)
        frame_iv.append((w1, w1 + g_frames - 1))
    return sample_iv, frame_iv
