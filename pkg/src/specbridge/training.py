"""Training loop for the toy denoiser.

Each step draws a batch of clean factorized windows, degrades them with
random masks, samples a bridge time and the corresponding posterior state,
and regresses the normalized displacement on the masked cells only.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import torch

from .bridge import (
    BridgeSchedule,
    DegradationConfig,
    degrade,
    posterior_sample,
    sample_mask,
    training_target,
)
from .denoise import ToyDenoiser, ToyDenoiserNet
from .spectral import FactorizedSpec, StftParams


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_size: int = 4
    lr: float = 2e-4
    grad_clip: float = 0.5
    seed: int = 0
    channels: int = 32
    blocks: int = 7
    window_frames: int = 64
    t_min: float = 1e-4
    t_interval: tuple[float, float] = (0.0, 1.0)
    freq_loss_mask: bool = False
    log_every: int = 50

    def __post_init__(self) -> None:
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("steps and batch_size must be positive")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        lo, hi = self.t_interval
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError(f"bad t interval {self.t_interval}")


def _segment_freq_mask(x0: np.ndarray, threshold: float = 1e-3) -> np.ndarray:
    """Subbands up to the highest one carrying magnitude energy."""
    mag = x0[..., 0]
    peak = float(np.max(mag))
    if peak <= 0:
        return np.ones(x0.shape[0], dtype=bool)
    active = np.nonzero(np.max(mag, axis=1) > threshold * peak)[0]
    top = int(active[-1]) if active.size else x0.shape[0] - 1
    out = np.zeros(x0.shape[0], dtype=bool)
    out[: top + 1] = True
    return out


def train_toy(
    dataset: list[FactorizedSpec],
    cfg: TrainConfig,
    degradation: DegradationConfig,
    stft_params: StftParams,
    schedule: BridgeSchedule | None = None,
    progress: bool = False,
) -> tuple[ToyDenoiser, list[float]]:
    """Train a fresh toy denoiser; returns the model and the per-step loss
    history. Fully seeded: numpy drives data sampling, torch the init."""
    if not dataset:
        raise ValueError("training dataset is empty")
    schedule = schedule or BridgeSchedule()
    n_sub = dataset[0].n_subbands
    rho = dataset[0].rho
    for d in dataset:
        if d.n_subbands != n_sub or d.n_frames < cfg.window_frames:
            raise ValueError(
                "dataset items must share the subband count and be at least "
                f"{cfg.window_frames} frames long"
            )
    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)
    net = ToyDenoiserNet(n_subbands=n_sub, channels=cfg.channels, blocks=cfg.blocks)
    net.train()
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    t_lo = max(cfg.t_interval[0], 0.0)
    t_hi = cfg.t_interval[1]
    w = cfg.window_frames
    shape = (n_sub, w)
    history: list[float] = []
    t_start = time.monotonic()
    for step in range(cfg.steps):
        xs, ts, targets, masks = [], [], [], []
        for _ in range(cfg.batch_size):
            item = dataset[int(rng.integers(0, len(dataset)))]
            off = int(rng.integers(0, item.n_frames - w + 1))
            x0 = FactorizedSpec(
                item.data[:, off : off + w, :].copy(),
                rho=rho,
                sample_rate=item.sample_rate,
            )
            m = sample_mask(rng, shape, degradation, stft_params)
            x1 = degrade(x0, m, degradation.sigma_fill, rng)
            t = float(rng.uniform(max(t_lo, cfg.t_min), t_hi))
            x_t = posterior_sample(x0, x1, t, rng, schedule)
            tgt = training_target(x_t, x0, t, schedule)
            sel = m.mask
            if cfg.freq_loss_mask:
                sel = sel & _segment_freq_mask(x0.data)[:, None, None]
            xs.append(x_t.data.transpose(2, 0, 1))
            ts.append(t)
            targets.append(tgt.data.transpose(2, 0, 1))
            masks.append(sel.transpose(2, 0, 1))
        xb = torch.from_numpy(np.stack(xs)).float()
        tb = torch.tensor(ts, dtype=torch.float32)
        yb = torch.from_numpy(np.stack(targets)).float()
        mb = torch.from_numpy(np.stack(masks))
        pred = net(xb, tb)
        n_sel = mb.sum()
        if n_sel == 0:
            continue
        loss = ((pred - yb) ** 2 * mb).sum() / n_sel
        opt.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(net.parameters(), cfg.grad_clip)
        opt.step()
        history.append(float(loss.detach()))
        if progress and (step + 1) % cfg.log_every == 0:
            rate = (step + 1) / (time.monotonic() - t_start)
            recent = float(np.mean(history[-cfg.log_every :]))
            print(
                f"step {step + 1}/{cfg.steps} loss {recent:.4f} "
                f"({rate:.1f} it/s)",
                flush=True,
            )
    model = ToyDenoiser(
        net=net,
        stft_params=stft_params,
        rho=rho,
        beta_max=schedule.beta_max,
        window_frames=cfg.window_frames,
        t_interval=cfg.t_interval,
        sample_rate=degradation.sample_rate,
    )
    return model, history
